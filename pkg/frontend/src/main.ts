/** Page wiring: session lifecycle, canvas interaction, retry banner,
 *  and the round-over-round progress view. */

import { AnnotationApi, ApiError, BatchItem, LabelSubmission, WorldContext } from "./api.js";
import { BatchState } from "./session.js";
import { LabelTimer, bindVisibility } from "./timing.js";
import { LabeledPoint, Viewport, drawScene, hitTest } from "./render.js";

const api = new AnnotationApi("");

interface Ui {
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  progress: HTMLElement;
  banner: HTMLElement;
  submitBtn: HTMLButtonElement;
  completeBtn: HTMLButtonElement;
  rounds: HTMLElement;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class App {
  private ui: Ui;
  private timer = new LabelTimer();
  private sessionId = "";
  private runId = "run";
  private round = 1;
  private world: WorldContext | null = null;
  private state: BatchState | null = null;
  private acknowledged: LabeledPoint[] = [];
  private pendingRetry: LabelSubmission[] | null = null;
  private viewport: Viewport | null = null;

  constructor() {
    this.ui = {
      canvas: el("board"),
      status: el("status"),
      progress: el("progress"),
      banner: el("banner"),
      submitBtn: el("submit"),
      completeBtn: el("complete"),
      rounds: el("rounds"),
    };
    this.ui.canvas.addEventListener("click", (ev) => this.onClick(ev));
    this.ui.submitBtn.addEventListener("click", () => void this.submit());
    this.ui.completeBtn.addEventListener("click", () => void this.complete());
    bindVisibility(this.timer);
  }

  async start(): Promise<void> {
    const runs = await api.listRuns();
    if (!runs.length) {
      this.ui.status.textContent = "no runs hosted by the service";
      return;
    }
    this.runId = runs[0].run_id;
    this.round = runs[0].round;
    const session = await api.createSession(this.runId, this.round);
    this.sessionId = session.session_id;
    this.world = session.world;
    this.viewport = {
      width: this.ui.canvas.width,
      height: this.ui.canvas.height,
      lo: session.world.bounds.lo,
      hi: session.world.bounds.hi,
    };
    this.timer.start();
    await this.nextBatch();
    await this.refreshRounds();
  }

  private async nextBatch(): Promise<void> {
    const batch = await api.fetchBatch(this.sessionId);
    this.renderProgress(batch.progress);
    if (batch.quota_met && batch.items.length === 0) {
      this.state = null;
      this.ui.status.textContent = "quota met: complete the round";
      this.ui.completeBtn.disabled = false;
      this.ui.submitBtn.disabled = true;
      this.draw();
      return;
    }
    this.state = new BatchState(batch.items, this.timer);
    this.ui.status.textContent =
      `round ${this.round}: click malign samples (red ring), then submit`;
    this.ui.submitBtn.disabled = false;
    this.ui.completeBtn.disabled = true;
    this.draw();
  }

  private onClick(ev: MouseEvent): void {
    if (!this.state || !this.viewport) return;
    const rect = this.ui.canvas.getBoundingClientRect();
    const hit = hitTest(this.viewport, this.state.items, [
      ev.clientX - rect.left,
      ev.clientY - rect.top,
    ]);
    if (hit) {
      this.state.toggle(hit.sample_id);
      this.draw();
    }
  }

  private async submit(): Promise<void> {
    if (!this.state) return;
    const payload = this.pendingRetry ?? this.state.payload();
    this.pendingRetry = payload; // held locally until acknowledged
    try {
      await api.submitLabels(this.sessionId, payload);
      for (const item of this.state.items) {
        const sent = payload.find((p) => p.sample_id === item.sample_id);
        this.acknowledged.push({ point: item.point, y: (sent?.y ?? 1) as 0 | 1 });
      }
      this.pendingRetry = null;
      this.hideBanner();
      await this.nextBatch();
    } catch (err) {
      this.showBanner(err);
    }
  }

  private async complete(): Promise<void> {
    try {
      const res = await api.complete(this.sessionId);
      this.ui.status.textContent =
        `round ${res.round} trained; run status: ${res.run_status}`;
      this.ui.completeBtn.disabled = true;
      await this.refreshRounds();
      if (res.run_status.startsWith("round_")) {
        this.round = Number(res.run_status.slice(6));
        const session = await api.createSession(this.runId, this.round);
        this.sessionId = session.session_id;
        this.timer.resetEvents();
        await this.nextBatch();
      }
    } catch (err) {
      this.showBanner(err);
    }
  }

  private async refreshRounds(): Promise<void> {
    const metrics = await api.runMetrics(this.runId);
    const parts = metrics.rounds.map((m) => {
      const frac = m.eval_malign_fraction;
      const shown = frac === null ? "n/a" : `${(100 * frac).toFixed(1)}%`;
      return `<li>round ${m.round}: malign fraction ${shown} ` +
        `(${m.presented} presented)</li>`;
    });
    this.ui.rounds.innerHTML = parts.join("") || "<li>no completed rounds yet</li>";
  }

  private renderProgress(p: {
    malign_labeled: number;
    benign_labeled: number;
    quota_malign: number;
    quota_benign: number;
  }): void {
    this.ui.progress.textContent =
      `malign ${p.malign_labeled}/${p.quota_malign} · ` +
      `benign ${p.benign_labeled}/${p.quota_benign} · ` +
      `elapsed ${(this.timer.elapsed() / 1000).toFixed(1)}s`;
  }

  private showBanner(err: unknown): void {
    const msg = err instanceof ApiError ? err.message : String(err);
    this.ui.banner.textContent = `request failed (${msg}) — labels kept locally, retry`;
    this.ui.banner.style.display = "block";
  }

  private hideBanner(): void {
    this.ui.banner.style.display = "none";
  }

  private draw(): void {
    if (!this.world || !this.viewport) return;
    const ctx = this.ui.canvas.getContext("2d");
    if (!ctx || !this.state) return;
    drawScene(ctx, this.viewport, this.world, this.state, this.acknowledged);
  }
}

window.addEventListener("DOMContentLoaded", () => {
  void new App().start();
});
