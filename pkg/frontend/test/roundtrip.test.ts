/** Scripted end-to-end session against a live annotation server.
 *
 * Boots the Python service on the symmetric-pair world, drives a full
 * labeling round through the real client states (batch fetch, toggles,
 * submit, complete), then checks the resulting feedback buffer against an
 * oracle-mode CLI run of the same config.  On this world the oracle's
 * decision rule is exactly "malign iff x1 < 0", so the script can
 * reproduce the oracle's choices.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { BatchState } from "../src/session.js";
import { LabelTimer } from "../src/timing.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let workDir: string;
let cliDir: string;
let serviceDir: string;

function runConfig(outDir: string): string {
  return JSON.stringify({
    preset: "symmetric_pair",
    schedule: { num_steps: 150 },
    reward: { train: { iterations: 30 } },
    feedback: { rounds: 1, quota: [3, 3], batch_size: 8 },
    seed: 77,
    out_dir: outDir,
  });
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const res = await fetch(`${BASE}/api/runs`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "censorlab-ui-"));
  cliDir = join(workDir, "cli_run");
  serviceDir = join(workDir, "service_run");

  const cliConfig = join(workDir, "cli.json");
  writeFileSync(cliConfig, runConfig(cliDir));
  execFileSync("python3", ["-m", "censorlab.cli", "imitate", "--config", cliConfig,
    "--out", cliDir], { stdio: "pipe" });

  const serveConfig = join(workDir, "serve.json");
  writeFileSync(serveConfig, runConfig(serviceDir));
  server = spawn("python3", ["-m", "censorlab.cli", "serve", "--config", serveConfig,
    "--port", String(PORT)], { stdio: "pipe" });
  await waitForServer();
}, 180_000);

afterAll(() => {
  server?.kill();
});

interface BufferRecord {
  x: [number, number];
  y: number;
  round: number;
  source: string;
  elapsed_label_seconds: number;
  kept: boolean;
}

function readBuffer(dir: string): BufferRecord[] {
  return readFileSync(join(dir, "buffer.jsonl"), "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line) as BufferRecord);
}

describe("scripted session round trip", () => {
  it("fetches, toggles, submits, completes; buffer matches the oracle run", async () => {
    const api = new AnnotationApi(BASE);
    const runs = await api.listRuns();
    expect(runs[0].run_id).toBe("run");

    const session = await api.createSession("run", 1);
    expect(session.quota).toEqual({ malign: 3, benign: 3 });
    expect(session.world.components).toHaveLength(2);

    const timer = new LabelTimer();
    timer.start();
    let submittedMs = 0;
    let wallVisibleMs = 0; // independent stopwatch over batch-visible spans
    for (;;) {
      const batch = await api.fetchBatch(session.session_id);
      if (batch.quota_met && batch.items.length === 0) {
        break;
      }
      const shownAt = performance.now();
      const state = new BatchState(batch.items, timer);
      for (const item of batch.items) {
        if (item.point[0] < 0) {
          state.toggle(item.sample_id); // oracle rule: malign iff x1 < 0
        }
      }
      const payload = state.payload();
      wallVisibleMs += performance.now() - shownAt;
      expect(payload).toHaveLength(batch.items.length);
      expect(payload.filter((p) => p.y === 0)).toHaveLength(
        batch.items.filter((i) => i.point[0] < 0).length,
      );
      submittedMs += payload.reduce((acc, p) => acc + p.elapsed_ms, 0);
      const ack = await api.submitLabels(session.session_id, payload);
      expect(ack.stored).toBe(payload.length);
      // idempotent resubmission is a no-op
      const again = await api.submitLabels(session.session_id, payload);
      expect(again.stored).toBe(0);
    }

    const done = await api.complete(session.session_id);
    expect(done.metrics.round).toBe(1);

    // instant scripted clicks: the submitted deltas track an independent
    // wall clock over the batch-visible spans to within 100 ms
    expect(Math.abs(wallVisibleMs - submittedMs)).toBeLessThan(100);

    // the elapsed-time ledger equals the submitted deltas
    const metrics = await api.runMetrics("run");
    expect(metrics.labels_count).toBeGreaterThan(0);
    expect(metrics.total_label_seconds).toBeCloseTo(submittedMs / 1000.0, 6);

    // buffer content matches the oracle-mode CLI twin: identical points,
    // labels, rounds and kept flags; source/elapsed differ by design
    // (human vs oracle), so compare with those fields normalized
    const ours = readBuffer(serviceDir);
    const oracle = readBuffer(cliDir);
    expect(ours.length).toBe(oracle.length);
    const strip = (r: BufferRecord) =>
      JSON.stringify({ x: r.x, y: r.y, round: r.round, kept: r.kept });
    expect(ours.map(strip)).toEqual(oracle.map(strip));
    expect(ours.every((r) => r.source === "human")).toBe(true);
    expect(oracle.every((r) => r.source === "oracle")).toBe(true);
  }, 120_000);
});
