/** Visible-time stopwatch with per-label delta attribution.
 *
 * The clock accumulates only while the batch is visible (the page binds
 * visibility events to pause/resume).  Each recorded label decision takes
 * the elapsed visible time since the previous recorded event, so the
 * submitted deltas always sum to the total visible time up to submission.
 */

export class LabelTimer {
  private running = false;
  private startedAt = 0;
  private accumulated = 0;
  private lastEventAt = 0;

  constructor(private clock: () => number = () => performance.now()) {}

  start(): void {
    if (!this.running) {
      this.running = true;
      this.startedAt = this.clock();
    }
  }

  pause(): void {
    if (this.running) {
      this.accumulated += this.clock() - this.startedAt;
      this.running = false;
    }
  }

  resume(): void {
    this.start();
  }

  /** Total visible milliseconds so far. */
  elapsed(): number {
    const live = this.running ? this.clock() - this.startedAt : 0;
    return this.accumulated + live;
  }

  /** Visible milliseconds since the previous recorded event. */
  takeDelta(): number {
    const now = this.elapsed();
    const delta = now - this.lastEventAt;
    this.lastEventAt = now;
    return delta;
  }

  /** Reset event attribution for a fresh batch (clock keeps running). */
  resetEvents(): void {
    this.lastEventAt = this.elapsed();
  }
}

/** Spread the remaining visible time equally over untimed labels so the
 *  per-label deltas still sum to the total. */
export function distributeRemainder(
  timed: Map<string, number>,
  untimedIds: string[],
  remainder: number,
): Map<string, number> {
  const out = new Map(timed);
  if (untimedIds.length === 0) {
    return out;
  }
  const share = remainder / untimedIds.length;
  for (const id of untimedIds) {
    out.set(id, share);
  }
  return out;
}

export function bindVisibility(timer: LabelTimer, doc: Document = document): () => void {
  const onChange = () => {
    if (doc.hidden) {
      timer.pause();
    } else {
      timer.resume();
    }
  };
  doc.addEventListener("visibilitychange", onChange);
  return () => doc.removeEventListener("visibilitychange", onChange);
}
