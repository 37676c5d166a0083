/** Local session state: toggle decisions and submit payload assembly.
 *
 * Every shown sample defaults to benign (1); a click toggles the malign
 * mark (0) on and off.  The pending label map is exactly what submit
 * sends, and labels are held locally until the server acknowledges them,
 * so a failed request loses nothing.
 */

import { BatchItem, LabelSubmission } from "./api.js";
import { LabelTimer, distributeRemainder } from "./timing.js";

export interface PendingLabel {
  y: 0 | 1;
  elapsedMs: number | null; // null until a toggle stamps it
}

export class BatchState {
  readonly items: BatchItem[];
  private marks = new Map<string, PendingLabel>();

  constructor(items: BatchItem[], private timer: LabelTimer) {
    this.items = items;
    for (const item of items) {
      this.marks.set(item.sample_id, { y: 1, elapsedMs: null });
    }
    timer.resetEvents();
  }

  /** Toggle the malign mark; a second click reverts to benign. */
  toggle(sampleId: string): PendingLabel {
    const mark = this.marks.get(sampleId);
    if (!mark) {
      throw new Error(`unknown sample ${sampleId}`);
    }
    mark.y = mark.y === 1 ? 0 : 1;
    mark.elapsedMs = (mark.elapsedMs ?? 0) + this.timer.takeDelta();
    return mark;
  }

  isMalign(sampleId: string): boolean {
    return this.marks.get(sampleId)?.y === 0;
  }

  malignCount(): number {
    let n = 0;
    for (const mark of this.marks.values()) {
      if (mark.y === 0) n += 1;
    }
    return n;
  }

  /** Build the submit payload for every shown sample.
   *
   * Toggled samples carry their click-time deltas; untouched ones split
   * the remaining visible time, so the submitted deltas sum to the total
   * visible time for the batch.
   */
  payload(): LabelSubmission[] {
    const timed = new Map<string, number>();
    const untimed: string[] = [];
    for (const [id, mark] of this.marks) {
      if (mark.elapsedMs === null) {
        untimed.push(id);
      } else {
        timed.set(id, mark.elapsedMs);
      }
    }
    const remainder = this.timer.takeDelta();
    const deltas = distributeRemainder(timed, untimed, remainder);
    return this.items.map((item) => ({
      sample_id: item.sample_id,
      y: (this.marks.get(item.sample_id) as PendingLabel).y,
      elapsed_ms: deltas.get(item.sample_id) ?? 0,
    }));
  }
}
