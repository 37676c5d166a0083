import { describe, expect, it } from "vitest";

import { BatchItem } from "../src/api.js";
import { BatchState } from "../src/session.js";
import { LabelTimer } from "../src/timing.js";

function items(n: number): BatchItem[] {
  return Array.from({ length: n }, (_, i) => ({
    sample_id: `s${i}`,
    point: [i, -i] as [number, number],
    labeled: false,
  }));
}

function manualClock() {
  let now = 0;
  return { advance: (ms: number) => (now += ms), clock: () => now };
}

describe("toggle semantics", () => {
  it("click marks malign, second click reverts to benign", () => {
    const { clock } = manualClock();
    const state = new BatchState(items(3), new LabelTimer(clock));
    expect(state.isMalign("s1")).toBe(false);
    state.toggle("s1");
    expect(state.isMalign("s1")).toBe(true);
    state.toggle("s1");
    expect(state.isMalign("s1")).toBe(false);
  });

  it("payload has exactly k malign entries for k toggled of m shown", () => {
    const { clock } = manualClock();
    const state = new BatchState(items(8), new LabelTimer(clock));
    state.toggle("s2");
    state.toggle("s5");
    state.toggle("s7");
    const payload = state.payload();
    expect(payload).toHaveLength(8);
    expect(payload.filter((p) => p.y === 0)).toHaveLength(3);
    expect(state.malignCount()).toBe(3);
  });

  it("rejects unknown sample ids", () => {
    const { clock } = manualClock();
    const state = new BatchState(items(2), new LabelTimer(clock));
    expect(() => state.toggle("nope")).toThrow();
  });
});

describe("timing attribution", () => {
  it("per-label deltas sum to total visible time", () => {
    const { advance, clock } = manualClock();
    const timer = new LabelTimer(clock);
    timer.start();
    const state = new BatchState(items(4), timer);
    advance(120);
    state.toggle("s0");
    advance(80);
    state.toggle("s3");
    advance(50);
    const payload = state.payload();
    const total = payload.reduce((acc, p) => acc + p.elapsed_ms, 0);
    expect(total).toBeCloseTo(250, 6);
    expect(payload.find((p) => p.sample_id === "s0")?.elapsed_ms).toBeCloseTo(120, 6);
    expect(payload.find((p) => p.sample_id === "s3")?.elapsed_ms).toBeCloseTo(80, 6);
  });

  it("hidden tab pauses the clock", () => {
    const { advance, clock } = manualClock();
    const timer = new LabelTimer(clock);
    timer.start();
    advance(100);
    timer.pause();
    advance(500); // tab hidden; must not count
    timer.resume();
    advance(25);
    expect(timer.elapsed()).toBeCloseTo(125, 6);
  });

  it("zero labels submit zero elapsed", () => {
    const { clock } = manualClock();
    const state = new BatchState([], new LabelTimer(clock));
    expect(state.payload()).toHaveLength(0);
  });
});
