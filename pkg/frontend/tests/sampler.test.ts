import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { GazeSampler } from "../src/sampler.js";

describe("60 Hz mouse sampler", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("one second of steady cursor yields 60 +/- 6 samples with monotone t", () => {
    const sent: number[] = [];
    const sampler = new GazeSampler((t) => sent.push(t));
    sampler.start();
    vi.advanceTimersByTime(1000);
    sampler.stop();
    expect(sent.length).toBeGreaterThanOrEqual(54);
    expect(sent.length).toBeLessThanOrEqual(66);
    expect(sent).toEqual([...sent].sort((a, b) => a - b));
    expect(new Set(sent).size).toBe(sent.length);
  });

  it("sends the latest cursor position", () => {
    const seen: Array<[number, number]> = [];
    const sampler = new GazeSampler((_t, x, y) => seen.push([x, y]));
    sampler.x = 120;
    sampler.y = 340;
    sampler.start();
    vi.advanceTimersByTime(50);
    sampler.stop();
    expect(seen.length).toBeGreaterThan(0);
    expect(seen[seen.length - 1]).toEqual([120, 340]);
  });

  it("stopped sampler sends nothing", () => {
    const sent: number[] = [];
    const sampler = new GazeSampler((t) => sent.push(t));
    sampler.start();
    sampler.stop();
    vi.advanceTimersByTime(2000);
    expect(sent).toEqual([]);
    expect(sampler.running).toBe(false);
  });
});
