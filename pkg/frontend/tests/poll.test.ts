import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { BASE_INTERVAL_MS, nextDelay, Poller, type PollStatus } from "../src/poll.js";

describe("nextDelay", () => {
  it("doubles per failure and caps at thirty seconds", () => {
    expect(nextDelay(0)).toBe(BASE_INTERVAL_MS);
    expect(nextDelay(1)).toBe(6000);
    expect(nextDelay(2)).toBe(12000);
    expect(nextDelay(3)).toBe(24000);
    expect(nextDelay(4)).toBe(30000);
    expect(nextDelay(50)).toBe(30000);
  });
});

describe("Poller", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("reports lost after a failure and ok after recovery", async () => {
    let failNext = true;
    const statuses: PollStatus[] = [];
    const poller = new Poller(
      async () => {
        if (failNext) {
          throw new Error("down");
        }
      },
      (status) => statuses.push(status)
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(statuses.at(-1)).toEqual({ state: "lost", failures: 1 });

    failNext = false;
    await vi.advanceTimersByTimeAsync(nextDelay(1));
    expect(statuses.at(-1)).toEqual({ state: "ok", failures: 0 });
    poller.stop();
  });

  it("keeps counting consecutive failures", async () => {
    const statuses: PollStatus[] = [];
    const poller = new Poller(
      async () => {
        throw new Error("down");
      },
      (status) => statuses.push(status)
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(nextDelay(1));
    await vi.advanceTimersByTimeAsync(nextDelay(2));
    expect(statuses.at(-1)?.failures).toBe(3);
    poller.stop();
  });

  it("retryNow fires without waiting out the backoff", async () => {
    let ticks = 0;
    const poller = new Poller(
      async () => {
        ticks += 1;
        throw new Error("down");
      },
      () => {}
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(ticks).toBe(1);
    poller.retryNow();
    await vi.advanceTimersByTimeAsync(0);
    expect(ticks).toBe(2);
    poller.stop();
  });

  it("does nothing after stop", async () => {
    let ticks = 0;
    const poller = new Poller(
      async () => {
        ticks += 1;
      },
      () => {}
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    poller.stop();
    await vi.advanceTimersByTimeAsync(BASE_INTERVAL_MS * 4);
    expect(ticks).toBe(1);
  });
});
