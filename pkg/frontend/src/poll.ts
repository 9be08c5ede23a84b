/** Polling state machine. The tick itself is injected so the schedule
 * logic stays synchronous and testable; the banner state derives from the
 * consecutive failure count. */

export type ConnectionState = "ok" | "lost";

export interface PollStatus {
  state: ConnectionState;
  failures: number;
}

export const BASE_INTERVAL_MS = 3000;
const MAX_INTERVAL_MS = 30000;

/** Exponential backoff after repeated failures, capped so a recovering
 * server is noticed within half a minute. */
export function nextDelay(failures: number): number {
  if (failures <= 0) {
    return BASE_INTERVAL_MS;
  }
  const scaled = BASE_INTERVAL_MS * 2 ** Math.min(failures, 8);
  return Math.min(scaled, MAX_INTERVAL_MS);
}

export class Poller {
  private failures = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;

  constructor(
    private readonly tick: () => Promise<void>,
    private readonly onStatus: (status: PollStatus) => void
  ) {}

  status(): PollStatus {
    return { state: this.failures > 0 ? "lost" : "ok", failures: this.failures };
  }

  start(): void {
    if (!this.stopped) {
      return;
    }
    this.stopped = false;
    void this.runOnce();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  /** Manual retry from the banner: fire immediately instead of waiting out
   * the backoff window. */
  retryNow(): void {
    if (this.stopped) {
      return;
    }
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    void this.runOnce();
  }

  private async runOnce(): Promise<void> {
    try {
      await this.tick();
      this.failures = 0;
    } catch {
      this.failures += 1;
    }
    this.onStatus(this.status());
    if (!this.stopped) {
      this.timer = setTimeout(() => void this.runOnce(), nextDelay(this.failures));
    }
  }
}
