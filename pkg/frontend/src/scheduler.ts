/**
 * Drift-corrected epoch timer. Each tick is scheduled against an absolute
 * target on a monotonic clock (t0 + k * interval), so per-tick timer lag
 * never accumulates across the 68 epochs of a trial.
 */

export interface Clock {
  /** Monotonic milliseconds (performance.now in the browser). */
  now(): number;
}

export interface TimerHost {
  setTimeout(fn: () => void, delayMs: number): unknown;
  clearTimeout(handle: unknown): void;
}

export class EpochScheduler {
  private handle: unknown = null;
  private startMs = 0;
  private tickCount = 0;
  private running = false;

  constructor(
    private readonly host: TimerHost,
    private readonly clock: Clock,
    private readonly intervalMs: number,
    private readonly onTick: (nowMs: number) => boolean | void,
  ) {}

  /** Fires the first tick immediately, then every intervalMs. */
  start(): void {
    if (this.running) {
      throw new Error('scheduler already running');
    }
    this.running = true;
    this.startMs = this.clock.now();
    this.tickCount = 0;
    this.fire();
  }

  stop(): void {
    this.running = false;
    if (this.handle !== null) {
      this.host.clearTimeout(this.handle);
      this.handle = null;
    }
  }

  private fire(): void {
    if (!this.running) {
      return;
    }
    const now = this.clock.now();
    const keepGoing = this.onTick(now);
    this.tickCount += 1;
    if (keepGoing === false || !this.running) {
      this.stop();
      return;
    }
    const target = this.startMs + this.tickCount * this.intervalMs;
    const delay = Math.max(0, target - this.clock.now());
    this.handle = this.host.setTimeout(() => this.fire(), delay);
  }
}
