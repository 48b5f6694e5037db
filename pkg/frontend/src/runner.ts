/**
 * Glue between the trial state machine and the epoch scheduler, plus the
 * scripted playback used by tests and fixture generation.
 */

import { Clock, EpochScheduler, TimerHost } from './scheduler.js';
import { SessionExport, Trial, TrialConfig } from './trial.js';

export interface RunnerHooks {
  onEpoch?: (trial: Trial) => void;
  onDone?: (trial: Trial) => void;
  /** Optional live sync consumer (e.g. HTTP POST for alignment rigs). */
  onSync?: (epochIndex: number, atMs: number) => void;
}

export class TrialRunner {
  readonly trial: Trial;
  private readonly scheduler: EpochScheduler;

  constructor(
    config: TrialConfig,
    host: TimerHost,
    clock: Clock,
    private readonly hooks: RunnerHooks = {},
  ) {
    this.trial = new Trial(config);
    this.scheduler = new EpochScheduler(
      host, clock, (config.epochSeconds ?? 5.0) * 1000,
      (nowMs) => this.tick(nowMs),
    );
  }

  start(): void {
    this.scheduler.start();
  }

  abort(): void {
    this.scheduler.stop();
    this.trial.abort();
  }

  recordAnswer(key: number, nowMs: number): boolean {
    return this.trial.recordAnswer(key, nowMs);
  }

  private tick(nowMs: number): boolean {
    const phase = this.trial.advanceEpoch(nowMs);
    if (phase === 'done') {
      this.hooks.onDone?.(this.trial);
      return false;
    }
    this.hooks.onSync?.(this.trial.epochIndex, nowMs);
    this.hooks.onEpoch?.(this.trial);
    return true;
  }
}

export interface ScriptedAnswerPlan {
  /** Epoch indices (0-based) answered wrongly (+1 mod 5 against truth). */
  wrongEpochs: ReadonlySet<number>;
  /** Epoch indices left unanswered. */
  skippedEpochs: ReadonlySet<number>;
}

/**
 * Run a whole trial synchronously on a simulated clock, answering from the
 * truth sequence per the plan. Epochs below the N-back level cannot be
 * answered meaningfully and are skipped.
 */
export function runScriptedTrial(
  config: TrialConfig,
  plan: ScriptedAnswerPlan,
  jitterMs: (k: number) => number = () => 0,
): SessionExport {
  const trial = new Trial(config);
  const epochMs = (config.epochSeconds ?? 5.0) * 1000;
  const total = config.totalEpochs ?? 68;
  for (let k = 0; k <= total; k++) {
    const phase = trial.advanceEpoch(k * epochMs + jitterMs(k));
    if (phase === 'done') {
      break;
    }
    const i = trial.epochIndex;
    const n = trial.nbackLevel;
    if (i < n || plan.skippedEpochs.has(i)) {
      continue;
    }
    const truth = trial.truthCounts[i - n]!;
    const value = plan.wrongEpochs.has(i) ? (truth + 1) % 5 : truth;
    trial.recordAnswer(value, k * epochMs + 1500);
  }
  return trial.exportSession();
}
