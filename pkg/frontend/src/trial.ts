/**
 * N-back trial state machine. Pure logic: no DOM, no timers. The runner
 * feeds it monotonic timestamps; every displayed digit set, truth count,
 * answer and sync event is reproducible from the seed.
 */

import { mulberry32, seedFromSessionId } from './rng.js';

export type NbackLevel = 0 | 1 | 2 | 3;
export type Phase = 'idle' | 'calibration' | 'active' | 'done';

export interface TrialConfig {
  subjectId: string;
  nbackLevel: NbackLevel;
  totalEpochs?: number;
  calibrationEpochs?: number;
  epochSeconds?: number;
  /** Sample rate recorded in the manifest for the paired PPG recording. */
  sampleRate?: number;
  seed?: number;
}

export interface SyncEvent {
  epochIndex: number;
  atMs: number;
}

export interface AnswerEntry {
  value: number;
  atMs: number;
}

export interface SessionManifest {
  format_version: 1;
  subject_id: string;
  nback_level: number;
  sample_rate: number;
  epoch_seconds: number;
  total_epochs: number;
  calibration_epochs: number;
  answers: (number | null)[];
  truth_counts: number[];
}

export interface SessionExport {
  manifest: SessionManifest;
  syncLog: SyncEvent[];
}

export function countOdd(digits: readonly number[]): number {
  return digits.filter((d) => d % 2 === 1).length;
}

export class Trial {
  readonly subjectId: string;
  readonly nbackLevel: NbackLevel;
  readonly totalEpochs: number;
  readonly calibrationEpochs: number;
  readonly epochSeconds: number;
  readonly sampleRate: number;

  phase: Phase = 'idle';
  /** -1 before the first epoch is shown. */
  epochIndex = -1;
  digits: number[] = [];
  /** Every digit set shown, in order; truth counts replay from this. */
  digitLog: number[][] = [];
  truthCounts: number[] = [];
  answers: (AnswerEntry | null)[] = [];
  syncLog: SyncEvent[] = [];

  private readonly random: () => number;

  constructor(config: TrialConfig) {
    this.subjectId = config.subjectId;
    this.nbackLevel = config.nbackLevel;
    this.totalEpochs = config.totalEpochs ?? 68;
    this.calibrationEpochs = config.calibrationEpochs ?? 6;
    this.epochSeconds = config.epochSeconds ?? 5.0;
    this.sampleRate = config.sampleRate ?? 62.5;
    this.random = mulberry32(config.seed ?? seedFromSessionId(config.subjectId));
    if (this.totalEpochs < this.calibrationEpochs) {
      throw new Error('totalEpochs must be >= calibrationEpochs');
    }
  }

  get isCalibrationEpoch(): boolean {
    return this.epochIndex >= 0 && this.epochIndex < this.calibrationEpochs;
  }

  /**
   * Show the next 4 digits, push their odd count, and emit a sync event.
   * After the final epoch has run, the next call transitions to done
   * instead (no digits, no sync event).
   */
  advanceEpoch(nowMs: number): Phase {
    if (this.phase === 'done') {
      throw new Error('trial is finished');
    }
    if (this.epochIndex + 1 >= this.totalEpochs) {
      this.phase = 'done';
      return this.phase;
    }
    this.epochIndex += 1;
    this.digits = Array.from({ length: 4 }, () => Math.floor(this.random() * 10));
    this.digitLog.push([...this.digits]);
    this.truthCounts.push(countOdd(this.digits));
    this.answers.push(null);
    this.syncLog.push({ epochIndex: this.epochIndex, atMs: nowMs });
    this.phase = this.isCalibrationEpoch ? 'calibration' : 'active';
    return this.phase;
  }

  /**
   * Record a keyboard answer (0-4) for the current epoch; later keypresses
   * within the same epoch overwrite. Calibration-epoch answers are accepted
   * (they are identifiable through calibration_epochs). Returns false when
   * the key is rejected so the UI can flash feedback.
   */
  recordAnswer(key: number, nowMs: number): boolean {
    if (this.phase !== 'active' && this.phase !== 'calibration') {
      return false;
    }
    if (!Number.isInteger(key) || key < 0 || key > 4) {
      return false;
    }
    this.answers[this.epochIndex] = { value: key, atMs: nowMs };
    return true;
  }

  abort(): void {
    this.phase = 'idle';
    this.epochIndex = -1;
    this.digits = [];
    this.digitLog = [];
    this.truthCounts = [];
    this.answers = [];
    this.syncLog = [];
  }

  /** Manifest plus sync log; refused until the trial is done. */
  exportSession(): SessionExport {
    if (this.phase !== 'done') {
      throw new Error('export refused: trial still running');
    }
    return {
      manifest: {
        format_version: 1,
        subject_id: this.subjectId,
        nback_level: this.nbackLevel,
        sample_rate: this.sampleRate,
        epoch_seconds: this.epochSeconds,
        total_epochs: this.totalEpochs,
        calibration_epochs: this.calibrationEpochs,
        answers: this.answers.map((a) => (a === null ? null : a.value)),
        truth_counts: [...this.truthCounts],
      },
      syncLog: [...this.syncLog],
    };
  }
}
