"""Two-wavelength synthetic PPG with fully known ground truth.

The generator is the pipeline's verification oracle: every recording it
emits carries an exact SpO2 / heart-rate / respiration trajectory, so the
extraction chain can be checked end to end without real sensor data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import i0 as _bessel_i0

from .errors import DomainError

DEFAULT_SAMPLE_RATE = 62.5  # Hz; 150 samples = 2.4 s
EPOCH_SECONDS = 5.0

# SpO2 = CAL_INTERCEPT - CAL_SLOPE * R (manufacturer-style linear calibration)
CAL_INTERCEPT = 104.0
CAL_SLOPE = 17.0


def r_from_spo2(spo2):
    """Invert the linear SpO2 calibration: R = (104 - SpO2) / 17.

    Accepts scalars or arrays; the domain is SpO2 in [0, 104] where R >= 0.
    """
    s = np.asarray(spo2, dtype=float)
    if np.any(s < 0.0) or np.any(s > CAL_INTERCEPT):
        raise DomainError(f"SpO2 must lie in [0, {CAL_INTERCEPT}], got {spo2}")
    r = (CAL_INTERCEPT - s) / CAL_SLOPE
    return float(r) if np.isscalar(spo2) else r


@dataclass
class GroundTruth:
    """Generator set-points. Per-epoch quantities accept a scalar (constant)
    or one value per 5-second epoch."""

    spo2_trajectory: float | np.ndarray = 97.4
    heart_rate: float | np.ndarray = 84.3      # bpm
    resp_rate: float | np.ndarray = 12.8       # breaths/min
    resp_mod_depth: float = 0.2
    dc_red: float = 52000.0
    dc_ir: float = 50000.0
    perfusion_ir: float = 0.003                # AC/DC fraction, IR channel
    noise_sd: float = 0.0
    seed: int = 0
    artifact_rate: float = 0.0                 # expected motion spikes per second

    def validate(self) -> None:
        spo2 = np.atleast_1d(np.asarray(self.spo2_trajectory, dtype=float))
        hr = np.atleast_1d(np.asarray(self.heart_rate, dtype=float))
        rr = np.atleast_1d(np.asarray(self.resp_rate, dtype=float))
        if np.any(spo2 < 70.0) or np.any(spo2 > 100.0):
            raise DomainError("spo2_trajectory must lie in [70, 100]")
        if np.any(hr < 30.0) or np.any(hr > 220.0):
            raise DomainError("heart_rate must lie in [30, 220] bpm")
        if np.any(rr < 4.0) or np.any(rr > 60.0):
            raise DomainError("resp_rate must lie in [4, 60] breaths/min")
        if not 0.0 <= self.resp_mod_depth <= 1.0:
            raise DomainError("resp_mod_depth must lie in [0, 1]")
        if self.perfusion_ir <= 0.0:
            raise DomainError("perfusion_ir must be positive")
        if self.dc_red <= 0.0 or self.dc_ir <= 0.0:
            raise DomainError("DC levels must be positive")
        if self.noise_sd < 0.0 or self.artifact_rate < 0.0:
            raise DomainError("noise_sd and artifact_rate must be >= 0")


@dataclass
class PpgRecord:
    """A raw three-wavelength sample stream plus epoch sync markers."""

    sample_rate: float
    red: np.ndarray
    ir: np.ndarray
    green: np.ndarray
    sync_markers: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    subject_id: str = ""
    nback_level: int | None = None

    def validate(self) -> None:
        if self.sample_rate <= 0:
            raise DomainError("sample_rate must be positive")
        n = self.red.size
        if self.ir.size != n or self.green.size != n:
            raise DomainError("channel arrays must have equal length")
        m = np.asarray(self.sync_markers)
        if m.size:
            if np.any(np.diff(m) <= 0):
                raise DomainError("sync markers must be strictly increasing")
            if m[0] < 0 or m[-1] >= n:
                raise DomainError("sync markers must lie within the record")

    @property
    def n_samples(self) -> int:
        return int(self.red.size)

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


# Carotid-like pulse: an inverted exponentiated raised cosine, giving the
# broad rounded peak seen from the ear canal and a sharp diastolic trough.
# Sharp troughs matter: pulse intervals are timed on them.
PULSE_SHARPNESS = 3.0

# Breathing wander amplitude as a fraction of DC per unit modulation depth
# (0.2 depth -> 0.8% of DC, ~8x the cardiac AC at default perfusion).
WANDER_DC_FRACTION = 0.04


def _pulse_shape(phase: np.ndarray, sharpness: float = PULSE_SHARPNESS) -> np.ndarray:
    """Zero-mean periodic pulse with peak-to-peak amplitude exactly 1."""
    dip = np.exp(sharpness * (np.cos(phase) - 1.0))
    mean = np.exp(-sharpness) * _bessel_i0(sharpness)
    span = 1.0 - np.exp(-2.0 * sharpness)
    return (mean - dip) / span


def _per_epoch(value, n_epochs: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(n_epochs, arr[0])
    if arr.size < n_epochs:
        raise DomainError(f"per-epoch array of {arr.size} values, need {n_epochs}")
    return arr[:n_epochs].copy()


def sync_marker_indices(duration: float, sample_rate: float) -> np.ndarray:
    """One marker at the start of each full 5-second epoch."""
    n_epochs = int(np.floor(duration / EPOCH_SECONDS))
    k = np.arange(n_epochs)
    return np.floor(k * EPOCH_SECONDS * sample_rate).astype(np.intp)


def synthesize(truth: GroundTruth, duration: float,
               sample_rate: float = DEFAULT_SAMPLE_RATE) -> PpgRecord:
    """Render a GroundTruth into a raw three-wavelength recording.

    Each wavelength is DC + AC * pulse(HR phase) * (1 + depth * sin(resp
    phase)) + baseline wander + white noise. Per-epoch AC amplitudes are
    chosen so the red/IR perfusion-ratio quotient equals r_from_spo2 of that
    epoch's SpO2. Deterministic for a fixed seed.
    """
    if duration <= 0:
        raise DomainError("duration must be positive")
    truth.validate()
    fs = float(sample_rate)
    n = int(round(duration * fs))
    n_epochs = max(1, int(np.floor(duration / EPOCH_SECONDS)))

    spo2 = _per_epoch(truth.spo2_trajectory, n_epochs)
    hr = _per_epoch(truth.heart_rate, n_epochs)
    rr = _per_epoch(truth.resp_rate, n_epochs)

    epoch_of = np.minimum(
        (np.arange(n) / (EPOCH_SECONDS * fs)).astype(np.intp), n_epochs - 1
    )

    # Cumulative phases keep the waveform continuous across epoch boundaries.
    pulse_phase = 2.0 * np.pi * np.cumsum(hr[epoch_of] / 60.0) / fs
    resp_phase = 2.0 * np.pi * np.cumsum(rr[epoch_of] / 60.0) / fs

    pulse = _pulse_shape(pulse_phase)
    resp_mod = 1.0 + truth.resp_mod_depth * np.sin(resp_phase)
    # In-ear baseline wander due to breathing dwarfs the cardiac AC; model it
    # as a fractional path-length modulation of each channel's DC level.
    wander = WANDER_DC_FRACTION * truth.resp_mod_depth * np.sin(resp_phase)

    amp_ir_epoch = np.full(n_epochs, truth.perfusion_ir * truth.dc_ir)
    amp_red_epoch = r_from_spo2(spo2) * truth.perfusion_ir * truth.dc_red
    amp_ir = amp_ir_epoch[epoch_of]
    amp_red = amp_red_epoch[epoch_of]
    dc_green = 0.8 * truth.dc_ir
    amp_green = truth.perfusion_ir * dc_green

    rng = np.random.default_rng(truth.seed)
    channels = {}
    for name, dc, amp in (
        ("red", truth.dc_red, amp_red),
        ("ir", truth.dc_ir, amp_ir),
        ("green", dc_green, amp_green),
    ):
        x = dc + amp * pulse * resp_mod + dc * wander
        if truth.noise_sd > 0.0:
            x = x + rng.normal(0.0, truth.noise_sd, n)
        channels[name] = x

    if truth.artifact_rate > 0.0:
        hits = rng.random(n) < truth.artifact_rate / fs
        spikes = rng.uniform(-5.0, 5.0, int(hits.sum()))
        for name, amp in (("red", amp_red), ("ir", amp_ir), ("green", amp_green)):
            scale = amp[hits] if np.ndim(amp) else amp
            channels[name][hits] += spikes * scale

    return PpgRecord(
        sample_rate=fs,
        red=channels["red"],
        ir=channels["ir"],
        green=channels["green"],
        sync_markers=sync_marker_indices(duration, fs),
        subject_id="synthetic",
    )


@dataclass(frozen=True)
class CohortTrial:
    """One planned trial: who, which N-back level, and the exact truth."""

    subject_id: str
    nback_level: int
    truth: GroundTruth


def plan_cohort(
    n_subjects: int,
    spo2_shift_per_level,
    seed: int,
    *,
    n_epochs: int = 68,
    calibration_epochs: int = 6,
    shift_mode: str = "post_calibration",
    subject_variability: float = 1.0,
    spo2_base: float = 97.4,
    noise_sd: float = 0.15,
    resp_mod_depth: float = 0.2,
) -> list[CohortTrial]:
    """Deterministic trial plan for `synthesize_cohort`.

    Subject baselines are drawn once per subject; within a subject only the
    SpO2 trajectory differs between levels. `shift_mode` controls where the
    level's SpO2 offset applies: "post_calibration" leaves the calibration
    epochs at baseline (a within-trial change, like a workload response
    developing during the task), "whole_trial" shifts every epoch.
    `subject_variability` scales the between-subject spread of all baselines;
    0 makes the subjects identical.
    """
    shifts = np.asarray(spo2_shift_per_level, dtype=float)
    if n_subjects < 1:
        raise DomainError("n_subjects must be >= 1")
    if shifts.size != 4:
        raise DomainError("spo2_shift_per_level must have 4 entries")
    if shift_mode not in ("post_calibration", "whole_trial"):
        raise DomainError(f"unknown shift_mode {shift_mode!r}")

    rng = np.random.default_rng(seed)
    v = float(subject_variability)
    trials = []
    for s in range(n_subjects):
        base_spo2 = np.clip(spo2_base + v * rng.normal(0.0, 0.6), 80.0, 99.5)
        base_hr = np.clip(84.3 + v * rng.normal(0.0, 6.0), 55.0, 110.0)
        base_rr = np.clip(12.8 + v * rng.normal(0.0, 1.5), 8.0, 20.0)
        dc_red = 52000.0 * (1.0 + v * rng.uniform(-0.15, 0.15))
        dc_ir = 50000.0 * (1.0 + v * rng.uniform(-0.15, 0.15))
        perfusion = 0.003 * (1.0 + v * rng.uniform(-0.25, 0.25))
        record_seeds = rng.integers(0, 2**63 - 1, size=4)
        for level in range(4):
            trajectory = np.full(n_epochs, base_spo2)
            start = calibration_epochs if shift_mode == "post_calibration" else 0
            trajectory[start:] += shifts[level]
            trials.append(CohortTrial(
                subject_id=f"S{s + 1:02d}",
                nback_level=level,
                truth=GroundTruth(
                    spo2_trajectory=trajectory,
                    heart_rate=base_hr,
                    resp_rate=base_rr,
                    resp_mod_depth=resp_mod_depth,
                    dc_red=dc_red,
                    dc_ir=dc_ir,
                    perfusion_ir=perfusion,
                    noise_sd=noise_sd,
                    seed=int(record_seeds[level]),
                ),
            ))
    return trials


def synthesize_cohort(
    n_subjects: int,
    spo2_shift_per_level,
    seed: int,
    *,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    **plan_kwargs,
) -> list[PpgRecord]:
    """Generate 4 N-back trials per subject, 68 five-second epochs each."""
    trials = plan_cohort(n_subjects, spo2_shift_per_level, seed, **plan_kwargs)
    n_epochs = plan_kwargs.get("n_epochs", 68)
    duration = n_epochs * EPOCH_SECONDS
    records = []
    for trial in trials:
        record = synthesize(trial.truth, duration, sample_rate)
        record.subject_id = trial.subject_id
        record.nback_level = trial.nback_level
        records.append(record)
    return records
