"""Per-epoch feature extraction: the 21 time-domain features, calibration
against a trial's leading epochs, and per-subject normalization.

No epoch is ever dropped: an epoch with no usable beats or breaths carries
its neighbour's value and a quality flag instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, NormalizationError
from .ingest import EpochSlice, SessionManifest
from .vitals import EventSeries, VitalsSeries

FEATURE_NAMES: tuple[str, ...] = (
    # SpO2-derived
    "spo2_mean",
    "calibrated_spo2_mean",
    "red_amplitude_mean",
    "ir_amplitude_mean",
    "calibrated_red_amplitude_mean",
    "calibrated_ir_amplitude_mean",
    "red_ac_dc_ratio_mean",
    "ir_ac_dc_ratio_mean",
    "red_peak_prominence_mean",
    "ir_peak_prominence_mean",
    "red_ir_ac_ratio_mean",
    "red_amplitude_variance",
    "ir_amplitude_variance",
    # pulse-derived
    "heart_rate_mean",
    "calibrated_heart_rate_mean",
    "pulse_fwhm_mean",
    "pulse_width_ratio_mean",
    "pulse_width_ratio_variance",
    # breathing-derived
    "breathing_rate_mean",
    "calibrated_breathing_rate_mean",
    "breathing_amplitude_mean",
)

FEATURE_CATEGORY = {name: "spo2" for name in FEATURE_NAMES[:13]}
FEATURE_CATEGORY.update({name: "pulse" for name in FEATURE_NAMES[13:18]})
FEATURE_CATEGORY.update({name: "breathing" for name in FEATURE_NAMES[18:]})

CALIBRATED_TO_RAW = {
    "calibrated_spo2_mean": "spo2_mean",
    "calibrated_red_amplitude_mean": "red_amplitude_mean",
    "calibrated_ir_amplitude_mean": "ir_amplitude_mean",
    "calibrated_heart_rate_mean": "heart_rate_mean",
    "calibrated_breathing_rate_mean": "breathing_rate_mean",
}

RAW_FEATURE_NAMES: tuple[str, ...] = tuple(
    name for name in FEATURE_NAMES if name not in CALIBRATED_TO_RAW
)


@dataclass
class RawEpoch:
    """Non-calibrated feature values for one epoch; NaN marks a feature whose
    events were absent (imputed later)."""

    epoch_index: int
    is_calibration: bool
    values: dict[str, float]
    flags: tuple[str, ...]


@dataclass
class CalibrationBaseline:
    """Per-feature mean over a trial's calibration epochs."""

    values: dict[str, float]


@dataclass
class EpochFeatures:
    """One analysis epoch's 21-element feature vector."""

    subject_id: str
    nback_level: int
    epoch_index: int
    values: np.ndarray
    quality_flags: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])


def _in_window(series: EventSeries, t0: float, t1: float) -> np.ndarray:
    lo = np.searchsorted(series.times, t0, side="left")
    hi = np.searchsorted(series.times, t1, side="left")
    return series.values[lo:hi]


def extract_epoch(vitals: VitalsSeries, epoch: EpochSlice) -> RawEpoch:
    """Raw (non-calibrated) features for one epoch slice.

    Continuous series are averaged over the epoch's samples; per-beat and
    per-breath values are assigned to the epoch containing their timestamp.
    """
    start, stop = epoch.start, epoch.stop
    if not 0 <= start < stop <= vitals.n_samples:
        raise ValueError(f"epoch [{start}, {stop}) outside record of {vitals.n_samples}")
    fs = vitals.sample_rate
    t0, t1 = start / fs, stop / fs
    sl = slice(start, stop)

    flags: set[str] = set()
    values: dict[str, float] = {
        "spo2_mean": float(vitals.spo2[sl].mean()),
        "red_amplitude_mean": float(vitals.ac_red[sl].mean()),
        "ir_amplitude_mean": float(vitals.ac_ir[sl].mean()),
        "red_ac_dc_ratio_mean": float((vitals.ac_red[sl] / vitals.dc_red[sl]).mean()),
        "ir_ac_dc_ratio_mean": float((vitals.ac_ir[sl] / vitals.dc_ir[sl]).mean()),
        "red_ir_ac_ratio_mean": float((vitals.ac_red[sl] / vitals.ac_ir[sl]).mean()),
        "red_amplitude_variance": float(vitals.ac_red[sl].var()),
        "ir_amplitude_variance": float(vitals.ac_ir[sl].var()),
    }

    def event_mean(series: EventSeries, transform=None):
        vals = _in_window(series, t0, t1)
        if vals.size == 0:
            return np.nan, None
        vals = transform(vals) if transform else vals
        return float(vals.mean()), vals

    values["red_peak_prominence_mean"], _ = event_mean(vitals.peak_prominences_red)
    values["ir_peak_prominence_mean"], _ = event_mean(vitals.peak_prominences_ir)
    values["heart_rate_mean"], _ = event_mean(vitals.pulse_intervals, lambda v: 60.0 / v)
    values["pulse_fwhm_mean"], _ = event_mean(vitals.pulse_fwhm)
    ratio_mean, ratio_vals = event_mean(vitals.pulse_width_ratio)
    values["pulse_width_ratio_mean"] = ratio_mean
    values["pulse_width_ratio_variance"] = (
        float(ratio_vals.var()) if ratio_vals is not None else np.nan
    )
    values["breathing_rate_mean"], _ = event_mean(vitals.breath_intervals, lambda v: 60.0 / v)
    values["breathing_amplitude_mean"], _ = event_mean(vitals.breath_amplitudes)

    pulse_features = ("heart_rate_mean", "pulse_fwhm_mean", "pulse_width_ratio_mean",
                      "red_peak_prominence_mean", "ir_peak_prominence_mean")
    if any(np.isnan(values[k]) for k in pulse_features):
        flags.add("no_beats")
    if np.isnan(values["breathing_rate_mean"]) or np.isnan(values["breathing_amplitude_mean"]):
        flags.add("no_breaths")
    return RawEpoch(epoch.index, epoch.is_calibration, values, tuple(sorted(flags)))


def compute_baseline(raw_epochs: list[RawEpoch]) -> CalibrationBaseline:
    """Per-feature mean over the trial's calibration epochs, skipping epochs
    whose value for that feature is missing."""
    calibration = [e for e in raw_epochs if e.is_calibration]
    if not calibration:
        raise CalibrationError("trial has no calibration epochs")
    baseline = {}
    for name in RAW_FEATURE_NAMES:
        vals = np.array([e.values[name] for e in calibration])
        good = vals[np.isfinite(vals)]
        if good.size == 0:
            raise CalibrationError(f"all calibration epochs unusable for {name}")
        baseline[name] = float(good.mean())
    return CalibrationBaseline(baseline)


def impute_missing(raw_epochs: list[RawEpoch]) -> list[RawEpoch]:
    """Carry the previous epoch's value into feature gaps (first epochs take
    the next valid value). A feature missing everywhere becomes 0.0; flags
    are preserved so imputed epochs stay identifiable."""
    out = [RawEpoch(e.epoch_index, e.is_calibration, dict(e.values), e.flags)
           for e in raw_epochs]
    for name in RAW_FEATURE_NAMES:
        col = np.array([e.values[name] for e in out])
        if np.all(np.isfinite(col)):
            continue
        good = np.flatnonzero(np.isfinite(col))
        if good.size == 0:
            col[:] = 0.0
        else:
            filled = np.full(col.size, np.nan)
            filled[good] = col[good]
            idx = np.clip(np.searchsorted(good, np.arange(col.size), side="right") - 1,
                          0, good.size - 1)
            col = filled[good[idx]]
        for e, v in zip(out, col):
            e.values[name] = float(v)
    return out


def apply_calibration(raw_epochs: list[RawEpoch], baseline: CalibrationBaseline,
                      subject_id: str, nback_level: int) -> list[EpochFeatures]:
    """Build full 21-feature vectors; calibrated features are the raw value
    minus the trial baseline. Calibration epochs are excluded from the
    output (they are the baseline, not analysis data)."""
    out = []
    for e in raw_epochs:
        if e.is_calibration:
            continue
        vec = np.empty(len(FEATURE_NAMES))
        for i, name in enumerate(FEATURE_NAMES):
            raw_name = CALIBRATED_TO_RAW.get(name)
            if raw_name is None:
                vec[i] = e.values[name]
            else:
                vec[i] = e.values[raw_name] - baseline.values[raw_name]
        out.append(EpochFeatures(subject_id, nback_level, e.epoch_index, vec, e.flags))
    return out


def extract_trial(vitals: VitalsSeries, slices: list[EpochSlice],
                  manifest: SessionManifest) -> list[EpochFeatures]:
    """Raw extraction, baseline, imputation and calibration for one trial."""
    raws = [extract_epoch(vitals, s) for s in slices]
    baseline = compute_baseline(raws)
    return apply_calibration(impute_missing(raws), baseline,
                             manifest.subject_id, manifest.nback_level)


def normalize_per_subject(dataset: list[EpochFeatures]) -> list[EpochFeatures]:
    """Z-score every feature within each subject (across all that subject's
    epochs and trials). Zero-variance features map to 0."""
    by_subject: dict[str, list[int]] = {}
    for i, e in enumerate(dataset):
        by_subject.setdefault(e.subject_id, []).append(i)
    out: list[EpochFeatures | None] = [None] * len(dataset)
    for subject, idx in by_subject.items():
        if len(idx) < 2:
            raise NormalizationError(f"subject {subject} has a single epoch")
        block = np.stack([dataset[i].values for i in idx])
        mean = block.mean(axis=0)
        sd = block.std(axis=0)
        z = np.where(sd > 0.0, (block - mean) / np.where(sd > 0.0, sd, 1.0), 0.0)
        for row, i in enumerate(idx):
            e = dataset[i]
            out[i] = EpochFeatures(e.subject_id, e.nback_level, e.epoch_index,
                                   z[row], e.quality_flags)
    return out  # type: ignore[return-value]


def to_matrix(dataset: list[EpochFeatures]):
    """(X, y, subjects) arrays for the learner."""
    X = np.stack([e.values for e in dataset])
    y = np.array([e.nback_level for e in dataset], dtype=int)
    subjects = np.array([e.subject_id for e in dataset])
    return X, y, subjects


def write_feature_table(dataset: list[EpochFeatures], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "nback_level", "epoch_index",
                         *FEATURE_NAMES, "quality_flags"])
        for e in dataset:
            writer.writerow([
                e.subject_id, e.nback_level, e.epoch_index,
                *[repr(float(v)) for v in e.values],
                ";".join(e.quality_flags),
            ])


def read_feature_table(path) -> list[EpochFeatures]:
    dataset = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["subject_id", "nback_level", "epoch_index",
                    *FEATURE_NAMES, "quality_flags"]
        if header != expected:
            raise ValueError("feature table header does not match canonical order")
        for row in reader:
            flags = tuple(row[-1].split(";")) if row[-1] else ()
            dataset.append(EpochFeatures(
                subject_id=row[0],
                nback_level=int(row[1]),
                epoch_index=int(row[2]),
                values=np.array([float(v) for v in row[3:3 + len(FEATURE_NAMES)]]),
                quality_flags=flags,
            ))
    return dataset
