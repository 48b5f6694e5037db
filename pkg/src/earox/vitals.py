"""Per-sample vital-sign series from a raw recording: SpO2 via the ratio of
ratios, pulse timing from infrared troughs, respiration from baseline
fluctuations of the raw signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .errors import DomainError, InsufficientPulsesError, LengthError, SignalQualityError
from .synth import CAL_INTERCEPT, CAL_SLOPE, PpgRecord

PULSE_BAND = (1.0, 30.0)             # Hz
DC_CUTOFF = 0.01                     # Hz
RESP_HIGH_PASS = 0.2                 # Hz
RESP_SMOOTH_SECONDS = 2.4            # 150 samples at 62.5 Hz
RESP_PROMINENCE = 10.0               # arbitrary units, fixed
PROMINENCE_RANGE = {"ir": (40.0, 150.0), "red": (10.0, 30.0)}
_PROMINENCE_GRID = 12
_SELECT_WINDOW_SECONDS = 30.0


def spo2_from_r(r):
    """Linear calibration SpO2 = 104 - 17 R, clamped to [0, 100] percent."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"R must be >= 0, got {r}")
    s = np.clip(CAL_INTERCEPT - CAL_SLOPE * arr, 0.0, 100.0)
    return float(s) if np.isscalar(r) else s


def compute_r(ac_red, dc_red, ac_ir, dc_ir):
    """Ratio of ratios: (AC_red/DC_red) / (AC_ir/DC_ir)."""
    parts = [np.asarray(p, dtype=float) for p in (ac_red, dc_red, ac_ir, dc_ir)]
    for name, p in zip(("ac_red", "dc_red", "ac_ir", "dc_ir"), parts):
        if np.any(p <= 0.0):
            raise SignalQualityError(f"{name} must be positive everywhere")
    r = (parts[0] / parts[1]) / (parts[2] / parts[3])
    return float(r) if all(np.isscalar(p) for p in (ac_red, dc_red, ac_ir, dc_ir)) else r


@dataclass(frozen=True)
class EventSeries:
    """Values attached to event timestamps (seconds from record start)."""

    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return int(self.times.size)

    @staticmethod
    def empty() -> "EventSeries":
        return EventSeries(np.empty(0), np.empty(0))


@dataclass
class VitalsSeries:
    """Derived series for one recording. Immutable by convention once built."""

    sample_rate: float
    n_samples: int
    spo2: np.ndarray
    ac_red: np.ndarray
    ac_ir: np.ndarray
    dc_red: np.ndarray
    dc_ir: np.ndarray
    pulse_intervals: EventSeries        # seconds, stamped at the ending trough
    pulse_fwhm: EventSeries             # seconds per beat, at peak times
    pulse_width_ratio: EventSeries      # peak FWHM / adjacent trough FWHM
    breath_intervals: EventSeries       # seconds, at the ending respiration peak
    breath_amplitudes: EventSeries
    peak_prominences_red: EventSeries
    peak_prominences_ir: EventSeries
    quality_flags: tuple[str, ...] = ()

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


def select_prominence(filtered, channel: str, sample_rate: float) -> float:
    """Pick a peak-prominence threshold from the per-channel working range.

    Scans a fixed grid across the range on a leading calibration window and
    returns the threshold whose trough intervals are most regular (lowest
    coefficient of variation); ties go to the lowest threshold. Thresholds
    whose mean interval falls outside a physiological pulse rate (30-220 bpm)
    are inadmissible: a handful of equally spaced strongest beats can
    otherwise masquerade as a perfectly regular (and absurdly slow) pulse.
    """
    if channel not in PROMINENCE_RANGE:
        raise DomainError(f"channel must be 'red' or 'ir', got {channel!r}")
    x = np.asarray(filtered, dtype=float)
    if x.size < _SELECT_WINDOW_SECONDS * sample_rate:
        raise LengthError("prominence selection needs >= 30 s of signal")
    lo, hi = PROMINENCE_RANGE[channel]
    window = x[: int(_SELECT_WINDOW_SECONDS * sample_rate)]
    troughs = dsp.find_troughs(window, lo)

    best_cv, best_threshold = np.inf, None
    for threshold in np.linspace(lo, hi, _PROMINENCE_GRID):
        idx = troughs.indices[troughs.prominences >= threshold]
        if idx.size < 3:
            continue
        intervals = np.diff(idx) / sample_rate
        rate = 60.0 / intervals.mean()
        if not 30.0 <= rate <= 220.0:
            continue
        cv = intervals.std() / intervals.mean()
        if cv < best_cv - 1e-9:
            best_cv, best_threshold = cv, threshold
    if best_threshold is None:
        raise SignalQualityError(
            f"no {channel} prominence in [{lo}, {hi}] finds a plausible pulse"
        )
    return float(best_threshold)


def beat_gate(events: dsp.PeakSet, boundaries: np.ndarray, keep: str) -> dsp.PeakSet:
    """Keep one event per beat window: the highest peak ("max") or deepest
    trough ("min") between consecutive beat boundaries.

    Near the 1 Hz filter edge a pulse can come out of the band-pass with a
    secondary hump whose prominence clears one channel's threshold but not
    the other's; gating to the beat grid keeps the anchor sets of the two
    wavelengths congruent.
    """
    if len(events) == 0 or boundaries.size == 0:
        return events
    bins = np.searchsorted(boundaries, events.indices)
    pick = np.argmax if keep == "max" else np.argmin
    chosen = []
    start = 0
    for end in range(1, len(events) + 1):
        if end == len(events) or bins[end] != bins[start]:
            chosen.append(start + pick(events.values[start:end]))
            start = end
    chosen = np.asarray(chosen, dtype=np.intp)
    return dsp.PeakSet(events.indices[chosen], events.values[chosen],
                       events.prominences[chosen])


def _half_height_width(x: np.ndarray, peak: int, prominence: float,
                       sample_rate: float) -> float:
    """FWHM at half the peak's prominence-referenced height, with linear
    interpolation of the crossings. NaN when a crossing is never reached."""
    level = x[peak] - 0.5 * prominence
    i = peak
    while i > 0 and x[i - 1] > level:
        i -= 1
    if i == 0:
        return np.nan          # ran off the left edge without crossing
    left = (i - 1) + (level - x[i - 1]) / (x[i] - x[i - 1])
    j = peak
    n = x.size
    while j < n - 1 and x[j + 1] > level:
        j += 1
    if j == n - 1:
        return np.nan
    right = j + (x[j] - level) / (x[j] - x[j + 1])
    return (right - left) / sample_rate


def pulse_metrics(ir_filtered, sample_rate: float, prominence: float):
    """Pulse intervals, per-beat FWHM, and peak/trough width ratios from the
    band-passed infrared signal.

    Intervals come from successive troughs (the ear-canal pulse peak is too
    broad for reliable peak timing); each interval is stamped at its ending
    trough. Width ratio pairs each peak with the nearest following trough.
    """
    x = np.asarray(ir_filtered, dtype=float)
    troughs = dsp.find_troughs(x, prominence)
    if len(troughs) < 2:
        raise InsufficientPulsesError(
            f"found {len(troughs)} troughs, need >= 2 for pulse intervals"
        )
    peaks = beat_gate(dsp.find_peaks(x, prominence), troughs.indices, "max")

    trough_times = dsp.refine_event_times(x, troughs.indices, sample_rate)
    intervals = EventSeries(trough_times[1:], np.diff(trough_times))

    peak_times = peaks.indices / sample_rate
    fwhm_vals = np.array([
        _half_height_width(x, p, prom, sample_rate)
        for p, prom in zip(peaks.indices, peaks.prominences)
    ])
    ok = np.isfinite(fwhm_vals)
    fwhm = EventSeries(peak_times[ok], fwhm_vals[ok])

    trough_fwhm = np.array([
        _half_height_width(-x, t, prom, sample_rate)
        for t, prom in zip(troughs.indices, troughs.prominences)
    ])
    ratio_times, ratio_vals = [], []
    for p_time, p_w in zip(fwhm.times, fwhm.values):
        nxt = np.searchsorted(trough_times, p_time)
        if nxt == trough_times.size:
            nxt -= 1
        t_w = trough_fwhm[nxt]
        if np.isfinite(t_w) and t_w > 0:
            ratio_times.append(p_time)
            ratio_vals.append(p_w / t_w)
    width_ratio = EventSeries(np.asarray(ratio_times), np.asarray(ratio_vals))
    return intervals, fwhm, width_ratio


def respiration_metrics(raw, sample_rate: float):
    """Breathing intervals and amplitudes from the raw signal's baseline
    fluctuations: band-pass, two passes of a 2.4 s moving average, then
    fixed-prominence peaks on the smoothed trace.

    A single 2.4 s boxcar leaks up to ~13% of the cardiac AC (its sinc
    sidelobes peak mid-band for pulse rates of 60-100 bpm), enough to cross
    the fixed respiration prominence; the second pass squares the
    attenuation and makes the breathing peaks unambiguous.

    Returns empty series when no respiration peaks exist (e.g. no modulation);
    downstream epochs are flagged rather than given a spurious rate.
    """
    x = np.asarray(raw, dtype=float)
    if x.size < 15.0 * sample_rate:
        raise LengthError("respiration extraction needs >= 15 s of signal")
    high_cut = min(30.0, 0.45 * sample_rate)
    banded = dsp.apply_filter(x, dsp.band_pass(RESP_HIGH_PASS, high_cut), sample_rate)
    window = dsp.moving_average(int(round(RESP_SMOOTH_SECONDS * sample_rate)))
    smoothed = dsp.apply_filter(
        dsp.apply_filter(banded, window, sample_rate), window, sample_rate,
    )
    peaks = dsp.find_peaks(smoothed, RESP_PROMINENCE)
    if len(peaks) < 2:
        return EventSeries.empty(), EventSeries.empty()
    times = dsp.refine_event_times(smoothed, peaks.indices, sample_rate)
    intervals = EventSeries(times[1:], np.diff(times))
    amplitudes = EventSeries(times, peaks.values)
    return intervals, amplitudes


def _dc_series(raw: np.ndarray, sample_rate: float) -> np.ndarray:
    return dsp.apply_filter(raw, dsp.low_pass(DC_CUTOFF), sample_rate)


def extract_vitals(record: PpgRecord, *, red_prominence: float | None = None,
                   ir_prominence: float | None = None) -> VitalsSeries:
    """Full per-record extraction: envelopes, DC levels, SpO2, pulse and
    respiration series. Prominence thresholds are auto-selected per channel
    unless given."""
    record.validate()
    fs = record.sample_rate
    flags: list[str] = []

    red_f = dsp.apply_filter(record.red, dsp.band_pass(*PULSE_BAND), fs)
    ir_f = dsp.apply_filter(record.ir, dsp.band_pass(*PULSE_BAND), fs)

    if red_prominence is None:
        red_prominence = select_prominence(red_f, "red", fs)
    if ir_prominence is None:
        ir_prominence = select_prominence(ir_f, "ir", fs)

    ir_troughs = dsp.find_troughs(ir_f, ir_prominence)
    beat_grid = ir_troughs.indices
    red_peaks = beat_gate(dsp.find_peaks(red_f, red_prominence), beat_grid, "max")
    red_troughs = beat_gate(dsp.find_troughs(red_f, red_prominence), beat_grid, "min")
    ir_peaks = beat_gate(dsp.find_peaks(ir_f, ir_prominence), beat_grid, "max")

    n = record.n_samples
    ac_red = dsp.envelope_from_events(n, red_peaks, red_troughs)
    ac_ir = dsp.envelope_from_events(n, ir_peaks, ir_troughs)
    dc_red = _dc_series(record.red, fs)
    dc_ir = _dc_series(record.ir, fs)

    floor = 1e-12
    if np.any(ac_red <= 0) or np.any(ac_ir <= 0):
        flags.append("nonpositive_envelope")
        ac_red = np.maximum(ac_red, floor)
        ac_ir = np.maximum(ac_ir, floor)
    if np.any(dc_red <= 0) or np.any(dc_ir <= 0):
        raise SignalQualityError("nonpositive DC level; not a plausible recording")

    r = compute_r(ac_red, dc_red, ac_ir, dc_ir)
    spo2 = np.clip(CAL_INTERCEPT - CAL_SLOPE * r, 0.0, 100.0)

    intervals, fwhm, width_ratio = pulse_metrics(ir_f, fs, ir_prominence)
    breath_intervals, breath_amplitudes = respiration_metrics(record.ir, fs)
    if len(breath_intervals) == 0:
        flags.append("no_respiration_peaks")

    return VitalsSeries(
        sample_rate=fs,
        n_samples=n,
        spo2=spo2,
        ac_red=ac_red,
        ac_ir=ac_ir,
        dc_red=dc_red,
        dc_ir=dc_ir,
        pulse_intervals=intervals,
        pulse_fwhm=fwhm,
        pulse_width_ratio=width_ratio,
        breath_intervals=breath_intervals,
        breath_amplitudes=breath_amplitudes,
        peak_prominences_red=EventSeries(red_peaks.indices / fs, red_peaks.prominences),
        peak_prominences_ir=EventSeries(ir_peaks.indices / fs, ir_peaks.prominences),
        quality_flags=tuple(flags),
    )
