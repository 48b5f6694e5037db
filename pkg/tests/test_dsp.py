import numpy as np
import pytest
from scipy import signal as sps

from earox import dsp
from earox.errors import DomainError, InsufficientPulsesError, LengthError

from oracles import prominence_oracle

FS = 62.5


def sine(freq, duration, fs=FS, amp=1.0, phase=0.0):
    t = np.arange(int(duration * fs)) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


class TestApplyFilter:
    def test_lowpass_dc_gain_is_one(self):
        x = np.full(int(400 * FS), 500.0)
        out = dsp.apply_filter(x, dsp.low_pass(0.01), FS)
        interior = out[int(30 * FS):-int(30 * FS)]
        assert np.allclose(interior, 500.0, atol=1e-6)

    def test_lowpass_short_record_falls_back_to_mean(self):
        x = np.linspace(0.0, 10.0, int(100 * FS))
        out = dsp.apply_filter(x, dsp.low_pass(0.01), FS)
        assert np.allclose(out, x.mean())

    def test_bandpass_passband_amplitude_matches_response_oracle(self):
        x = sine(5.0, 120.0)
        out = dsp.apply_filter(x, dsp.band_pass(1.0, 30.0), FS)
        # Oracle: |H|^2 of the designed Butterworth at 5 Hz (forward-backward).
        sos = sps.butter(dsp.BUTTERWORTH_ORDER, [1.0, 30.0], btype="bandpass",
                         fs=FS, output="sos")
        _, h = sps.sosfreqz(sos, worN=[5.0], fs=FS)
        expected = np.abs(h[0]) ** 2
        mid = out[1000:6000]          # 8 periods = 100 samples; slice is integral
        measured = np.sqrt(2.0) * np.sqrt(np.mean(mid ** 2))
        assert measured == pytest.approx(expected, abs=0.02)
        assert measured == pytest.approx(1.0, abs=0.02)

    def test_bandpass_rejects_low_frequency(self):
        x = sine(0.05, 240.0)
        out = dsp.apply_filter(x, dsp.band_pass(1.0, 30.0), FS)
        sos = sps.butter(dsp.BUTTERWORTH_ORDER, [1.0, 30.0], btype="bandpass",
                         fs=FS, output="sos")
        _, h = sps.sosfreqz(sos, worN=[0.05], fs=FS)
        assert np.abs(h[0]) ** 2 < 0.05
        assert np.max(np.abs(out[2000:-2000])) < 0.05

    def test_bandpass_removes_dc(self):
        x = sine(5.0, 60.0) + 123.0
        out = dsp.apply_filter(x, dsp.band_pass(1.0, 30.0), FS)
        assert abs(out[500:-500].mean()) < 1e-3

    def test_linearity(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=2000), rng.normal(size=2000)
        spec = dsp.band_pass(1.0, 30.0)
        combined = dsp.apply_filter(3.0 * x - 0.5 * y, spec, FS)
        separate = 3.0 * dsp.apply_filter(x, spec, FS) - 0.5 * dsp.apply_filter(y, spec, FS)
        assert np.allclose(combined, separate, atol=1e-9)

    def test_zero_phase_keeps_peak_positions(self):
        x = sine(2.0, 60.0)
        out = dsp.apply_filter(x, dsp.band_pass(1.0, 30.0), FS)
        raw_peaks = dsp.find_peaks(x, 1.0).indices
        filt_peaks = dsp.find_peaks(out, 0.5 * np.ptp(out)).indices
        for p in raw_peaks[2:-2]:
            assert np.min(np.abs(filt_peaks - p)) <= 1

    def test_moving_average_dc_gain_one_everywhere(self):
        x = np.full(1000, 7.5)
        out = dsp.apply_filter(x, dsp.moving_average(150), FS)
        assert np.allclose(out, 7.5, atol=1e-12)

    def test_moving_average_window_longer_than_signal(self):
        with pytest.raises(LengthError):
            dsp.apply_filter(np.ones(100), dsp.moving_average(150), FS)

    def test_bandpass_too_short_signal(self):
        with pytest.raises(LengthError):
            dsp.apply_filter(np.ones(100), dsp.band_pass(1.0, 30.0), FS)

    @pytest.mark.parametrize("spec", [
        dsp.band_pass(30.0, 1.0),
        dsp.band_pass(1.0, 40.0),     # above Nyquist at 62.5 Hz
        dsp.band_pass(0.0, 30.0),
        dsp.low_pass(0.0),
        dsp.moving_average(0),
        dsp.FilterSpec("high-pass", low_cut=1.0),
    ])
    def test_invalid_specs(self, spec):
        with pytest.raises(DomainError):
            dsp.apply_filter(np.ones(10000), spec, FS)


class TestFindPeaks:
    def test_three_period_sine(self):
        x = sine(1.0, 3.0, fs=100.0)     # exactly 3 periods
        peaks = dsp.find_peaks(x, 1.5)
        assert len(peaks) == 3
        # quarter-period offsets: 25, 125, 225 at 100 Hz
        assert np.all(np.abs(peaks.indices - np.array([25, 125, 225])) <= 1)
        assert np.allclose(peaks.prominences, 2.0, atol=1e-3)

    def test_monotone_ramp_and_constant_are_empty(self):
        assert len(dsp.find_peaks(np.linspace(0, 1, 100), 0.0)) == 0
        assert len(dsp.find_peaks(np.ones(100), 0.0)) == 0
        assert len(dsp.find_peaks(np.empty(0), 0.0)) == 0

    def test_plateau_reports_leftmost_sample(self):
        x = np.array([0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0])
        peaks = dsp.find_peaks(x, 0.5)
        assert peaks.indices.tolist() == [2]

    def test_troughs_mirror_peaks(self):
        x = sine(1.0, 3.0, fs=100.0)
        troughs = dsp.find_troughs(x, 1.5)
        peaks_of_negated = dsp.find_peaks(-x, 1.5)
        assert np.array_equal(troughs.indices, peaks_of_negated.indices)
        assert np.allclose(troughs.values, x[troughs.indices])
        assert len(troughs) == 3

    def test_non_finite_raises(self):
        with pytest.raises(DomainError):
            dsp.find_peaks(np.array([0.0, np.nan, 0.0]), 0.0)

    @pytest.mark.parametrize("kind,seed", [
        ("noise", 1), ("noise", 2), ("walk", 3), ("walk", 4),
        ("quantized", 5), ("quantized", 6), ("short", 7), ("spiky", 8),
    ])
    def test_matches_bruteforce_oracle_exactly(self, kind, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(32, 1500))
        if kind == "noise":
            x = rng.normal(size=n)
        elif kind == "walk":
            x = np.cumsum(rng.normal(size=n))
        elif kind == "quantized":
            x = np.round(rng.normal(size=n) * 2.0) / 2.0   # plateaus and ties
        elif kind == "short":
            x = rng.normal(size=int(rng.integers(1, 8)))
        else:
            x = rng.normal(size=n)
            x[rng.integers(0, n, size=n // 10)] += 10.0
        expected_idx, expected_prom = prominence_oracle(x)
        got = dsp.find_peaks(x, 0.0)
        assert np.array_equal(got.indices, expected_idx)
        assert np.array_equal(got.prominences, expected_prom)

    def test_threshold_filters_against_oracle(self):
        rng = np.random.default_rng(99)
        x = np.cumsum(rng.normal(size=800))
        expected_idx, expected_prom = prominence_oracle(x)
        keep = expected_prom >= 1.0
        got = dsp.find_peaks(x, 1.0)
        assert np.array_equal(got.indices, expected_idx[keep])
        assert np.array_equal(got.prominences, expected_prom[keep])


class TestAcEnvelope:
    def test_zero_mean_sine_gives_twice_amplitude(self):
        x = sine(1.25, 40.0, amp=3.0)
        env = dsp.ac_envelope(x, 1.0, 1.0)
        interior = env[int(2 * FS):-int(2 * FS)]
        assert np.allclose(interior, 6.0, rtol=0.02)

    def test_growing_amplitude_is_tracked(self):
        t = np.arange(int(40 * FS)) / FS
        amp = 1.0 + 0.05 * t
        x = amp * np.sin(2 * np.pi * 1.25 * t)
        env = dsp.ac_envelope(x, 0.5, 0.5)
        interior = slice(int(3 * FS), -int(3 * FS))
        assert np.allclose(env[interior], 2.0 * amp[interior], rtol=0.05)

    def test_dc_offset_removed_by_bandpass_leaves_envelope(self):
        x = sine(1.25, 40.0)
        with_dc = dsp.apply_filter(x + 10.0, dsp.band_pass(1.0, 30.0), FS)
        without_dc = dsp.apply_filter(x, dsp.band_pass(1.0, 30.0), FS)
        env_dc = dsp.ac_envelope(with_dc, 0.5, 0.5)
        env = dsp.ac_envelope(without_dc, 0.5, 0.5)
        assert np.allclose(env_dc, env, atol=1e-6)

    def test_negation_invariance(self):
        x = sine(1.25, 40.0, amp=2.0)
        assert np.allclose(dsp.ac_envelope(x, 0.5, 0.5),
                           dsp.ac_envelope(-x, 0.5, 0.5), atol=1e-6)

    def test_insufficient_pulses(self):
        with pytest.raises(InsufficientPulsesError):
            dsp.ac_envelope(sine(1.25, 1.0), 0.5, 0.5)
