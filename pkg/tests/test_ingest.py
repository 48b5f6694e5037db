import numpy as np
import pytest

from earox import ingest, synth
from earox.errors import (AlignmentError, FormatError, ParseError, ScoringError)


@pytest.fixture()
def small_record():
    truth = synth.GroundTruth(noise_sd=1.5, seed=21)
    record = synth.synthesize(truth, 20.0)
    record.subject_id = "S01"
    record.nback_level = 2
    return record


class TestRecordingRoundTrip:
    def test_bit_identical_arrays(self, small_record, tmp_path):
        path = tmp_path / "rec.csv"
        ingest.write_recording(small_record, path)
        parsed = ingest.parse_recording(path)
        assert np.array_equal(parsed.red, small_record.red)
        assert np.array_equal(parsed.ir, small_record.ir)
        assert np.array_equal(parsed.green, small_record.green)
        assert np.array_equal(parsed.sync_markers, small_record.sync_markers)
        assert parsed.sample_rate == small_record.sample_rate

    def test_minimal_three_sample_file(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text(
            "# format_version: 1\n"
            "t,red,ir,green,sync\n"
            "0.000000,1.0,2.0,3.0,1\n"
            "0.016000,1.1,2.1,3.1,0\n"
            "0.032000,1.2,2.2,3.2,0\n"
        )
        record = ingest.parse_recording(path)
        assert record.n_samples == 3
        assert record.sample_rate == 62.5
        assert record.sync_markers.tolist() == [0]

    def test_wrong_field_count_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "# format_version: 1\n"
            "t,red,ir,green,sync\n"
            "0.000000,1.0,2.0,3.0,0\n"
            "0.016000,1.0,2.0,0\n"
        )
        with pytest.raises(ParseError, match="line 4"):
            ingest.parse_recording(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,red,ir,sync\n0.0,1,2,0\n")
        with pytest.raises(ParseError, match="header"):
            ingest.parse_recording(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# format_version: 9\nt,red,ir,green,sync\n")
        with pytest.raises(ParseError, match="format_version"):
            ingest.parse_recording(path)

    def test_non_monotonic_time(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "# format_version: 1\n"
            "t,red,ir,green,sync\n"
            "0.000000,1,2,3,0\n"
            "0.016000,1,2,3,0\n"
            "0.016000,1,2,3,0\n"
        )
        with pytest.raises(FormatError, match="monotonic"):
            ingest.parse_recording(path)

    def test_bad_sync_value(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "# format_version: 1\n"
            "t,red,ir,green,sync\n"
            "0.000000,1,2,3,2\n"
            "0.016000,1,2,3,0\n"
        )
        with pytest.raises(ParseError, match="sync"):
            ingest.parse_recording(path)


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = ingest.SessionManifest(
            subject_id="S03", nback_level=3, sample_rate=62.5,
            answers=[None, 2, 3] + [None] * 65,
            truth_counts=[1] * 68,
        )
        path = tmp_path / "m.json"
        ingest.write_manifest(manifest, path)
        parsed = ingest.parse_manifest(path)
        assert parsed == manifest

    def test_missing_field(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"format_version": 1, "subject_id": "x"}')
        with pytest.raises(ParseError, match="missing"):
            ingest.parse_manifest(path)

    def test_invalid_answers(self):
        manifest = ingest.SessionManifest("S", 1, 62.5, answers=[7])
        with pytest.raises(FormatError):
            manifest.validate()

    def test_bad_version(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"format_version": 2, "subject_id": "x", '
                        '"nback_level": 0, "sample_rate": 62.5}')
        with pytest.raises(ParseError, match="format_version"):
            ingest.parse_manifest(path)


class TestEpochAlign:
    def manifest(self, **kw):
        defaults = dict(subject_id="S", nback_level=0, sample_rate=62.5)
        defaults.update(kw)
        return ingest.SessionManifest(**defaults)

    def test_full_trial_with_markers(self):
        record = synth.synthesize(synth.GroundTruth(), 340.0)
        slices = ingest.epoch_align(record, self.manifest())
        assert len(slices) == 68
        assert sum(s.is_calibration for s in slices) == 6
        lengths = {s.stop - s.start for s in slices}
        assert lengths == {312, 313}

    def test_slices_partition_prefix(self):
        record = synth.synthesize(synth.GroundTruth(), 340.0)
        slices = ingest.epoch_align(record, self.manifest())
        assert slices[0].start == 0
        for a, b in zip(slices, slices[1:]):
            assert a.stop == b.start

    def test_stride_fallback_without_markers(self):
        record = synth.synthesize(synth.GroundTruth(), 60.0)
        record.sync_markers = np.empty(0, dtype=np.intp)
        slices = ingest.epoch_align(record, self.manifest(total_epochs=12))
        assert len(slices) == 12
        assert slices[0].start == 0
        assert slices[-1].stop <= record.n_samples

    def test_short_trailing_epoch_discarded(self):
        record = synth.synthesize(synth.GroundTruth(), 12.0)
        record.sync_markers = np.empty(0, dtype=np.intp)
        slices = ingest.epoch_align(record, self.manifest())
        assert len(slices) == 2
        assert slices[-1].stop <= int(10.0 * 62.5) + 1

    def test_misaligned_markers(self):
        record = synth.synthesize(synth.GroundTruth(), 30.0)
        record.sync_markers = np.array([0, 200, 625], dtype=np.intp)
        with pytest.raises(AlignmentError):
            ingest.epoch_align(record, self.manifest())

    def test_total_epochs_cap(self):
        record = synth.synthesize(synth.GroundTruth(), 60.0)
        slices = ingest.epoch_align(record, self.manifest(total_epochs=5))
        assert len(slices) == 5


class TestScoreAnswers:
    def build(self, level, answers, truth):
        return ingest.SessionManifest(
            subject_id="S", nback_level=level, sample_rate=62.5,
            total_epochs=len(truth), answers=answers, truth_counts=truth,
        )

    def test_all_correct_zero_percent(self):
        truth = [1, 2, 3, 4, 0, 1]
        answers = list(truth)
        assert ingest.score_answers(self.build(0, answers, truth)) == 0.0

    def test_one_back_shifted_stream(self):
        rng = np.random.default_rng(3)
        truth = [int(v) for v in rng.integers(0, 5, size=20)]
        answers = [None] + truth[:-1]
        assert ingest.score_answers(self.build(1, answers, truth)) == 0.0

    def test_three_back_scripted_29_7(self):
        rng = np.random.default_rng(8)
        truth = [int(v) for v in rng.integers(0, 5, size=68)]
        answers: list = [None, None, None] + [truth[i - 3] for i in range(3, 68)]
        answers[10] = None                     # one unanswered -> 64 scored
        wrong = [i for i in range(3, 68) if i != 10][:19]
        for i in wrong:
            answers[i] = (truth[i - 3] + 1) % 5
        pct = ingest.score_answers(self.build(3, answers, truth))
        assert pct == pytest.approx(100.0 * 19 / 64, abs=1e-12)
        assert pct == pytest.approx(29.7, abs=0.1)

    def test_unanswered_epochs_excluded_from_both_sides(self):
        truth = [0, 1, 2, 3, 4, 0, 1, 2]
        full = [truth[i - 1] for i in range(1, 8)]
        answers_all = [None] + full
        manifest_all = self.build(1, answers_all, truth)
        sparse = list(answers_all)
        sparse[2] = sparse[5] = None
        manifest_sparse = self.build(1, sparse, truth)
        assert ingest.score_answers(manifest_all) == \
            ingest.score_answers(manifest_sparse) == 0.0

    def test_missing_truth_counts(self):
        manifest = ingest.SessionManifest("S", 0, 62.5, answers=[1, 2])
        with pytest.raises(ScoringError):
            ingest.score_answers(manifest)

    def test_no_scored_epochs(self):
        manifest = self.build(3, [1, 1, 1], [0, 0, 0])
        with pytest.raises(ScoringError):
            ingest.score_answers(manifest)
