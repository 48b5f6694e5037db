import json

import numpy as np
import pytest

from earox import cli, features, ingest

SMALL_CONFIG = """\
[paths]
output_dir = {out}

[generator]
n_subjects = 1
spo2_shift_per_level = 0,-0.3,-0.6,-1.2
noise_sd = 0.3
n_epochs = 12

[forest]
n_trees = 8
boosting_max_estimators = 3

[seeds]
generator_seed = 7
forest_seed = 8
shuffle_seed = 9
"""


@pytest.fixture()
def workspace(tmp_path):
    config_path = tmp_path / "run.ini"
    config_path.write_text(SMALL_CONFIG.format(out=tmp_path / "out"))
    return tmp_path, config_path


def run(config_path, *args):
    return cli.main(["--config", str(config_path), *args])


class TestGenerate:
    def test_writes_recordings_and_manifests(self, workspace, capsys):
        tmp, config = workspace
        assert run(config, "generate") == 0
        recordings = sorted((tmp / "out" / "recordings").glob("*.csv"))
        manifests = sorted((tmp / "out" / "manifests").glob("*.json"))
        assert len(recordings) == 4          # 1 subject x 4 levels
        assert len(manifests) == 4
        out = capsys.readouterr().out
        assert "4 recordings" in out

    def test_default_cohort_counts(self, tmp_path):
        # No config: defaults are the full 8-subject cohort; just check the plan.
        config = cli.load_config(None)
        assert config.n_subjects == 8
        from earox import synth
        trials = synth.plan_cohort(config.n_subjects, config.spo2_shift_per_level,
                                   config.generator_seed)
        assert len(trials) == 32

    def test_unwritable_output_dir(self, workspace, tmp_path):
        _, config = workspace
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        assert cli.main(["--config", str(config), "--out",
                         str(blocker / "sub"), "generate"]) == 2


class TestExtract:
    def test_missing_recordings_dir(self, workspace, tmp_path):
        _, config = workspace
        assert run(config, "extract") == 3
        assert not (tmp_path / "out" / "features.csv").exists()

    def test_empty_recordings_dir(self, workspace, tmp_path):
        tmp, config = workspace
        (tmp / "out" / "recordings").mkdir(parents=True)
        assert run(config, "extract") == 3

    def test_extracts_features(self, workspace):
        tmp, config = workspace
        assert run(config, "generate") == 0
        assert run(config, "extract") == 0
        table = tmp / "out" / "features.csv"
        dataset = features.read_feature_table(table)
        assert len(dataset) == 4 * (12 - 6)
        assert {e.nback_level for e in dataset} == {0, 1, 2, 3}

    def test_corrupt_recording_suppresses_output(self, workspace):
        tmp, config = workspace
        run(config, "generate")
        bad = tmp / "out" / "recordings" / "S01_n0.csv"
        bad.write_text("garbage\n")
        table = tmp / "out" / "features2.csv"
        assert cli.main(["--config", str(config), "--out", str(table),
                         "extract"]) == 1
        assert not table.exists()


class TestEvaluateAndReports:
    @pytest.fixture()
    def extracted(self, workspace):
        tmp, config = workspace
        run(config, "generate")
        run(config, "extract")
        return tmp, config

    def test_kfold_report(self, extracted):
        tmp, config = extracted
        assert run(config, "evaluate", "--mode", "kfold10") == 0
        report = json.loads((tmp / "out" / "cv_kfold10.json").read_text())
        assert report["mode"] == "kfold10"
        assert len(report["fold_confusions"]) == 10
        assert 0.0 <= report["overall_accuracy"] <= 1.0
        assert len(report["feature_importances"]) == 21
        assert report["seeds"] == {"generator": 7, "forest": 8, "shuffle": 9}

    def test_evaluate_rerun_is_byte_identical(self, extracted):
        tmp, config = extracted
        run(config, "evaluate", "--mode", "kfold10")
        first = (tmp / "out" / "cv_kfold10.json").read_bytes()
        run(config, "evaluate", "--mode", "kfold10")
        assert (tmp / "out" / "cv_kfold10.json").read_bytes() == first

    def test_loso_single_subject_is_protocol_error(self, extracted):
        _, config = extracted
        assert run(config, "evaluate", "--mode", "loso") == 4

    def test_loso_reports_one_entry_per_subject(self, workspace, tmp_path):
        tmp, _ = workspace
        config = tmp / "two.ini"
        config.write_text(SMALL_CONFIG.format(out=tmp / "out")
                          .replace("n_subjects = 1", "n_subjects = 2"))
        run(config, "generate")
        run(config, "extract")
        assert run(config, "evaluate", "--mode", "loso") == 0
        report = json.loads((tmp / "out" / "cv_loso.json").read_text())
        assert report["fold_labels"] == ["S01", "S02"]
        assert report["classes"] == [0, 3]

    def test_missing_table(self, workspace):
        _, config = workspace
        assert run(config, "evaluate", "--mode", "kfold10") == 3

    def test_reports(self, extracted, capsys):
        tmp, config = extracted
        run(config, "evaluate", "--mode", "kfold10")
        cv = tmp / "out" / "cv_kfold10.json"
        assert run(config, "report", "--kind", "confusion",
                   "--cv-report", str(cv)) == 0
        assert run(config, "report", "--kind", "importance",
                   "--cv-report", str(cv)) == 0
        assert run(config, "report", "--kind", "anova") == 0
        assert run(config, "report", "--kind", "summary") == 0
        assert run(config, "report", "--kind", "kde") == 0
        anova = json.loads((tmp / "out" / "report_anova.json").read_text())
        assert anova["df"] == [3, 20]        # 24 epochs, 4 groups
        importance = json.loads((tmp / "out" / "report_importance.json").read_text())
        assert len(importance["ranking"]) == 21
        kde = json.loads((tmp / "out" / "report_kde.json").read_text())
        assert set(kde["categories"]) == {"0", "3"}

    def test_report_without_cv_report(self, extracted):
        _, config = extracted
        assert run(config, "report", "--kind", "confusion") == 3


class TestScoreSession:
    def test_prints_mistake_percent(self, tmp_path, capsys):
        manifest = ingest.SessionManifest(
            subject_id="S09", nback_level=0, sample_rate=62.5, total_epochs=4,
            calibration_epochs=0,
            answers=[1, 2, 0, 0], truth_counts=[1, 2, 3, 0],
        )
        path = tmp_path / "m.json"
        ingest.write_manifest(manifest, path)
        assert cli.main(["score-session", "--manifest", str(path)]) == 0
        assert "25.00%" in capsys.readouterr().out

    def test_missing_manifest(self, tmp_path):
        assert cli.main(["score-session", "--manifest",
                         str(tmp_path / "nope.json")]) == 3


class TestConfig:
    def test_seed_flag_overrides(self, workspace):
        _, config_path = workspace
        config = cli.load_config(config_path, seed=100)
        assert config.generator_seed == 100
        assert config.forest_seed == 101
        assert config.shuffle_seed == 102

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["--config", str(tmp_path / "none.ini"),
                         "generate"]) == 3

    def test_config_hash_stable(self, workspace):
        _, config_path = workspace
        a = cli.load_config(config_path).digest()
        b = cli.load_config(config_path).digest()
        assert a == b and len(a) == 16
