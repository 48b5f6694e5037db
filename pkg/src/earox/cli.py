"""Command-line entry point: generate -> extract -> train -> evaluate ->
report, with explicit seeds and an INI config file. Flags override file
values; all randomness flows from the named seeds."""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import features, ingest, learner, stats, synth, vitals
from .errors import DomainError, PipelineError

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_IO = 2
EXIT_MISSING_INPUT = 3
EXIT_PROTOCOL = 4


@dataclass
class RunConfig:
    recordings_dir: str = "recordings"
    manifests_dir: str = "manifests"
    output_dir: str = "out"

    n_subjects: int = 8
    spo2_shift_per_level: tuple = (0.0, -0.1, -0.2, -0.4)
    noise_sd: float = 0.15
    resp_mod_depth: float = 0.2
    subject_variability: float = 1.0
    shift_mode: str = "post_calibration"
    sample_rate: float = 62.5
    n_epochs: int = 68
    calibration_epochs: int = 6

    n_trees: int = 100
    max_features_per_split: int = 5
    class_weight_mode: str = "balanced_subsample"
    boosting_max_estimators: int = 50

    generator_seed: int = 1234
    forest_seed: int = 5678
    shuffle_seed: int = 91011

    def forest_config(self) -> learner.ForestConfig:
        return learner.ForestConfig(
            n_trees=self.n_trees,
            max_features_per_split=self.max_features_per_split,
            class_weight_mode=self.class_weight_mode,
            boosting_max_estimators=self.boosting_max_estimators,
            rng_seed=self.forest_seed,
        )

    def canonical_text(self) -> str:
        pairs = sorted(asdict(self).items())
        return "\n".join(f"{k}={v!r}" for k, v in pairs)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


_SECTION_FIELDS = {
    "paths": ("recordings_dir", "manifests_dir", "output_dir"),
    "generator": ("n_subjects", "spo2_shift_per_level", "noise_sd",
                  "resp_mod_depth", "subject_variability", "shift_mode",
                  "sample_rate", "n_epochs", "calibration_epochs"),
    "forest": ("n_trees", "max_features_per_split", "class_weight_mode",
               "boosting_max_estimators"),
    "seeds": ("generator_seed", "forest_seed", "shuffle_seed"),
}


def load_config(path=None, seed: int | None = None) -> RunConfig:
    config = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(path)
        for section, names in _SECTION_FIELDS.items():
            if not parser.has_section(section):
                continue
            for name in names:
                if not parser.has_option(section, name):
                    continue
                raw = parser.get(section, name)
                default = getattr(config, name)
                if name == "spo2_shift_per_level":
                    value = tuple(float(v) for v in raw.split(","))
                elif isinstance(default, int):
                    value = int(raw)
                elif isinstance(default, float):
                    value = float(raw)
                else:
                    value = raw
                setattr(config, name, value)
    if seed is not None:
        config.generator_seed = seed
        config.forest_seed = seed + 1
        config.shuffle_seed = seed + 2
    return config


def _trial_stem(subject_id: str, level: int) -> str:
    return f"{subject_id}_n{level}"


def cmd_generate(config: RunConfig, out_dir: Path) -> int:
    recordings = out_dir / config.recordings_dir
    manifests = out_dir / config.manifests_dir
    recordings.mkdir(parents=True, exist_ok=True)
    manifests.mkdir(parents=True, exist_ok=True)

    trials = synth.plan_cohort(
        config.n_subjects, config.spo2_shift_per_level, config.generator_seed,
        n_epochs=config.n_epochs, calibration_epochs=config.calibration_epochs,
        shift_mode=config.shift_mode, subject_variability=config.subject_variability,
        noise_sd=config.noise_sd, resp_mod_depth=config.resp_mod_depth,
    )
    duration = config.n_epochs * synth.EPOCH_SECONDS
    written = []
    for trial in trials:
        record = synth.synthesize(trial.truth, duration, config.sample_rate)
        record.subject_id = trial.subject_id
        record.nback_level = trial.nback_level
        stem = _trial_stem(trial.subject_id, trial.nback_level)
        ingest.write_recording(record, recordings / f"{stem}.csv")
        ingest.write_manifest(
            ingest.SessionManifest(
                subject_id=trial.subject_id,
                nback_level=trial.nback_level,
                sample_rate=config.sample_rate,
                total_epochs=config.n_epochs,
                calibration_epochs=config.calibration_epochs,
            ),
            manifests / f"{stem}.json",
        )
        written.append(stem)
    print(f"wrote {len(written)} recordings to {recordings}")
    print(f"wrote {len(written)} manifests to {manifests}")
    for stem in written:
        print(f"  {stem}")
    return EXIT_OK


def cmd_extract(config: RunConfig, out_dir: Path, table_path: Path) -> int:
    recordings = out_dir / config.recordings_dir
    manifests = out_dir / config.manifests_dir
    if not recordings.is_dir():
        print(f"error: recordings directory {recordings} not found", file=sys.stderr)
        return EXIT_MISSING_INPUT
    paths = sorted(recordings.glob("*.csv"))
    if not paths:
        print(f"error: no recordings in {recordings}", file=sys.stderr)
        return EXIT_MISSING_INPUT

    dataset: list[features.EpochFeatures] = []
    failures = []
    for path in paths:
        manifest_path = manifests / (path.stem + ".json")
        try:
            record = ingest.parse_recording(path)
            manifest = ingest.parse_manifest(manifest_path)
            record.subject_id = manifest.subject_id
            record.nback_level = manifest.nback_level
            series = vitals.extract_vitals(record)
            slices = ingest.epoch_align(record, manifest)
            dataset.extend(features.extract_trial(series, slices, manifest))
        except (PipelineError, FileNotFoundError, OSError) as exc:
            failures.append((path.name, exc))
    if failures:
        for name, exc in failures:
            print(f"error: {name}: {exc}", file=sys.stderr)
        return EXIT_OTHER
    features.write_feature_table(dataset, table_path)
    print(f"wrote {len(dataset)} epochs to {table_path}")
    return EXIT_OK


def cmd_train(config: RunConfig, table_path: Path, model_path: Path) -> int:
    dataset = features.read_feature_table(table_path)
    X, y, _ = features.to_matrix(dataset)
    model = learner.fit_boosted(X, y, config.forest_config())
    learner.save_model(model, model_path)
    print(f"trained on {len(dataset)} epochs; model written to {model_path}")
    return EXIT_OK


def _report_payload(config: RunConfig, mode: str, report: learner.CvReport) -> dict:
    return {
        "mode": mode,
        "config_hash": config.digest(),
        "seeds": {
            "generator": config.generator_seed,
            "forest": config.forest_seed,
            "shuffle": config.shuffle_seed,
        },
        "feature_names": list(features.FEATURE_NAMES),
        **report.to_dict(),
    }


def cmd_evaluate(config: RunConfig, mode: str, table_path: Path,
                 report_path: Path) -> int:
    dataset = features.read_feature_table(table_path)
    X, y, subjects = features.to_matrix(dataset)
    if mode == "kfold10":
        report = learner.kfold_cv(X, y, config.forest_config(), k=10,
                                  shuffle_seed=config.shuffle_seed)
    elif mode == "loso":
        if np.unique(subjects).size < 2:
            print("error: leave-one-subject-out needs >= 2 subjects", file=sys.stderr)
            return EXIT_PROTOCOL
        report = learner.loso_cv(X, y, subjects, config.forest_config())
    else:
        raise DomainError(f"unknown evaluate mode {mode!r}")
    payload = _report_payload(config, mode, report)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"{mode}: overall accuracy {report.overall_accuracy:.4f} -> {report_path}")
    return EXIT_OK


def cmd_report(config: RunConfig, kind: str, table_path: Path,
               cv_report_path: Path | None, out_path: Path,
               feature_name: str) -> int:
    if kind in ("confusion", "importance"):
        if cv_report_path is None or not Path(cv_report_path).exists():
            print("error: report kind needs an evaluation report "
                  "(--cv-report)", file=sys.stderr)
            return EXIT_MISSING_INPUT
        with open(cv_report_path, "r", encoding="utf-8") as fh:
            cv = json.load(fh)
        if kind == "confusion":
            payload = {
                "classes": cv["classes"],
                "mean_confusion": cv["mean_confusion"],
                "per_class_accuracy": cv["per_class_accuracy"],
                "overall_accuracy": cv["overall_accuracy"],
            }
        else:
            order = np.argsort(cv["feature_importances"])[::-1]
            payload = {
                "ranking": [
                    {"feature": cv["feature_names"][i],
                     "category": features.FEATURE_CATEGORY[cv["feature_names"][i]],
                     "importance": cv["feature_importances"][i]}
                    for i in order
                ],
            }
    else:
        dataset = features.read_feature_table(table_path)
        normalized = features.normalize_per_subject(dataset)
        col = features.FEATURE_NAMES.index(feature_name)
        if kind == "anova":
            groups: dict[int, list[float]] = {}
            for e in normalized:
                groups.setdefault(e.nback_level, []).append(float(e.values[col]))
            result = stats.one_way_anova([groups[k] for k in sorted(groups)])
            payload = {
                "feature": feature_name,
                "f_statistic": result.f_statistic,
                "df": [result.df_between, result.df_within],
                "p_value": result.p_value,
            }
        elif kind == "summary":
            summaries = stats.summarize_by_level(normalized, feature_name)
            payload = {
                "feature": feature_name,
                "levels": {
                    str(lvl): {
                        "median": s.median, "q1": s.q1, "q3": s.q3,
                        "whisker_low": s.whisker_low, "whisker_high": s.whisker_high,
                        "outliers": s.outliers.tolist(),
                    }
                    for lvl, s in summaries.items()
                },
            }
        elif kind == "kde":
            cal_col = features.FEATURE_NAMES.index("calibrated_spo2_mean")
            payload = {"feature_x": feature_name,
                       "feature_y": "calibrated_spo2_mean", "categories": {}}
            for level in (0, 3):
                pts = np.array([
                    [e.values[col], dataset[i].values[cal_col]]
                    for i, e in enumerate(normalized) if e.nback_level == level
                ])
                grid = stats.kde_2d(pts)
                payload["categories"][str(level)] = {
                    "x_axis": grid.x_axis.tolist(),
                    "y_axis": grid.y_axis.tolist(),
                    "density": grid.density.tolist(),
                    "bandwidths": list(grid.bandwidths),
                }
        else:
            raise DomainError(f"unknown report kind {kind!r}")

    payload = {"kind": kind, "config_hash": config.digest(), **payload}
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"report {kind} -> {out_path}")
    return EXIT_OK


def cmd_score_session(manifest_path: Path) -> int:
    manifest = ingest.parse_manifest(manifest_path)
    pct = ingest.score_answers(manifest)
    print(f"{manifest.subject_id} {manifest.nback_level}-back: "
          f"{pct:.2f}% mistakes")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earox",
        description="In-ear pulse oximetry workload pipeline",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="INI config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed overriding all config seeds")
    parser.add_argument("--out", type=Path, default=None,
                        help="output file or directory (command-specific)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", help="write a synthetic cohort")
    p = sub.add_parser("extract", help="recordings -> feature table CSV")
    p.add_argument("--table", type=Path, default=None)
    p = sub.add_parser("train", help="feature table -> model JSON")
    p.add_argument("--table", type=Path, default=None)
    p = sub.add_parser("evaluate", help="cross-validated evaluation")
    p.add_argument("--mode", choices=["kfold10", "loso"], required=True)
    p.add_argument("--table", type=Path, default=None)
    p = sub.add_parser("report", help="emit JSON/CSV report artifacts")
    p.add_argument("--kind", required=True,
                   choices=["confusion", "importance", "kde", "anova", "summary"])
    p.add_argument("--table", type=Path, default=None)
    p.add_argument("--cv-report", type=Path, default=None)
    p.add_argument("--feature", default="spo2_mean")
    p = sub.add_parser("score-session", help="mistake percent of a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed)
        out_dir = Path(args.out) if args.out and args.command == "generate" \
            else Path(config.output_dir)
        if args.command == "generate":
            return cmd_generate(config, out_dir)

        base = Path(config.output_dir)
        table = getattr(args, "table", None) or base / "features.csv"
        if args.command == "extract":
            target = args.out or table
            return cmd_extract(config, base, Path(target))
        if args.command == "train":
            model_path = args.out or base / "model.json"
            return cmd_train(config, Path(table), Path(model_path))
        if args.command == "evaluate":
            report_path = args.out or base / f"cv_{args.mode}.json"
            return cmd_evaluate(config, args.mode, Path(table), Path(report_path))
        if args.command == "report":
            out_path = args.out or base / f"report_{args.kind}.json"
            return cmd_report(config, args.kind, Path(table), args.cv_report,
                              Path(out_path), args.feature)
        if args.command == "score-session":
            return cmd_score_session(args.manifest)
        raise DomainError(f"unknown command {args.command!r}")
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except PermissionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IsADirectoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OTHER


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
