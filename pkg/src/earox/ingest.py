"""Recording and session file formats, sync-marker epoch alignment, and
N-back answer scoring.

Recording CSV: a `# format_version: 1` line, a `t,red,ir,green,sync` header,
then one row per sample with `t` in seconds (6 decimals) and `sync` 1 on
epoch-boundary samples. Channel values round-trip exactly (shortest float
representation). Session manifests are JSON with the same field names used
throughout the pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import AlignmentError, FormatError, ParseError, ScoringError
from .synth import PpgRecord

FORMAT_VERSION = 1
RECORDING_HEADER = "t,red,ir,green,sync"


@dataclass
class SessionManifest:
    """Trial metadata: who did which N-back level, and the answer log."""

    subject_id: str
    nback_level: int
    sample_rate: float
    epoch_seconds: float = 5.0
    total_epochs: int = 68
    calibration_epochs: int = 6
    answers: list | None = None        # per-epoch 0-4 or None (unanswered)
    truth_counts: list | None = None   # per-epoch odd-digit counts

    def validate(self) -> None:
        if not 0 <= self.nback_level <= 3:
            raise FormatError(f"nback_level must be 0-3, got {self.nback_level}")
        if self.sample_rate <= 0 or self.epoch_seconds <= 0:
            raise FormatError("sample_rate and epoch_seconds must be positive")
        if self.total_epochs < self.calibration_epochs:
            raise FormatError("total_epochs must be >= calibration_epochs")
        for name, seq, lo, hi in (
            ("answers", self.answers, 0, 4),
            ("truth_counts", self.truth_counts, 0, 4),
        ):
            if seq is None:
                continue
            if len(seq) > self.total_epochs:
                raise FormatError(f"{name} longer than total_epochs")
            for v in seq:
                if v is not None and not (isinstance(v, int) and lo <= v <= hi):
                    raise FormatError(f"{name} entries must be ints {lo}-{hi} or null")


@dataclass(frozen=True)
class EpochSlice:
    """Half-open sample range of one 5-second epoch."""

    index: int
    start: int
    stop: int
    is_calibration: bool

    @property
    def sample_range(self) -> tuple[int, int]:
        return (self.start, self.stop)


def write_recording(record: PpgRecord, path) -> None:
    record.validate()
    sync = np.zeros(record.n_samples, dtype=int)
    sync[np.asarray(record.sync_markers, dtype=np.intp)] = 1
    fs = record.sample_rate
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(RECORDING_HEADER + "\n")
        for i in range(record.n_samples):
            fh.write(
                f"{i / fs:.6f},{float(record.red[i])!r},{float(record.ir[i])!r},"
                f"{float(record.green[i])!r},{sync[i]}\n"
            )


def _snap_rate(dt: float) -> float:
    """Recover the sample rate from a 6-decimal timestamp step."""
    fs = 1.0 / dt
    snapped = round(fs, 3)
    return snapped if abs(snapped - fs) < 1e-6 * fs else fs


def parse_recording(path) -> PpgRecord:
    """Parse a recording CSV; raises ParseError (with the offending line
    number) on malformed content and FormatError on non-monotonic time."""
    t_vals: list[float] = []
    columns: tuple[list[float], ...] = ([], [], [])
    sync_col: list[int] = []
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "format_version" in line:
                    declared = line.split(":", 1)[1].strip()
                    if declared != str(FORMAT_VERSION):
                        raise ParseError(
                            f"unsupported format_version {declared}", line=lineno
                        )
                continue
            if not header_seen:
                if line != RECORDING_HEADER:
                    raise ParseError(
                        f"expected header {RECORDING_HEADER!r}, got {line!r}",
                        line=lineno,
                    )
                header_seen = True
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise ParseError(f"expected 5 fields, got {len(fields)}", line=lineno)
            try:
                t_vals.append(float(fields[0]))
                for col, raw in zip(columns, fields[1:4]):
                    col.append(float(raw))
                sync_val = int(fields[4])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if sync_val not in (0, 1):
                raise ParseError(f"sync must be 0 or 1, got {sync_val}", line=lineno)
            sync_col.append(sync_val)
    if not header_seen:
        raise ParseError("missing header", line=1)
    if len(t_vals) < 2:
        raise ParseError("recording needs at least 2 samples")

    t = np.asarray(t_vals)
    if np.any(np.diff(t) <= 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0])
        raise FormatError(f"non-monotonic timestamps near sample {bad + 1}")
    sync = np.asarray(sync_col, dtype=int)
    edges = np.flatnonzero((sync == 1) & (np.r_[0, sync[:-1]] == 0))
    return PpgRecord(
        sample_rate=_snap_rate(float(t[1] - t[0])),
        red=np.asarray(columns[0]),
        ir=np.asarray(columns[1]),
        green=np.asarray(columns[2]),
        sync_markers=edges.astype(np.intp),
    )


def write_manifest(manifest: SessionManifest, path) -> None:
    manifest.validate()
    doc = {"format_version": FORMAT_VERSION, **asdict(manifest)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def parse_manifest(path) -> SessionManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {doc.get('format_version')!r}")
    required = ("subject_id", "nback_level", "sample_rate")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ParseError(f"missing manifest fields: {', '.join(missing)}")
    manifest = SessionManifest(
        subject_id=doc["subject_id"],
        nback_level=doc["nback_level"],
        sample_rate=doc["sample_rate"],
        epoch_seconds=doc.get("epoch_seconds", 5.0),
        total_epochs=doc.get("total_epochs", 68),
        calibration_epochs=doc.get("calibration_epochs", 6),
        answers=doc.get("answers"),
        truth_counts=doc.get("truth_counts"),
    )
    manifest.validate()
    return manifest


def epoch_align(record: PpgRecord, manifest: SessionManifest) -> list[EpochSlice]:
    """Slice a record into 5-second epochs.

    Epochs anchor at sync markers when present, else at fixed strides from
    the record start. A short trailing epoch is discarded, and at most
    `total_epochs` slices are emitted.
    """
    fs = record.sample_rate
    nominal = manifest.epoch_seconds * fs
    markers = np.asarray(record.sync_markers, dtype=np.intp)
    n = record.n_samples

    if markers.size >= 2:
        spacing = np.diff(markers)
        if np.any(np.abs(spacing - nominal) > 0.10 * nominal):
            worst = int(np.argmax(np.abs(spacing - nominal)))
            raise AlignmentError(
                f"marker spacing {spacing[worst]} samples deviates from nominal "
                f"{nominal:.1f} by more than 10%"
            )
        bounds = list(markers)
    elif markers.size == 1:
        bounds = [int(markers[0])]
    else:
        bounds = [0]
    # Continue past the last marker (or from the anchor) with ideal strides.
    anchor = bounds[-1]
    k = 1
    while anchor + math.floor(k * nominal) <= n:
        bounds.append(anchor + math.floor(k * nominal))
        k += 1
    if bounds[-1] < n:
        bounds.append(n)

    slices = []
    for idx in range(len(bounds) - 1):
        start, stop = int(bounds[idx]), int(bounds[idx + 1])
        if stop - start < math.floor(nominal):
            break
        stop = min(stop, start + math.ceil(nominal))
        slices.append(EpochSlice(
            index=idx, start=start, stop=stop,
            is_calibration=idx < manifest.calibration_epochs,
        ))
        if len(slices) == manifest.total_epochs:
            break
    return slices


def score_answers(manifest: SessionManifest) -> float:
    """Mistake percentage of an N-back answer log.

    An epoch at index i is scored when i >= n and an answer exists; it is a
    mistake when the answer differs from the odd-digit count n epochs back.
    """
    if manifest.answers is None or manifest.truth_counts is None:
        raise ScoringError("scoring needs both answers and truth_counts")
    n = manifest.nback_level
    truth = manifest.truth_counts
    scored = wrong = 0
    for i, answer in enumerate(manifest.answers):
        if i < n or answer is None:
            continue
        if i - n >= len(truth) or truth[i - n] is None:
            raise ScoringError(f"missing truth count for epoch {i - n}")
        scored += 1
        if answer != truth[i - n]:
            wrong += 1
    if scored == 0:
        raise ScoringError("no scored epochs")
    return 100.0 * wrong / scored
