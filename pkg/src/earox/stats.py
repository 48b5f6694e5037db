"""Statistical reporting: one-way ANOVA across N-back groups, 2-D kernel
density estimates, and box-plot style group summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import DomainError, UndefinedStatisticError


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    df_between: int
    df_within: int
    p_value: float


def one_way_anova(groups) -> AnovaResult:
    """Classical between/within mean-square ratio with the p-value taken
    from the F survival function via the regularized incomplete beta."""
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if len(arrays) < 2:
        raise DomainError("ANOVA needs at least 2 groups")
    if any(a.size < 2 for a in arrays):
        raise DomainError("every group needs at least 2 values")

    total = np.concatenate(arrays)
    grand = total.mean()
    n_groups = len(arrays)
    n_total = total.size
    ss_between = sum(a.size * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(((a - a.mean()) ** 2).sum() for a in arrays)
    df_between = n_groups - 1
    df_within = n_total - n_groups

    ms_within = ss_within / df_within
    if ms_within == 0.0:
        raise UndefinedStatisticError(
            "zero within-group variance; F statistic undefined"
        )
    f = (ss_between / df_between) / ms_within
    x = df_within / (df_within + df_between * f)
    p = float(betainc(df_within / 2.0, df_between / 2.0, x))
    return AnovaResult(float(f), df_between, df_within, p)


@dataclass
class KdeGrid:
    """Gaussian product-kernel density on a regular grid, max-normalized."""

    x_axis: np.ndarray
    y_axis: np.ndarray
    density: np.ndarray       # (ny, nx), max exactly 1
    bandwidths: tuple[float, float]
    density_scale: float      # multiply back to recover the raw density


def _scott_bandwidth(values: np.ndarray) -> float:
    # Scott's rule for d=2: sigma * n^(-1/6), floored for degenerate axes.
    sd = values.std()
    return max(sd * values.size ** (-1.0 / 6.0), 1e-6)


def kde_2d(points, grid: int = 100, bandwidth=None) -> KdeGrid:
    """2-D Gaussian KDE of (x, y) pairs on a grid padded by 3 bandwidths.

    `bandwidth` is a per-axis pair; None selects Scott's rule per axis.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DomainError("kde_2d needs >= 2 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if bandwidth is None:
        hx, hy = _scott_bandwidth(x), _scott_bandwidth(y)
    else:
        hx, hy = (max(float(b), 1e-6) for b in bandwidth)

    x_axis = np.linspace(x.min() - 3 * hx, x.max() + 3 * hx, grid)
    y_axis = np.linspace(y.min() - 3 * hy, y.max() + 3 * hy, grid)
    zx = (x_axis[None, :] - x[:, None]) / hx     # (n, grid)
    zy = (y_axis[None, :] - y[:, None]) / hy
    kx = np.exp(-0.5 * zx * zx)
    ky = np.exp(-0.5 * zy * zy)
    raw = (ky.T @ kx) / (2.0 * np.pi * hx * hy * pts.shape[0])
    peak = raw.max()
    return KdeGrid(x_axis, y_axis, raw / peak, (hx, hy), float(peak))


@dataclass(frozen=True)
class GroupSummary:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray


def group_summary(values) -> GroupSummary:
    """Box-plot five-number summary with 1.5 IQR whiskers."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("group_summary needs a non-empty group")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return GroupSummary(
        median=float(med), q1=float(q1), q3=float(q3),
        whisker_low=float(inside.min()), whisker_high=float(inside.max()),
        outliers=np.sort(v[(v < lo_fence) | (v > hi_fence)]),
    )


def summarize_by_level(dataset, feature_name: str) -> dict[int, GroupSummary]:
    """Per-N-back-level summary of one feature over a feature dataset."""
    from .features import FEATURE_NAMES

    col = FEATURE_NAMES.index(feature_name)
    levels: dict[int, list[float]] = {}
    for e in dataset:
        levels.setdefault(e.nback_level, []).append(float(e.values[col]))
    return {lvl: group_summary(vals) for lvl, vals in sorted(levels.items())}
