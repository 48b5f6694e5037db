"""From-scratch CART trees, a balanced-subsample random forest, discrete
multi-class AdaBoost (SAMME) over forest bases, and the two cross-validation
protocols used for workload classification.

Everything is deterministic for a fixed config seed: feature subsets,
bootstraps and fold shuffles all derive from it.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features_per_split: int = 5
    class_weight_mode: str = "balanced_subsample"   # or "none"
    boosting_max_estimators: int = 50
    rng_seed: int = 0
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def validate(self) -> None:
        if self.n_trees < 1:
            raise DomainError("n_trees must be >= 1")
        if not 1 <= self.max_features_per_split <= 21:
            raise DomainError("max_features_per_split must lie in [1, 21]")
        if self.class_weight_mode not in ("balanced_subsample", "none"):
            raise DomainError(f"unknown class_weight_mode {self.class_weight_mode!r}")
        if self.boosting_max_estimators < 1:
            raise DomainError("boosting_max_estimators must be >= 1")
        if self.min_samples_leaf < 1:
            raise DomainError("min_samples_leaf must be >= 1")


@dataclass
class Tree:
    """Array-encoded binary tree. feature[i] == -1 marks a leaf; dist holds
    each node's class-weight histogram."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dist: np.ndarray            # (n_nodes, n_classes)
    importances: np.ndarray     # per-feature weighted impurity decrease

    def leaf_distributions(self, X: np.ndarray) -> np.ndarray:
        """Normalized class distribution of the leaf each row lands in."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.intp)
        active = np.arange(n)
        while active.size:
            nd = node[active]
            internal = self.feature[nd] >= 0
            active = active[internal]
            if not active.size:
                break
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
        dist = self.dist[node]
        totals = dist.sum(axis=1, keepdims=True)
        return dist / np.maximum(totals, 1e-300)


def _gini_from_counts(counts: np.ndarray, total: float) -> float:
    """Gini impurity 1 - sum((w_k / W)^2), written as 1 - S / W^2."""
    return 1.0 - float(np.sum(counts * counts)) / (total * total)


def _best_split_on_feature(x: np.ndarray, class_w: np.ndarray, total_w: float,
                           total_counts: np.ndarray):
    """Best (score, threshold) for one feature, scanning midpoints between
    consecutive distinct sorted values. Ties keep the lowest threshold."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cw = np.cumsum(class_w[order], axis=0)
    n = xs.size
    if n < 2:
        return None

    left_counts = cw[:-1]
    w_left = left_counts.sum(axis=1)
    w_right = total_w - w_left
    s_left = np.sum(left_counts * left_counts, axis=1)
    right_counts = total_counts - left_counts
    s_right = np.sum(right_counts * right_counts, axis=1)
    gini_left = 1.0 - s_left / (w_left * w_left)
    gini_right = 1.0 - s_right / (w_right * w_right)
    score = (w_left * gini_left + w_right * gini_right) / total_w

    thresholds = (xs[:-1] + xs[1:]) / 2.0
    valid = (xs[:-1] != xs[1:]) & (thresholds > xs[:-1]) & (thresholds < xs[1:])
    if not np.any(valid):
        return None
    score = np.where(valid, score, np.inf)
    best = int(np.argmin(score))
    return float(score[best]), float(thresholds[best])


def fit_tree(X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray,
             config: ForestConfig, rng: np.random.Generator,
             n_classes: int) -> Tree:
    """Greedy CART on weighted Gini impurity.

    At each node a uniform subset of max_features_per_split features is
    considered first; if none of them admits a valid split, the remaining
    features are tried before declaring a leaf. Growth stops at purity,
    min_samples_leaf, or max_depth.
    """
    n_samples, n_features = X.shape
    if n_samples < 1:
        raise DomainError("fit_tree needs at least one sample")
    if np.any(sample_weight <= 0.0):
        raise DomainError("sample weights must be positive")
    max_features = min(config.max_features_per_split, n_features)

    feature, threshold = [], []
    left, right = [], []
    dist, importances = [], np.zeros(n_features)

    root_weight = float(sample_weight.sum())
    stack = [(np.arange(n_samples), 0, -1, False)]   # indices, depth, parent, is_right
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node_id

        w = sample_weight[idx]
        counts = np.zeros(n_classes)
        np.add.at(counts, y[idx], w)
        total_w = float(w.sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        dist.append(counts)

        pure = np.count_nonzero(counts) <= 1
        depth_capped = config.max_depth is not None and depth >= config.max_depth
        if pure or depth_capped or idx.size <= config.min_samples_leaf:
            continue

        sampled = np.sort(rng.choice(n_features, size=max_features, replace=False))
        rest = np.setdiff1d(np.arange(n_features), sampled)
        class_w = np.zeros((idx.size, n_classes))
        class_w[np.arange(idx.size), y[idx]] = w

        best = None
        for pool in (sampled, rest):
            for f in pool:
                found = _best_split_on_feature(X[idx, f], class_w, total_w, counts)
                if found is None:
                    continue
                score, thr = found
                if best is None or score < best[0]:
                    best = (score, int(f), thr)
            if best is not None:
                break
        if best is None:
            continue

        score, f, thr = best
        node_gini = _gini_from_counts(counts, total_w)
        importances[f] += total_w * node_gini - score * total_w
        feature[node_id] = f
        threshold[node_id] = thr
        go_left = X[idx, f] <= thr
        # Right pushed first so the left child is materialized next (stable ids).
        stack.append((idx[~go_left], depth + 1, node_id, True))
        stack.append((idx[go_left], depth + 1, node_id, False))

    return Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        dist=np.stack(dist),
        importances=importances / root_weight,
    )


@dataclass
class ForestModel:
    """Boosted ensemble of forests. A plain forest is one stage of weight 1."""

    classes: np.ndarray
    n_features: int
    stages: list[list[Tree]]
    stage_weights: np.ndarray
    importances: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.importances is None:
            self.importances = feature_importance(self)


def _forest_distribution(trees: list[Tree], X: np.ndarray) -> np.ndarray:
    acc = np.zeros((X.shape[0], trees[0].dist.shape[1]))
    for tree in trees:
        acc += tree.leaf_distributions(X)
    return acc / len(trees)


def _stage_predict_codes(trees: list[Tree], X: np.ndarray) -> np.ndarray:
    return np.argmax(_forest_distribution(trees, X), axis=1)


def predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Weighted vote across boosting stages; ties break to the lowest class."""
    X = np.asarray(X, dtype=float)
    k = model.classes.size
    votes = np.zeros((X.shape[0], k))
    for trees, alpha in zip(model.stages, model.stage_weights):
        codes = _stage_predict_codes(trees, X)
        votes[np.arange(X.shape[0]), codes] += alpha
    return model.classes[np.argmax(votes, axis=1)]


def _encode_labels(y: np.ndarray):
    classes = np.unique(y)
    codes = np.searchsorted(classes, y)
    return classes, codes


def _tree_seeds(seed: int, n: int, salt: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence((seed, salt))
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def _fit_stage(X, codes, n_classes, config: ForestConfig, sample_weight,
               salt: int) -> list[Tree]:
    """One forest: bootstrap per tree, balanced-subsample class weights
    multiplied into any externally supplied (boosting) weights."""
    n = X.shape[0]
    rngs = _tree_seeds(config.rng_seed, config.n_trees, salt)
    trees = []
    for rng in rngs:
        boot = rng.integers(0, n, size=n)
        w = sample_weight[boot].copy()
        if config.class_weight_mode == "balanced_subsample":
            counts = np.bincount(codes[boot], minlength=n_classes)
            present = counts > 0
            cw = np.ones(n_classes)
            cw[present] = n / (n_classes * counts[present])
            w *= cw[codes[boot]]
        trees.append(fit_tree(X[boot], codes[boot], w, config, rng, n_classes))
    return trees


def fit_forest(X, y, config: ForestConfig, sample_weight=None) -> ForestModel:
    """Plain random forest (a single boosting stage of weight 1)."""
    config.validate()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, codes = _encode_labels(y)
    if classes.size < 2:
        warnings.warn("single-class dataset: degenerate model predicts that class")
    if sample_weight is None:
        sample_weight = np.full(X.shape[0], 1.0 / X.shape[0])
    trees = _fit_stage(X, codes, max(classes.size, 1), config, sample_weight, salt=0)
    return ForestModel(classes=classes, n_features=X.shape[1],
                       stages=[trees], stage_weights=np.array([1.0]))


def fit_boosted(X, y, config: ForestConfig) -> ForestModel:
    """Discrete multi-class AdaBoost (SAMME) with forest bases.

    Stage weight is log((1-err)/err) + log(K-1); boosting stops early at
    zero stage error, and halts before adding a stage whose error reaches
    the worse-than-random bound (K-1)/K.
    """
    config.validate()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, codes = _encode_labels(y)
    if classes.size < 2:
        warnings.warn("single-class dataset: degenerate model predicts that class")
        trees = _fit_stage(X, codes, 1, config, np.full(X.shape[0], 1.0 / X.shape[0]), 0)
        return ForestModel(classes=classes, n_features=X.shape[1],
                           stages=[trees], stage_weights=np.array([1.0]))

    k = classes.size
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    stages: list[list[Tree]] = []
    alphas: list[float] = []
    for m in range(config.boosting_max_estimators):
        trees = _fit_stage(X, codes, k, config, w, salt=m)
        pred = _stage_predict_codes(trees, X)
        miss = pred != codes
        err = float(w[miss].sum() / w.sum())
        if err >= (k - 1.0) / k:
            if not stages:
                warnings.warn("first boosting stage no better than random; "
                              "keeping it as a plain forest")
                stages.append(trees)
                alphas.append(1.0)
            break
        if err == 0.0:
            stages.append(trees)
            alphas.append(1.0)
            break
        alpha = float(np.log((1.0 - err) / err) + np.log(k - 1.0))
        stages.append(trees)
        alphas.append(alpha)
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    return ForestModel(classes=classes, n_features=X.shape[1],
                       stages=stages, stage_weights=np.asarray(alphas))


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean impurity-decrease importance across trees, stage-weighted,
    normalized to sum to 1."""
    total = np.zeros(model.n_features)
    weight_sum = 0.0
    for trees, alpha in zip(model.stages, model.stage_weights):
        stage = np.zeros(model.n_features)
        for tree in trees:
            imp = tree.importances
            s = imp.sum()
            stage += imp / s if s > 0 else imp
        total += alpha * stage / len(trees)
        weight_sum += alpha
    s = total.sum()
    return total / s if s > 0 else np.full(model.n_features, 1.0 / model.n_features)


@dataclass
class CvReport:
    """Cross-validation outcome: per-fold confusions plus aggregates."""

    classes: np.ndarray
    fold_confusions: list[np.ndarray]
    fold_labels: list[str]
    importances: np.ndarray

    @property
    def total_confusion(self) -> np.ndarray:
        return np.sum(self.fold_confusions, axis=0)

    @property
    def mean_confusion(self) -> np.ndarray:
        return np.mean(self.fold_confusions, axis=0)

    @property
    def overall_accuracy(self) -> float:
        total = self.total_confusion
        return float(np.trace(total) / total.sum())

    @property
    def per_class_accuracy(self) -> np.ndarray:
        total = self.total_confusion
        rows = total.sum(axis=1)
        return np.where(rows > 0, np.diag(total) / np.maximum(rows, 1), np.nan)

    @property
    def fold_accuracies(self) -> np.ndarray:
        return np.array([np.trace(c) / c.sum() for c in self.fold_confusions])

    def to_dict(self) -> dict:
        return {
            "classes": [int(c) for c in self.classes],
            "fold_labels": list(self.fold_labels),
            "fold_confusions": [c.astype(int).tolist() for c in self.fold_confusions],
            "mean_confusion": self.mean_confusion.tolist(),
            "per_class_accuracy": self.per_class_accuracy.tolist(),
            "fold_accuracies": self.fold_accuracies.tolist(),
            "overall_accuracy": self.overall_accuracy,
            "feature_importances": self.importances.tolist(),
        }


def _confusion(classes: np.ndarray, y_true, y_pred) -> np.ndarray:
    k = classes.size
    matrix = np.zeros((k, k))
    ti = np.searchsorted(classes, y_true)
    pi = np.searchsorted(classes, y_pred)
    np.add.at(matrix, (ti, pi), 1.0)
    return matrix


def _fit_eval(X_train, y_train, X_test, config: ForestConfig, boosted: bool):
    fit = fit_boosted if boosted else fit_forest
    model = fit(X_train, y_train, config)
    return model, predict(model, X_test)


def _fold_config(config: ForestConfig, fold: int) -> ForestConfig:
    seed = int(np.random.SeedSequence((config.rng_seed, 104729, fold)).generate_state(1)[0])
    return ForestConfig(
        n_trees=config.n_trees,
        max_features_per_split=config.max_features_per_split,
        class_weight_mode=config.class_weight_mode,
        boosting_max_estimators=config.boosting_max_estimators,
        rng_seed=seed,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
    )


def kfold_cv(X, y, config: ForestConfig, k: int = 10, shuffle_seed: int = 0,
             boosted: bool = True) -> CvReport:
    """Shuffled k-fold cross-validation over all epochs, subjects mixed."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    if n < k:
        raise DomainError(f"dataset of {n} rows cannot make {k} folds")
    classes = np.unique(y)
    order = np.random.default_rng(shuffle_seed).permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    folds = np.split(order, np.cumsum(sizes)[:-1])

    confusions, labels = [], []
    importances = np.zeros(X.shape[1])
    for i, test_idx in enumerate(folds):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        y_train = y[train_mask]
        if np.unique(y_train).size < classes.size:
            warnings.warn(f"fold {i}: a class is absent from the training split")
        model, pred = _fit_eval(X[train_mask], y_train, X[test_idx],
                                _fold_config(config, i), boosted)
        confusions.append(_confusion(classes, y[test_idx], pred))
        labels.append(f"fold{i}")
        importances += model.importances
    return CvReport(classes, confusions, labels, importances / k)


def loso_cv(X, y, subjects, config: ForestConfig, levels=(0, 3)) -> CvReport:
    """Leave-one-subject-out on the two-category task (0-back vs 3-back by
    default): train on all other subjects, test on the held-out one."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    subjects = np.asarray(subjects)
    keep = np.isin(y, levels)
    X, y, subjects = X[keep], y[keep], subjects[keep]
    unique_subjects = np.unique(subjects)
    if unique_subjects.size < 2:
        raise DomainError("leave-one-subject-out needs >= 2 subjects")
    classes = np.unique(y)

    confusions, labels = [], []
    importances = np.zeros(X.shape[1])
    used = 0
    for i, subject in enumerate(unique_subjects):
        test_mask = subjects == subject
        if np.unique(y[test_mask]).size < 2:
            warnings.warn(f"subject {subject} has a single class; skipped")
            continue
        model, pred = _fit_eval(X[~test_mask], y[~test_mask], X[test_mask],
                                _fold_config(config, i), boosted=True)
        confusions.append(_confusion(classes, y[test_mask], pred))
        labels.append(str(subject))
        importances += model.importances
        used += 1
    return CvReport(classes, confusions, labels,
                    importances / max(used, 1))


def save_model(model: ForestModel, path) -> None:
    doc = {
        "model_version": MODEL_VERSION,
        "classes": [int(c) for c in model.classes],
        "n_features": model.n_features,
        "stage_weights": model.stage_weights.tolist(),
        "importances": model.importances.tolist(),
        "stages": [
            [
                {
                    "feature": tree.feature.tolist(),
                    "threshold": tree.threshold.tolist(),
                    "left": tree.left.tolist(),
                    "right": tree.right.tolist(),
                    "dist": tree.dist.tolist(),
                    "importances": tree.importances.tolist(),
                }
                for tree in trees
            ]
            for trees in model.stages
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> ForestModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("model_version") != MODEL_VERSION:
        raise DomainError(f"unsupported model_version {doc.get('model_version')!r}")
    stages = [
        [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.intp),
                threshold=np.asarray(t["threshold"]),
                left=np.asarray(t["left"], dtype=np.intp),
                right=np.asarray(t["right"], dtype=np.intp),
                dist=np.asarray(t["dist"]),
                importances=np.asarray(t["importances"]),
            )
            for t in trees
        ]
        for trees in doc["stages"]
    ]
    return ForestModel(
        classes=np.asarray(doc["classes"]),
        n_features=doc["n_features"],
        stages=stages,
        stage_weights=np.asarray(doc["stage_weights"]),
        importances=np.asarray(doc["importances"]),
    )
