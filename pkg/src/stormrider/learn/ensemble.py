"""Tree-ensemble fitting, prediction and serialization.

fit_gbdt boosts second-order histogram trees against the squared or
Tweedie-deviance objective; fit_random_forest averages variance-reduction
trees grown on row subsamples with per-node feature sampling.  Either
result is a TreeEnsemble that predicts on the ridership scale, serialises
to a versioned self-describing text format, and exposes per-feature split
gains for importance reporting.

All randomness derives from one master seed through numpy SeedSequence
spawning (one child per tree) plus a per-tree splitmix64 stream for
per-node feature draws, so fitted models do not depend on thread count or
scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .objectives import (squared_grad_hess, tweedie_grad_hess,
                         validate_tweedie_power)
from .trees import (apply_tree_binned, apply_tree_values, bin_columns,
                    grow_tree, grow_tree_hist, quantile_bin_edges)

MODEL_FORMAT = "stormrider-model"
MODEL_VERSION = 1

OBJECTIVES = ("squared", "tweedie")
KINDS = ("gbdt", "random_forest")

_TWEEDIE_MEAN_FLOOR = 1e-8


@dataclass(frozen=True)
class Hyperparameters:
    """Knobs for either ensemble flavour.

    The boosters use learning_rate / col_subsample / lam / gamma; the
    random forest uses mtry and ignores those.  ``mtry = None`` means
    consider every feature at every node.
    """

    objective: str = "squared"
    n_trees: int = 55
    learning_rate: float = 0.3
    max_depth: int = 3
    min_obs_leaf: int = 5
    row_subsample: float = 0.55
    col_subsample: float = 0.3
    mtry: int | None = None
    n_bins: int = 256
    lam: float = 1.0
    gamma: float = 1e-8
    tweedie_power: float = 1.06

    def validate(self, n_features: int | None = None) -> None:
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_obs_leaf < 1:
            raise ValueError("min_obs_leaf must be >= 1")
        for name in ("row_subsample", "col_subsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.lam < 0.0 or self.gamma < 0.0:
            raise ValueError("lam and gamma must be non-negative")
        if self.objective == "tweedie":
            validate_tweedie_power(self.tweedie_power)
        if self.mtry is not None:
            if self.mtry < 1:
                raise ValueError("mtry must be >= 1")
            if n_features is not None and self.mtry > n_features:
                raise ValueError(f"mtry {self.mtry} exceeds {n_features} features")


def xgboost_defaults() -> Hyperparameters:
    """Squared-loss booster defaults from the tuned configuration."""
    return Hyperparameters(objective="squared", n_trees=55, learning_rate=0.3,
                           max_depth=3, min_obs_leaf=5, row_subsample=0.55,
                           col_subsample=0.3, n_bins=256, lam=1.0, gamma=1e-8)


def tweedie_defaults() -> Hyperparameters:
    """Tweedie-deviance booster defaults from the tuned configuration."""
    return Hyperparameters(objective="tweedie", n_trees=1000, learning_rate=0.05,
                           max_depth=10, min_obs_leaf=1, row_subsample=0.55,
                           col_subsample=0.9, n_bins=256, lam=1.0, gamma=1e-4,
                           tweedie_power=1.06)


def random_forest_defaults() -> Hyperparameters:
    """Random-forest defaults from the tuned configuration."""
    return Hyperparameters(objective="squared", n_trees=76, learning_rate=1.0,
                           max_depth=30, min_obs_leaf=3, row_subsample=0.95,
                           col_subsample=1.0, mtry=13, n_bins=25, lam=0.0,
                           gamma=0.0)


@dataclass
class Tree:
    """One fitted tree as parallel node arrays in depth-first preorder.

    feature == -1 marks a leaf; thresholds are raw feature values (bin
    edges), routing rows left when x <= threshold.  feature_gain tallies
    realised split gain per (global) feature for this tree.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    feature_gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))


@dataclass
class TreeEnsemble:
    """A fitted forest or booster plus everything needed to predict."""

    kind: str
    objective: str
    trees: list[Tree]
    base_score: float
    learning_rate: float
    n_features: int
    feature_names: tuple[str, ...]
    tweedie_power: float = 1.06
    target_bounds: tuple[float, float] | None = None  # forests clip to the training range

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if len(self.feature_names) != self.n_features:
            raise ValueError("feature_names must match n_features")

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _tree_sum(trees: Sequence[Tree], x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[0])
    leaf = np.empty(x.shape[0])
    for t in trees:
        apply_tree_values(x, t.feature, t.threshold, t.left, t.right, t.value, leaf)
        out += leaf
    return out


def raw_score(ensemble: TreeEnsemble, x) -> np.ndarray:
    """Additive margin before any link/clamp: base + lr * sum of trees
    for a booster, mean of trees for a forest."""
    x = _check_matrix(ensemble, x)
    if ensemble.kind == "random_forest":
        if not ensemble.trees:
            return np.full(x.shape[0], ensemble.base_score)
        return _tree_sum(ensemble.trees, x) / len(ensemble.trees)
    return ensemble.base_score + ensemble.learning_rate * _tree_sum(ensemble.trees, x)


def predict(ensemble: TreeEnsemble, x) -> np.ndarray:
    """Ridership-scale predictions.

    Squared-loss boosters clamp below at zero (counts cannot be
    negative); Tweedie boosters exponentiate the log-link margin; forests
    average leaf means, which already lie inside the training range.
    """
    out = raw_score(ensemble, x)
    if ensemble.kind == "gbdt" and ensemble.objective == "tweedie":
        return np.exp(out)
    if ensemble.kind == "gbdt":
        return np.maximum(out, 0.0)
    return out


def _check_matrix(ensemble: TreeEnsemble, x) -> np.ndarray:
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.ndim != 2 or x.shape[1] != ensemble.n_features:
        raise ValueError(f"expected (n, {ensemble.n_features}) feature matrix, "
                         f"got {x.shape}")
    return x


def _prep_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64)).ravel()
    if x.ndim != 2:
        raise ValueError("x must be a 2-D feature matrix")
    if x.shape[0] != y.size:
        raise ValueError(f"{x.shape[0]} rows of features vs {y.size} targets")
    if y.size == 0:
        raise ValueError("cannot fit on an empty panel")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("features and targets must be finite")
    return x, y


def _names(feature_names, n_features) -> tuple[str, ...]:
    if feature_names is None:
        return tuple(f"f{i}" for i in range(n_features))
    names = tuple(feature_names)
    if len(names) != n_features:
        raise ValueError("feature_names length mismatch")
    return names


def _subsample_size(rate: float, n: int) -> int:
    return max(1, int(rate * n + 0.5))


def _flat_edges(edges) -> tuple[np.ndarray, np.ndarray]:
    starts = np.zeros(len(edges) + 1, dtype=np.int64)
    np.cumsum([e.size for e in edges], out=starts[1:])
    flat = np.concatenate(edges) if starts[-1] else np.zeros(0)
    return flat, starts


def _package_tree(result, edge_flat, edge_starts) -> Tree:
    n_nodes, feat, bin_, left, right, value, gain, feat_gain = result
    feature = feat.astype(np.int64)
    threshold = np.zeros(n_nodes)
    split = feature >= 0
    threshold[split] = edge_flat[edge_starts[feature[split]] + bin_[split]]
    return Tree(feature=feature, threshold=threshold,
                left=left.astype(np.int64), right=right.astype(np.int64),
                value=value.copy(), gain=gain.copy(),
                feature_gain=feat_gain.copy())


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _kernel_seed(rng: np.random.Generator) -> np.uint64:
    return np.uint64(rng.integers(0, np.iinfo(np.int64).max, dtype=np.int64))


def fit_gbdt(x, y, hp: Hyperparameters | None = None, seed=0,
             feature_names: Sequence[str] | None = None) -> TreeEnsemble:
    """Boost hp.n_trees histogram trees with second-order Newton steps.

    Bin edges are frozen from the training matrix before the first round.
    Each round draws a row subsample and a per-tree column subset, fits a
    tree to the current gradients, then updates every training row's raw
    score by learning_rate times the tree output.  The base score is
    mean(y) for the squared objective and log(mean(y) + 1e-8) for the
    Tweedie objective.
    """
    hp = hp if hp is not None else xgboost_defaults()
    x, y = _prep_xy(x, y)
    n, n_feat = x.shape
    hp.validate(n_feat)
    if hp.objective == "tweedie" and np.any(y < 0):
        raise ValueError("tweedie objective requires non-negative targets")

    edges = quantile_bin_edges(x, hp.n_bins)
    codes_t, n_bins = bin_columns(x, edges)
    edge_flat, edge_starts = _flat_edges(edges)

    if hp.objective == "tweedie":
        base = float(np.log(np.mean(y) + _TWEEDIE_MEAN_FLOOR))
    else:
        base = float(np.mean(y))
    scores = np.full(n, base)

    n_sub = _subsample_size(hp.row_subsample, n)
    n_cols = _subsample_size(hp.col_subsample, n_feat)
    all_feats = np.arange(n_feat, dtype=np.int64)

    children = _seed_sequence(seed).spawn(hp.n_trees)
    trees: list[Tree] = []
    leaf = np.empty(n)
    gh = np.empty((n, 2))
    for m in range(hp.n_trees):
        rng = np.random.default_rng(children[m])
        rows = np.sort(rng.choice(n, size=n_sub, replace=False)).astype(np.int64)
        if n_cols < n_feat:
            feats = np.sort(rng.choice(n_feat, size=n_cols, replace=False)).astype(np.int64)
        else:
            feats = all_feats

        if hp.objective == "tweedie":
            g, h = tweedie_grad_hess(y, scores, hp.tweedie_power)
        else:
            g, h = squared_grad_hess(y, scores)
        gh[:, 0] = g
        gh[:, 1] = h

        result = grow_tree_hist(codes_t, rows, gh, n_bins, feats, n_feat,
                                hp.max_depth, hp.min_obs_leaf,
                                hp.lam, hp.gamma)
        tree = _package_tree(result, edge_flat, edge_starts)
        apply_tree_binned(codes_t, tree.feature, result[2], tree.left,
                          tree.right, tree.value, leaf)
        scores += hp.learning_rate * leaf
        trees.append(tree)

    return TreeEnsemble(kind="gbdt", objective=hp.objective, trees=trees,
                        base_score=base, learning_rate=hp.learning_rate,
                        n_features=n_feat, feature_names=_names(feature_names, n_feat),
                        tweedie_power=hp.tweedie_power)


def fit_random_forest(x, y, hp: Hyperparameters | None = None, seed=0,
                      feature_names: Sequence[str] | None = None,
                      threads: int = 1) -> TreeEnsemble:
    """Fit an averaged forest of variance-reduction trees.

    Each tree sees a row subsample drawn without replacement and samples
    hp.mtry features per split.  Trees are independent, so they may fit
    on a thread pool; per-tree seeds come from the master seed alone and
    the assembled forest is identical at any thread count.
    """
    hp = hp if hp is not None else random_forest_defaults()
    x, y = _prep_xy(x, y)
    n, n_feat = x.shape
    hp.validate(n_feat)

    edges = quantile_bin_edges(x, hp.n_bins)
    codes_t, n_bins = bin_columns(x, edges)
    edge_flat, edge_starts = _flat_edges(edges)

    g = np.ascontiguousarray(-y)
    h = np.ones(n)
    n_sub = _subsample_size(hp.row_subsample, n)
    all_feats = np.arange(n_feat, dtype=np.int64)
    mtry = 0 if hp.mtry is None else int(hp.mtry)

    children = _seed_sequence(seed).spawn(hp.n_trees)

    def one_tree(i: int) -> Tree:
        rng = np.random.default_rng(children[i])
        rows = np.sort(rng.choice(n, size=n_sub, replace=False)).astype(np.int64)
        kseed = _kernel_seed(rng)
        result = grow_tree(codes_t, rows, g, h, n_bins, all_feats, n_feat,
                           mtry, hp.max_depth, hp.min_obs_leaf, 0.0, 0.0, kseed)
        return _package_tree(result, edge_flat, edge_starts)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(one_tree, range(hp.n_trees)))
    else:
        trees = [one_tree(i) for i in range(hp.n_trees)]

    return TreeEnsemble(kind="random_forest", objective="squared", trees=trees,
                        base_score=float(np.mean(y)), learning_rate=1.0,
                        n_features=n_feat, feature_names=_names(feature_names, n_feat),
                        target_bounds=(float(y.min()), float(y.max())))


def variable_importance(ensemble: TreeEnsemble) -> np.ndarray:
    """Total split gain per feature, scaled so the top feature is 1.0.

    Features never split on score 0; an ensemble with no splits at all is
    all zeros.  Tree order cannot matter: the tallies are summed.
    """
    total = np.zeros(ensemble.n_features)
    for t in ensemble.trees:
        total += t.feature_gain
    peak = total.max() if total.size else 0.0
    if peak <= 0.0:
        return np.zeros(ensemble.n_features)
    return total / peak


# ---------------------------------------------------------------------------
# versioned text serialization


def _tree_to_dict(t: Tree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": t.value.tolist(),
        "gain": t.gain.tolist(),
        "feature_gain": t.feature_gain.tolist(),
    }


def _tree_from_dict(d: dict) -> Tree:
    return Tree(feature=np.asarray(d["feature"], dtype=np.int64),
                threshold=np.asarray(d["threshold"], dtype=np.float64),
                left=np.asarray(d["left"], dtype=np.int64),
                right=np.asarray(d["right"], dtype=np.int64),
                value=np.asarray(d["value"], dtype=np.float64),
                gain=np.asarray(d["gain"], dtype=np.float64),
                feature_gain=np.asarray(d["feature_gain"], dtype=np.float64))


def save_model(ensemble: TreeEnsemble, path) -> None:
    """Write the versioned JSON text format (.srm).

    Floats are serialised with shortest-round-trip repr, so a reloaded
    model predicts bit-identically.
    """
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": ensemble.kind,
        "objective": {"name": ensemble.objective,
                      "tweedie_power": ensemble.tweedie_power},
        "base_score": ensemble.base_score,
        "learning_rate": ensemble.learning_rate,
        "n_features": ensemble.n_features,
        "feature_names": list(ensemble.feature_names),
        "target_bounds": list(ensemble.target_bounds) if ensemble.target_bounds else None,
        "trees": [_tree_to_dict(t) for t in ensemble.trees],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> TreeEnsemble:
    """Read a .srm file, refusing unknown formats or versions."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    bounds = doc.get("target_bounds")
    return TreeEnsemble(
        kind=doc["kind"],
        objective=doc["objective"]["name"],
        trees=[_tree_from_dict(d) for d in doc["trees"]],
        base_score=float(doc["base_score"]),
        learning_rate=float(doc["learning_rate"]),
        n_features=int(doc["n_features"]),
        feature_names=tuple(doc["feature_names"]),
        tweedie_power=float(doc["objective"].get("tweedie_power", 1.06)),
        target_bounds=tuple(bounds) if bounds else None,
    )
