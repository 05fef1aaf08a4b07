"""K-fold cross-validation and random grid search over hyperparameters."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .ensemble import (Hyperparameters, TreeEnsemble, fit_gbdt,
                       fit_random_forest, predict)

ALGORITHMS = ("gbdt", "random_forest")


def _sequence(seed) -> np.random.SeedSequence:
    """Accept an int entropy value or a ready-made SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _fit(algorithm: str, x, y, hp, seed, threads):
    if algorithm == "gbdt":
        return fit_gbdt(x, y, hp, seed=seed)
    if algorithm == "random_forest":
        return fit_random_forest(x, y, hp, seed=seed, threads=threads)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def kfold_cv(x, y, hp: Hyperparameters, n_folds: int = 5, seed=0,
             algorithm: str = "gbdt", threads: int = 1) -> float:
    """Mean held-out MSE over k random disjoint folds.

    Folds partition the rows; each fold is scored by a model fitted on
    the other k - 1 folds, predicting on the ridership scale.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    if not 2 <= n_folds <= n:
        raise ValueError(f"n_folds must lie in [2, {n}], got {n_folds}")
    children = _sequence(seed).spawn(n_folds + 1)
    perm = np.random.default_rng(children[0]).permutation(n)
    folds = np.array_split(perm, n_folds)
    mses = []
    for i, held in enumerate(folds):
        train = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        model = _fit(algorithm, x[train], y[train], hp, children[i + 1], threads)
        resid = predict(model, x[held]) - y[held]
        mses.append(float(np.mean(resid * resid)))
    return float(np.mean(mses))


@dataclass(frozen=True)
class Trial:
    hp: Hyperparameters
    score: float


@dataclass(frozen=True)
class SearchResult:
    best: Hyperparameters
    best_score: float
    trials: tuple[Trial, ...]


def random_grid_search(x, y, space: dict[str, Sequence], budget: int,
                       base: Hyperparameters | None = None, seed=0,
                       algorithm: str = "gbdt", n_folds: int = 5,
                       threads: int = 1) -> SearchResult:
    """Cross-validated random search over a discrete hyperparameter grid.

    ``space`` maps Hyperparameters field names to candidate value lists.
    ``budget`` distinct combinations are drawn uniformly without
    replacement (all of them when the budget covers the grid).  Every
    trial scores the same folds; the winner is the lowest CV MSE with
    ties going to the earliest draw.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    base = base if base is not None else Hyperparameters()
    names = list(space.keys())
    valid = set(Hyperparameters.__dataclass_fields__)
    unknown = [k for k in names if k not in valid]
    if unknown:
        raise ValueError(f"unknown hyperparameter names: {unknown}")
    levels = [list(space[k]) for k in names]
    if any(len(v) == 0 for v in levels):
        raise ValueError("every searched parameter needs at least one candidate")
    dims = tuple(len(v) for v in levels)
    total = int(np.prod(dims)) if dims else 1

    children = _sequence(seed).spawn(2)
    rng = np.random.default_rng(children[0])
    n_draw = min(budget, total)
    draw = rng.choice(total, size=n_draw, replace=False)

    trials = []
    best_i = -1
    best_score = np.inf
    for pos, flat in enumerate(draw):
        combo = np.unravel_index(int(flat), dims) if dims else ()
        hp = replace(base, **{k: levels[j][combo[j]] for j, k in enumerate(names)})
        score = kfold_cv(x, y, hp, n_folds=n_folds, seed=children[1],
                         algorithm=algorithm, threads=threads)
        trials.append(Trial(hp=hp, score=score))
        if score < best_score:  # strict: earliest draw wins ties
            best_score = score
            best_i = pos
    return SearchResult(best=trials[best_i].hp, best_score=best_score,
                        trials=tuple(trials))
