"""Regression trees and tree ensembles: bagging, random forests, extra trees,
gradient boosting and region-grouped (multilayer) forests.

Trees see the country as one extra integer-coded feature named ``country``
appended after the design columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _treebuild as tb
from .base import Fingerprint, FittedModel
from .design import DesignMatrix

COUNTRY_FEATURE = "country"
UNBOUNDED_DEPTH = 2**31 - 1


def tree_seed(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), int(index), int(stream)]))


def tree_matrix(d: DesignMatrix, codes) -> np.ndarray:
    """Design columns plus the integer country code; unknown countries map past the last code."""
    lookup = {c: i for i, c in enumerate(codes)}
    cidx = np.array([lookup.get(c, len(codes)) for c in d.countries], dtype=float)
    return np.ascontiguousarray(np.column_stack([d.X, cidx]))


def n_features_for(fraction: float, M: int) -> int:
    if not 0.0 < fraction <= 1.0:
        raise ValueError("feature fraction must lie in (0, 1]")
    return max(1, min(M, math.ceil(fraction * M - 1e-12)))


@dataclass
class Tree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_matrix(self, Xt: np.ndarray) -> np.ndarray:
        return tb.predict_sum(self.feature, self.threshold, self.left, self.right, self.value,
                              np.zeros(1, dtype=np.int64), np.ascontiguousarray(Xt, dtype=float))

    def check(self) -> None:
        """Structural integrity: binary, acyclic, cover additive and positive."""
        internal = self.feature != tb.LEAF
        if np.any(self.cover <= 0):
            raise ValueError("tree has a node with zero cover")
        kids = np.concatenate([self.left[internal], self.right[internal]])
        if len(set(kids.tolist())) != len(kids) or np.any(kids <= 0) or np.any(kids >= self.n_nodes):
            raise ValueError("tree child pointers are not a valid binary tree")
        idx = np.flatnonzero(internal)
        if np.any(self.left[idx] <= idx) or np.any(self.right[idx] <= idx):
            raise ValueError("tree child pointers must point forward")
        if not np.allclose(self.cover[idx], self.cover[self.left[idx]] + self.cover[self.right[idx]], rtol=0, atol=0):
            raise ValueError("cover of a parent differs from the sum of its children")


@dataclass
class TreeEnsemble(FittedModel):
    """``f(x) = base + scale * sum_b tree_b(x)``.

    Forests use ``base = 0`` and ``scale = 1/B``; boosting uses the training
    mean and the learning rate.
    """

    family: str
    trees: list[Tree]
    base: float
    scale: float
    country_codes: tuple[str, ...]
    fingerprint: Fingerprint
    params: dict = field(default_factory=dict)
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def tree_feature_names(self) -> tuple[str, ...]:
        return tuple(self.feature_names) + (COUNTRY_FEATURE,)

    def packed(self):
        """Concatenated node arrays with global child indices and tree roots."""
        if self._packed is None:
            offs = np.cumsum([0] + [t.n_nodes for t in self.trees])[:-1].astype(np.int64)
            cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
            feature = cat("feature")
            left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offs)])
            right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offs)])
            self._packed = (feature, cat("threshold"), left, right, cat("value"), cat("cover"), offs)
        return self._packed

    def matrix(self, d: DesignMatrix) -> np.ndarray:
        self.check_schema(d)
        return tree_matrix(d, self.country_codes)

    def predict_matrix(self, Xt: np.ndarray) -> np.ndarray:
        f, th, l, r, v, _, roots = self.packed()
        if not self.trees:
            return np.full(len(Xt), self.base)
        return self.base + self.scale * tb.predict_sum(f, th, l, r, v, roots, np.ascontiguousarray(Xt, dtype=float))

    def member_predictions(self, d: DesignMatrix) -> np.ndarray:
        f, th, l, r, v, _, roots = self.packed()
        return tb.predict_trees(f, th, l, r, v, roots, self.matrix(d))

    def predict(self, d: DesignMatrix) -> np.ndarray:
        return self.predict_matrix(self.matrix(d))


@dataclass
class GroupedModel(FittedModel):
    """One ensemble per country group; each row is routed to its group's model."""

    family: str
    groups: dict[str, TreeEnsemble]
    country_group: dict[str, str]
    fingerprint: Fingerprint
    params: dict = field(default_factory=dict)

    def route(self, countries) -> np.ndarray:
        missing = sorted({c for c in countries if c not in self.country_group
                          or self.country_group[c] not in self.groups})
        if missing:
            raise KeyError(f"countries without a fitted group model: {missing}")
        return np.array([self.country_group[c] for c in countries], dtype=object)

    def predict(self, d: DesignMatrix) -> np.ndarray:
        self.check_schema(d)
        g = self.route(d.countries)
        out = np.empty(d.n)
        for name, model in self.groups.items():
            mask = g == name
            if mask.any():
                out[mask] = model.predict(d.subset(mask))
        return out


# ----------------------------------------------------------------------------
# fitting


def _grow(Xt, y, rows, allowed, sorted_rows, n_try, max_depth, min_split, min_leaf, random_thresholds,
          rng) -> Tree:
    seed = int(rng.integers(0, 2**63 - 1))
    arrays = tb.build_tree(Xt, np.ascontiguousarray(y, dtype=float), np.ascontiguousarray(rows, dtype=np.int64),
                           np.ascontiguousarray(allowed, dtype=np.int64), sorted_rows, int(n_try),
                           int(max_depth), int(min_split), int(min_leaf), bool(random_thresholds),
                           np.uint64(seed))
    return Tree(*arrays)


def _depth(max_depth) -> int:
    return UNBOUNDED_DEPTH if max_depth is None or max_depth == float("inf") else int(max_depth)


def fit_tree(d: DesignMatrix, max_depth=None, min_samples_split: int = 2, min_samples_leaf: int = 1,
             feature_subset_fraction: float = 1.0, random_thresholds: bool = False, seed: int = 0) -> Tree:
    """Single CART regression tree on the full training sample."""
    if d.n == 0:
        raise ValueError("cannot fit a tree on an empty design")
    Xt = tree_matrix(d, d.country_codes)
    M = Xt.shape[1]
    return _grow(Xt, d.y, np.arange(d.n), np.arange(M), tb.presort(Xt), n_features_for(feature_subset_fraction, M),
                 _depth(max_depth), min_samples_split, min_samples_leaf, random_thresholds, tree_seed(seed, 0))


def _forest(d: DesignMatrix, family: str, n_estimators: int, max_depth, min_samples_split: int,
            min_samples_leaf: int, feature_fraction: float, per_node: bool, rows: str, subsample: float,
            random_thresholds: bool, seed: int, params: dict) -> TreeEnsemble:
    if n_estimators < 1:
        raise ValueError("need at least one tree")
    if d.n == 0:
        raise ValueError("cannot fit a forest on an empty design")
    Xt = tree_matrix(d, d.country_codes)
    n, M = Xt.shape
    k = n_features_for(feature_fraction, M)
    depth = _depth(max_depth)
    sorted_rows = tb.presort(Xt)
    trees = []
    for b in range(n_estimators):
        rng = tree_seed(seed, b)
        if rows == "bootstrap":
            idx = np.sort(rng.integers(0, n, size=n))
        elif rows == "subsample":
            idx = np.sort(rng.choice(n, size=max(1, int(round(subsample * n))), replace=False))
        else:
            idx = np.arange(n)
        if per_node:
            allowed, n_try = np.arange(M), k
        else:
            allowed, n_try = np.sort(rng.choice(M, size=k, replace=False)), k
        trees.append(_grow(Xt, d.y, idx, allowed, sorted_rows, n_try, depth, min_samples_split, min_samples_leaf,
                           random_thresholds, rng))
    return TreeEnsemble(family, trees, 0.0, 1.0 / n_estimators, tuple(d.country_codes),
                        Fingerprint.of(d, seed), dict(params))


def fit_bagging(d: DesignMatrix, n_estimators: int = 1000, max_depth=None, min_samples_split: int = 2,
                min_samples_leaf: int = 1, max_features: float = 1.0, bootstrap: bool = True,
                seed: int = 0) -> TreeEnsemble:
    """Bootstrap aggregation; ``max_features`` draws one feature subset per tree."""
    params = dict(n_estimators=n_estimators, max_depth=max_depth, min_samples_split=min_samples_split,
                  min_samples_leaf=min_samples_leaf, max_features=max_features, bootstrap=bootstrap)
    return _forest(d, "Bagging", n_estimators, max_depth, min_samples_split, min_samples_leaf, max_features,
                   False, "bootstrap" if bootstrap else "all", 1.0, False, seed, params)


def fit_random_forest(d: DesignMatrix, n_estimators: int = 1000, max_depth=None, min_samples_split: int = 2,
                      min_samples_leaf: int = 1, max_features: float = 1.0, bootstrap: bool = True,
                      seed: int = 0) -> TreeEnsemble:
    params = dict(n_estimators=n_estimators, max_depth=max_depth, min_samples_split=min_samples_split,
                  min_samples_leaf=min_samples_leaf, max_features=max_features, bootstrap=bootstrap)
    return _forest(d, "RandomForest", n_estimators, max_depth, min_samples_split, min_samples_leaf,
                   max_features, True, "bootstrap" if bootstrap else "all", 1.0, False, seed, params)


def fit_extra_trees(d: DesignMatrix, n_estimators: int = 1000, max_depth=None, min_samples_split: int = 2,
                    min_samples_leaf: int = 1, max_features: float = 1.0, bootstrap: bool = False,
                    seed: int = 0) -> TreeEnsemble:
    params = dict(n_estimators=n_estimators, max_depth=max_depth, min_samples_split=min_samples_split,
                  min_samples_leaf=min_samples_leaf, max_features=max_features, bootstrap=bootstrap)
    return _forest(d, "ExtraTrees", n_estimators, max_depth, min_samples_split, min_samples_leaf,
                   max_features, True, "bootstrap" if bootstrap else "all", 1.0, True, seed, params)


def fit_gradient_boosting(d: DesignMatrix, n_estimators: int = 100, learning_rate: float = 0.1,
                          max_depth=6, subsample: float = 1.0, colsample_bytree: float = 1.0,
                          min_child_weight: int = 1, seed: int = 0, return_path: bool = False):
    """Least-squares boosting: ``F_b = F_{b-1} + learning_rate * tree_b``.

    Each tree fits the current residuals on a without-replacement row
    subsample using a per-tree column subsample. With ``return_path`` the
    training MSE after every stage is returned as well.
    """
    if d.n == 0:
        raise ValueError("cannot fit boosting on an empty design")
    Xt = tree_matrix(d, d.country_codes)
    n, M = Xt.shape
    k = n_features_for(colsample_bytree, M)
    depth = _depth(max_depth)
    base = float(np.mean(d.y))
    F = np.full(n, base)
    sorted_rows = tb.presort(Xt)
    trees, path = [], [float(np.mean((d.y - F) ** 2))]
    for b in range(n_estimators):
        rng = tree_seed(seed, b)
        if subsample >= 1.0:
            idx = np.arange(n)
        else:
            idx = np.sort(rng.choice(n, size=max(1, int(round(subsample * n))), replace=False))
        allowed = np.arange(M) if k == M else np.sort(rng.choice(M, size=k, replace=False))
        tree = _grow(Xt, d.y - F, idx, allowed, sorted_rows, len(allowed), depth, 2, max(1, int(min_child_weight)), False, rng)
        trees.append(tree)
        F = F + learning_rate * tree.predict_matrix(Xt)
        path.append(float(np.mean((d.y - F) ** 2)))
    params = dict(n_estimators=n_estimators, learning_rate=learning_rate, max_depth=max_depth,
                  subsample=subsample, colsample_bytree=colsample_bytree, min_child_weight=min_child_weight)
    model = TreeEnsemble("GradientBoosting", trees, base, float(learning_rate), tuple(d.country_codes),
                         Fingerprint.of(d, seed), params)
    return (model, np.array(path)) if return_path else model


def fit_region_forest(d: DesignMatrix, n_estimators: int, max_depth, subsample: float, feature_fraction: float,
                      min_child_weight: int, seed: int, family: str = "RegionForest") -> TreeEnsemble:
    """Forest with without-replacement row subsampling and per-node feature draws."""
    params = dict(n_estimators=n_estimators, max_depth=max_depth, subsample=subsample,
                  colsample_bynode=feature_fraction, min_child_weight=min_child_weight)
    rows = "all" if subsample >= 1.0 else "subsample"
    return _forest(d, family, n_estimators, max_depth, 2, max(1, int(min_child_weight)), feature_fraction,
                   True, rows, subsample, False, seed, params)


def fit_multilayer(d: DesignMatrix, country_group: dict[str, str], group_params: dict[str, dict],
                   variant: str = "2S", seed: int = 0) -> GroupedModel:
    """One forest per country group, predictions routed by group.

    ``group_params`` maps each group to keyword arguments of
    :func:`fit_region_forest`. Groups are fitted in sorted order with seeds
    derived from ``(seed, group position)``.
    """
    if variant not in ("1S", "2S"):
        raise ValueError("variant must be '1S' or '2S'")
    unmapped = sorted({c for c in d.countries if c not in country_group})
    if unmapped:
        raise KeyError(f"training countries without a group: {unmapped}")
    g = np.array([country_group[c] for c in d.countries], dtype=object)
    groups = {}
    for j, name in enumerate(sorted(set(g))):
        if name not in group_params:
            raise KeyError(f"no hyperparameters for group {name!r}")
        sub_seed = int(np.random.SeedSequence([int(seed) & (2**63 - 1), 7919, j]).generate_state(1)[0])
        groups[name] = fit_region_forest(d.subset(g == name), seed=sub_seed, family=f"MultilayerRF_{variant}",
                                         **group_params[name])
    family = f"MultilayerRF_{variant}"
    return GroupedModel(family, groups, dict(country_group), Fingerprint.of(d, seed),
                        {"variant": variant, "groups": {k: dict(v) for k, v in group_params.items()}})
