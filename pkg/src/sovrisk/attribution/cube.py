"""Exact tree attributions collected into an observation-by-feature cube."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..models.design import DesignMatrix
from ..models.trees import GroupedModel, Tree, TreeEnsemble
from . import _kernel

BASE_LABEL = "(base)"


class ModelIntegrityError(ValueError):
    pass


@dataclass
class AttributionCube:
    """Per-observation Shapley values.

    ``phi[i, j]`` is the attribution of feature ``j`` for row ``i``, ``base[i]``
    the expected model output for the row's (group) model and
    ``interactions[i, j, k]`` the pairwise decomposition when computed.
    """

    countries: np.ndarray
    dates: np.ndarray
    feature_names: tuple[str, ...]
    X: np.ndarray
    base: np.ndarray
    phi: np.ndarray
    prediction: np.ndarray
    interactions: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.countries)

    def index(self, feature: str) -> int:
        try:
            return self.feature_names.index(feature)
        except ValueError:
            raise KeyError(f"feature {feature!r} not in cube {list(self.feature_names)}") from None

    def local_accuracy_gap(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(self.base + self.phi.sum(axis=1) - self.prediction)))

    def interaction_gap(self) -> float:
        if self.interactions is None or self.n == 0:
            return 0.0
        return float(np.max(np.abs(self.interactions.sum(axis=2) - self.phi)))

    def subset(self, mask) -> "AttributionCube":
        mask = np.asarray(mask)
        return AttributionCube(self.countries[mask], self.dates[mask], self.feature_names, self.X[mask],
                               self.base[mask], self.phi[mask], self.prediction[mask],
                               None if self.interactions is None else self.interactions[mask])

    def series(self, feature: str) -> dict[str, pd.Series]:
        """Attribution time series per country for one feature."""
        j = self.index(feature)
        out = {}
        for c in sorted(set(self.countries)):
            m = self.countries == c
            s = pd.Series(self.phi[m, j], index=pd.DatetimeIndex(self.dates[m])).sort_index()
            out[c] = s
        return out

    def to_frame(self) -> pd.DataFrame:
        """Long ``country,date,feature,phi``; the base value uses the label ``(base)``."""
        n, M = self.phi.shape
        names = list(self.feature_names) + [BASE_LABEL]
        vals = np.column_stack([self.phi, self.base])
        df = pd.DataFrame({
            "country": np.repeat(self.countries, M + 1),
            "date": np.repeat(self.dates.astype("datetime64[D]").astype(str), M + 1),
            "feature": np.tile(names, n),
            "phi": vals.ravel(),
        })
        return df

    def interactions_frame(self) -> pd.DataFrame:
        if self.interactions is None:
            raise ValueError("cube has no interaction values")
        n, M, _ = self.interactions.shape
        return pd.DataFrame({
            "country": np.repeat(self.countries, M * M),
            "date": np.repeat(self.dates.astype("datetime64[D]").astype(str), M * M),
            "feature": np.tile(np.repeat(self.feature_names, M), n),
            "feature2": np.tile(np.tile(self.feature_names, M), n),
            "phi_ij": self.interactions.ravel(),
        })

    def to_csv(self, path: str | Path, interactions_path: str | Path | None = None) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        if interactions_path is not None:
            self.interactions_frame().to_csv(interactions_path, index=False, float_format="%.17g",
                                             lineterminator="\n")


def read_cube(path: str | Path, interactions_path: str | Path | None = None) -> AttributionCube:
    """Rebuild a cube from :meth:`AttributionCube.to_csv` output.

    Feature values and predictions are not stored in the CSV; ``X`` is filled
    with NaN and the prediction is rebuilt from local accuracy.
    """
    df = pd.read_csv(path, float_precision="round_trip", dtype={"country": str, "feature": str})
    names = list(dict.fromkeys(df["feature"]))
    names.remove(BASE_LABEL)
    wide = df.pivot_table(index=["country", "date"], columns="feature", values="phi", sort=False)
    keys = wide.index.to_frame(index=False)
    phi = wide[names].to_numpy(float)
    base = wide[BASE_LABEL].to_numpy(float)
    inter = None
    if interactions_path is not None:
        di = pd.read_csv(interactions_path, float_precision="round_trip",
                         dtype={"country": str, "feature": str, "feature2": str})
        M = len(names)
        block = di["phi_ij"].to_numpy(float).reshape(-1, M, M)
        rows = di.iloc[::M * M][["country", "date"]]
        pos = pd.MultiIndex.from_frame(rows).get_indexer(wide.index)
        if np.any(pos < 0):
            raise ValueError("interaction file does not cover every attribution row")
        inter = block[pos]
    return AttributionCube(keys["country"].to_numpy(object), keys["date"].to_numpy().astype("datetime64[D]"),
                           tuple(names), np.full(phi.shape, np.nan), base, phi, base + phi.sum(axis=1), inter)


# ----------------------------------------------------------------------------


def _arrays(model):
    if isinstance(model, Tree):
        arrs = (model.feature, model.threshold, model.left, model.right, model.value, model.cover)
        return arrs, np.zeros(1, dtype=np.int64), 0.0, 1.0
    f, th, l, r, v, c, roots = model.packed()
    return (f, th, l, r, v, c), roots, float(model.base), float(model.scale)


def _check(arrs):
    feature, _, left, right, _, cover = arrs
    if np.any(cover <= 0):
        raise ModelIntegrityError("model has a node with zero training cover")
    internal = feature >= 0
    if np.any(left[internal] < 0) or np.any(right[internal] < 0):
        raise ModelIntegrityError("internal node without two children")


def shap_matrix(model, Xt: np.ndarray, interactions: bool = False):
    """Attributions of a tree or ensemble on an already-encoded matrix.

    Returns ``(base, phi)`` or ``(base, phi, interactions)``.
    """
    arrs, roots, base0, scale = _arrays(model)
    _check(arrs)
    Xt = np.ascontiguousarray(Xt, dtype=float)
    f, th, l, r, v, c = arrs
    base = base0 + scale * float(_kernel.tree_expectations(l, r, v, c, roots).sum())
    phi = scale * _kernel.ensemble_shap(f, th, l, r, v, c, roots, Xt, 0, 0)
    if not interactions:
        return base, phi
    used = np.zeros(Xt.shape[1], dtype=np.bool_)
    used[np.unique(f[f >= 0])] = True
    inter = scale * _kernel.ensemble_interactions(f, th, l, r, v, c, roots, Xt, used)
    return base, phi, inter


def tree_shap(model, d: DesignMatrix, interactions: bool = False) -> AttributionCube:
    """Exact path-dependent Shapley values of a tree ensemble on the rows of ``d``.

    Forest attributions are the mean of member-tree attributions, boosting
    attributions the learning-rate-scaled sum. Grouped models attribute
    every row with its group's forest and that forest's base value.
    """
    if isinstance(model, GroupedModel):
        model.check_schema(d)
        g = model.route(d.countries)
        names = next(iter(model.groups.values())).tree_feature_names
        M = len(names)
        base = np.empty(d.n)
        phi = np.empty((d.n, M))
        inter = np.empty((d.n, M, M)) if interactions else None
        Xall = np.empty((d.n, M))
        for name in sorted(model.groups):
            mask = g == name
            if not mask.any():
                continue
            sub = model.groups[name]
            Xt = sub.matrix(d.subset(mask))
            res = shap_matrix(sub, Xt, interactions)
            base[mask] = res[0]
            phi[mask] = res[1]
            Xall[mask] = Xt
            if interactions:
                inter[mask] = res[2]
        pred = model.predict(d)
        return AttributionCube(d.countries.copy(), d.dates.copy(), names, Xall, base, phi, pred, inter)
    if not isinstance(model, TreeEnsemble):
        raise TypeError("tree_shap needs a tree ensemble or grouped tree model")
    Xt = model.matrix(d)
    res = shap_matrix(model, Xt, interactions)
    return AttributionCube(d.countries.copy(), d.dates.copy(), model.tree_feature_names, Xt,
                           np.full(d.n, res[0]), res[1], model.predict_matrix(Xt),
                           res[2] if interactions else None)


def shap_interactions(model, d: DesignMatrix) -> AttributionCube:
    """Cube with pairwise interaction tensors; rows of each tensor sum to the Shapley values."""
    return tree_shap(model, d, interactions=True)

