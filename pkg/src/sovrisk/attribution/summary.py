"""Aggregations of attribution cubes: importance tables, interaction heatmaps,
dependence curves and two-feature surfaces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from ..models.trees import COUNTRY_FEATURE
from ..panel import REGION_ORDER, Region
from .cube import AttributionCube
from .loess import LoessFit, loess


def _region_order(countries, regions: Mapping[str, Region]) -> list[str]:
    rank = {r: i for i, r in enumerate(REGION_ORDER)}
    return sorted(countries, key=lambda c: (rank[Region(regions[c])] if c in regions else len(rank), c))


def _reported(cube: AttributionCube, exclude) -> list[str]:
    return [f for f in cube.feature_names if f not in set(exclude)]


@dataclass
class ImportanceSummary:
    country: pd.DataFrame
    region: pd.DataFrame
    global_: pd.Series

    def to_frame(self) -> pd.DataFrame:
        """Long ``level,group,feature,mean_abs_phi`` table."""
        parts = []
        for level, table in (("country", self.country), ("region", self.region)):
            long = table.stack().rename("mean_abs_phi").reset_index()
            long.columns = ["group", "feature", "mean_abs_phi"]
            long.insert(0, "level", level)
            parts.append(long)
        g = self.global_.rename("mean_abs_phi").reset_index()
        g.columns = ["feature", "mean_abs_phi"]
        g.insert(0, "group", "global")
        g.insert(0, "level", "global")
        parts.append(g)
        return pd.concat(parts, ignore_index=True)


def summarize_importance(cube: AttributionCube, regions: Mapping[str, Region],
                         exclude=(COUNTRY_FEATURE,)) -> ImportanceSummary:
    """Mean absolute attribution per country; region and global values are
    unweighted means of the country means."""
    if cube.n == 0:
        raise ValueError("empty attribution cube")
    feats = _reported(cube, exclude)
    idx = [cube.index(f) for f in feats]
    frame = pd.DataFrame(np.abs(cube.phi[:, idx]), columns=feats)
    frame["country"] = cube.countries
    per_country = frame.groupby("country", sort=False).mean()
    per_country = per_country.loc[_region_order(per_country.index, regions)]
    reg = pd.Series({c: Region(regions[c]).value for c in per_country.index}, name="region")
    per_region = per_country.groupby(reg, sort=False).mean()
    per_region.index.name = "region"
    return ImportanceSummary(per_country, per_region, per_country.mean(axis=0))


def interaction_heatmap(cube: AttributionCube, key: str, regions: Mapping[str, Region],
                        exclude=(COUNTRY_FEATURE,)) -> pd.DataFrame:
    """Per-country mean ``|phi_key,other|``; rows ordered by region then code."""
    if cube.interactions is None:
        raise ValueError("cube has no interaction values")
    k = cube.index(key)
    others = [f for f in _reported(cube, exclude) if f != key]
    cols = [cube.index(f) for f in others]
    frame = pd.DataFrame(np.abs(cube.interactions[:, k, :][:, cols]), columns=others)
    frame["country"] = cube.countries
    table = frame.groupby("country", sort=False).mean()
    return table.loc[_region_order(table.index, regions)]


@dataclass
class DependenceCurve:
    feature: str
    x: np.ndarray
    phi: np.ndarray
    fit: LoessFit

    def points_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "phi": self.phi})

    def curve_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.fit.grid, "loess": self.fit.fit})


def dependence_curve(cube: AttributionCube, feature: str, frac: float = 0.4, robust_iters: int = 1,
                     clip=(5.0, 95.0), n_grid: int = 50, mask=None) -> DependenceCurve:
    """Feature value against its attribution, with a LOESS trend inside the clip band."""
    j = cube.index(feature)
    x, y = cube.X[:, j], cube.phi[:, j]
    if mask is not None:
        x, y = x[mask], y[mask]
    fit = loess(x, y, frac=frac, robust_iters=robust_iters, clip=clip, n_grid=n_grid)
    return DependenceCurve(feature, np.asarray(x), np.asarray(y), fit)


def dependence_surface(cube: AttributionCube, pair: tuple[str, str], grid_a, grid_b) -> pd.DataFrame:
    """Binned mean of ``phi_a + phi_b + 2 phi_ab`` over a rectangular grid.

    ``grid_a`` and ``grid_b`` are bin edges; bins are closed on the left and
    the last bin also includes its right edge. Empty bins carry NaN.
    """
    if cube.interactions is None:
        raise ValueError("cube has no interaction values")
    a, b = pair
    ia, ib = cube.index(a), cube.index(b)
    ea, eb = np.asarray(grid_a, float), np.asarray(grid_b, float)
    xa, xb = cube.X[:, ia], cube.X[:, ib]
    joint = cube.phi[:, ia] + cube.phi[:, ib] + 2.0 * cube.interactions[:, ia, ib]

    def locate(x, edges):
        k = np.searchsorted(edges, x, side="right") - 1
        k[x == edges[-1]] = len(edges) - 2
        k[(x < edges[0]) | (x > edges[-1])] = -1
        return k

    ka, kb = locate(xa, ea), locate(xb, eb)
    rows = []
    for i in range(len(ea) - 1):
        for j in range(len(eb) - 1):
            m = (ka == i) & (kb == j)
            cnt = int(m.sum())
            rows.append({f"{a}_lo": ea[i], f"{a}_hi": ea[i + 1], f"{b}_lo": eb[j], f"{b}_hi": eb[j + 1],
                         "value": float(joint[m].mean()) if cnt else np.nan, "count": cnt,
                         "missing": cnt == 0})
    return pd.DataFrame(rows)
