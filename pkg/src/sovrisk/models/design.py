"""Design matrices: feature rows per (country, date) with the next-day target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..panel import MARKET_VARIABLES, NEWS_VARIABLES, Panel

INFOSETS = ("MarketsOnly", "MarketsPlusNews")


def infoset_features(infoset: str) -> tuple[str, ...]:
    if infoset == "MarketsOnly":
        return MARKET_VARIABLES
    if infoset == "MarketsPlusNews":
        return MARKET_VARIABLES + NEWS_VARIABLES
    raise ValueError(f"unknown information set {infoset!r}")


@dataclass(frozen=True)
class DesignMatrix:
    """Rows of a pooled panel regression.

    ``dates`` are feature dates, ``target_dates`` the dates of ``y``. The
    country universe ``country_codes`` fixes the integer coding used by tree
    models and the dummy block used by linear models.
    """

    X: np.ndarray
    y: np.ndarray | None
    feature_names: tuple[str, ...]
    countries: np.ndarray
    dates: np.ndarray
    target_dates: np.ndarray
    country_codes: tuple[str, ...]

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError("X shape does not match feature names")
        for name in ("countries", "dates", "target_dates"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from X rows")
        if self.y is not None and len(self.y) != n:
            raise ValueError("y length differs from X rows")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("design matrix has missing or non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, mask) -> "DesignMatrix":
        mask = np.asarray(mask)
        return DesignMatrix(self.X[mask], None if self.y is None else self.y[mask], self.feature_names,
                            self.countries[mask], self.dates[mask], self.target_dates[mask],
                            self.country_codes)

    def country_index(self) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.country_codes)}
        try:
            return np.array([lookup[c] for c in self.countries], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"country {exc.args[0]} not in design universe") from None

    def dummies(self, codes=None) -> np.ndarray:
        """One-hot country block over ``codes`` (default: the universe)."""
        codes = list(self.country_codes if codes is None else codes)
        lookup = {c: i for i, c in enumerate(codes)}
        D = np.zeros((self.n, len(codes)))
        for r, c in enumerate(self.countries):
            j = lookup.get(c)
            if j is not None:
                D[r, j] = 1.0
        return D

    def keys(self) -> list[tuple[str, str]]:
        return [(c, str(d)) for c, d in zip(self.countries, self.dates.astype("datetime64[D]"))]


def build_design(panel: Panel, infoset: str = "MarketsPlusNews", horizon: int = 1,
                 features: tuple[str, ...] | None = None) -> DesignMatrix:
    """Stack complete rows ``(X_{i,t}, y_{i,t+horizon})`` across countries.

    ``horizon=0`` gives the contemporaneous specification used for
    attribution. Rows with any missing feature or target are dropped.
    """
    feats = tuple(features) if features is not None else infoset_features(infoset)
    codes = tuple(panel.country_codes)
    parts = []
    for c in codes:
        if not all(panel.has(c, v) for v in feats):
            continue
        cols = {v: panel.get(c, v) for v in feats}
        frame = pd.DataFrame(cols).dropna()
        cds = panel.get(c, "CDS")
        target = cds.copy()
        target.index = target.index - pd.Timedelta(days=horizon)
        frame = frame.join(target.rename("__y__"), how="inner")
        if frame.empty:
            continue
        frame["__country__"] = c
        parts.append(frame)
    if not parts:
        return DesignMatrix(np.zeros((0, len(feats))), np.zeros(0), feats, np.array([], dtype=object),
                            np.array([], dtype="datetime64[D]"), np.array([], dtype="datetime64[D]"), codes)
    df = pd.concat(parts)
    dates = df.index.to_numpy().astype("datetime64[D]")
    return DesignMatrix(
        X=df[list(feats)].to_numpy(dtype=float),
        y=df["__y__"].to_numpy(dtype=float),
        feature_names=feats,
        countries=df["__country__"].to_numpy(dtype=object),
        dates=dates,
        target_dates=dates + np.timedelta64(horizon, "D"),
        country_codes=codes,
    )


def from_arrays(X, y, countries, dates=None, feature_names=None, horizon: int = 1,
                country_codes=None) -> DesignMatrix:
    """Convenience constructor for tests and synthetic instances."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    countries = np.asarray(countries, dtype=object)
    if dates is None:
        dates = np.datetime64("2020-01-01") + np.arange(n).astype("timedelta64[D]")
    dates = np.asarray(dates).astype("datetime64[D]")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    codes = tuple(country_codes) if country_codes is not None else tuple(sorted(set(countries)))
    return DesignMatrix(X, None if y is None else np.asarray(y, dtype=float), names, countries, dates,
                        dates + np.timedelta64(horizon, "D"), codes)
