"""Rolling cross-country connectedness of attribution series.

For each window centre: build an adaptive-width standardized block of
country series, fit a VAR with AIC lag choice, take the generalised forecast
error variance decomposition and summarise it as a total spillover index;
a thresholded Spearman density is computed on the same block.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .panel import coverage, interpolate_short_gaps

logger = logging.getLogger(__name__)


class VarError(ValueError):
    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(message)


@dataclass(frozen=True)
class WindowPlan:
    start: str = "2021-01-01"
    end: str | None = None
    step_days: int = 7
    centers: tuple | None = None
    probe_half_width: int = 180
    coverage_threshold: float = 0.70
    h_bounds: tuple[int, int] = (60, 180)
    target_lag: int = 3
    n_max: int = 10
    max_gap: int = 7
    sd_floor: float = 1e-10
    p_max: int = 4
    H: int = 10
    tau: float = 0.40

    def __post_init__(self):
        if not 0.0 < self.coverage_threshold <= 1.0:
            raise ValueError("coverage threshold must lie in (0, 1]")
        lo, hi = self.h_bounds
        if not 1 <= lo <= hi:
            raise ValueError("h bounds must satisfy 1 <= low <= high")
        if self.n_max < 2 or self.p_max < 1 or self.H < 1 or self.step_days < 1:
            raise ValueError("n_max >= 2, p_max >= 1, H >= 1 and step_days >= 1 required")

    def center_dates(self, last: pd.Timestamp | None = None) -> list[pd.Timestamp]:
        if self.centers is not None:
            return [pd.Timestamp(c) for c in self.centers]
        end = pd.Timestamp(self.end) if self.end is not None else last
        if end is None:
            raise ValueError("plan has no end date and no data to infer one")
        return list(pd.date_range(pd.Timestamp(self.start), end, freq=f"{self.step_days}D"))


def half_width(k_eff: int, plan: WindowPlan) -> int:
    """Window length ``T = 6 k_eff p``; half-width ``T/2`` clipped to the bounds."""
    T = 6 * k_eff * plan.target_lag
    lo, hi = plan.h_bounds
    return int(min(max(T // 2, lo), hi))


@dataclass
class Window:
    center: pd.Timestamp
    k_eff: int
    h: int
    block: pd.DataFrame | None
    coverage: dict
    skip_reason: str | None = None

    @property
    def countries(self) -> list[str]:
        return [] if self.block is None else list(self.block.columns)


def build_window(series: Mapping[str, pd.Series], center, plan: WindowPlan = WindowPlan()) -> Window:
    """Cleaned, z-standardized ``T x k`` block around ``center``.

    Countries are screened for coverage on a wide probe window to set the
    effective dimension, then re-screened inside the final window after
    short-gap interpolation. Near-constant series are dropped and at most
    ``n_max`` countries kept (coverage desc, variance desc, code asc).
    """
    center = pd.Timestamp(center)
    probe = {c: coverage(s.dropna(), center, plan.probe_half_width) for c, s in series.items()}
    k_eff = sum(v >= plan.coverage_threshold for v in probe.values())
    h = half_width(k_eff, plan)
    lo, hi = center - pd.Timedelta(days=h), center + pd.Timedelta(days=h)
    grid = pd.date_range(lo, hi, freq="D")
    kept = []
    cov = {}
    for c in sorted(series):
        s = series[c].dropna()
        s = s[(s.index >= lo) & (s.index <= hi)]
        s = interpolate_short_gaps(s, plan.max_gap) if len(s) >= 2 else s
        cov[c] = len(s) / len(grid)
        if cov[c] < plan.coverage_threshold:
            continue
        sd = float(s.std(ddof=1)) if len(s) >= 2 else 0.0
        if not sd >= plan.sd_floor:
            continue
        kept.append((c, cov[c], sd * sd, s))
    kept.sort(key=lambda t: (-t[1], -t[2], t[0]))
    kept = kept[:plan.n_max]
    if len(kept) < 2:
        return Window(center, k_eff, h, None, cov, "too_few_series")
    kept.sort(key=lambda t: t[0])
    cols = {}
    for c, _, var, s in kept:
        cols[c] = (s - s.mean()) / math.sqrt(var)
    block = pd.DataFrame(cols).reindex(grid)
    return Window(center, k_eff, h, block, cov)


# ----------------------------------------------------------------------------
# VAR


@dataclass
class VarModel:
    k: int
    p: int
    A: list[np.ndarray]
    sigma: np.ndarray
    intercept: np.ndarray
    n_obs: int
    aic: dict = field(default_factory=dict)

    @property
    def ridge(self) -> float:
        return 1e-8 * float(np.trace(self.sigma)) / self.k

    @property
    def sigma_ridge(self) -> np.ndarray:
        return self.sigma + self.ridge * np.eye(self.k)

    def spectral_radius(self) -> float:
        k, p = self.k, self.p
        comp = np.zeros((k * p, k * p))
        comp[:k] = np.hstack(self.A)
        if p > 1:
            comp[k:, :-k] = np.eye(k * (p - 1))
        return float(np.max(np.abs(np.linalg.eigvals(comp))))


def _lagged(Y: np.ndarray, p: int, rows: np.ndarray):
    Z = np.hstack([np.ones((len(rows), 1))] + [Y[rows - j] for j in range(1, p + 1)])
    return Z, Y[rows]


def _valid_rows(Y: np.ndarray, p: int) -> np.ndarray:
    ok = np.all(np.isfinite(Y), axis=1)
    good = np.zeros(len(Y), dtype=bool)
    for t in range(p, len(Y)):
        good[t] = ok[t - p:t + 1].all()
    return np.flatnonzero(good)


def _ols(Z, Y):
    G = Z.T @ Z
    if np.linalg.cond(G) > 1e12:
        raise VarError("singular", "regressor cross-product is singular")
    B = np.linalg.solve(G, Z.T @ Y)
    return B, Y - Z @ B


def fit_var(block, p_max: int = 4) -> VarModel:
    """Least-squares VAR with intercept; lag order by AIC over ``1..p_max``.

    AIC uses the maximum-likelihood residual covariance on the common sample
    valid for ``p_max`` lags; ties go to the smaller order. The chosen order
    is refitted on every row valid for it and the innovation covariance is
    the degrees-of-freedom corrected residual covariance.
    """
    Y = np.asarray(block, dtype=float)
    T, k = Y.shape
    common = _valid_rows(Y, p_max)
    if len(common) <= k * p_max + 1:
        raise VarError("short_sample", f"{len(common)} usable rows for k={k}, p_max={p_max}")
    aic = {}
    best = None
    for p in range(1, p_max + 1):
        Z, Yt = _lagged(Y, p, common)
        _, U = _ols(Z, Yt)
        S = U.T @ U / len(common)
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            raise VarError("singular", "residual covariance is not positive definite")
        aic[p] = float(logdet + 2.0 * (k * k * p + k) / len(common))
        if best is None or aic[p] < aic[best]:
            best = p
    rows = _valid_rows(Y, best)
    Z, Yt = _lagged(Y, best, rows)
    B, U = _ols(Z, Yt)
    dof = len(rows) - k * best - 1
    sigma = U.T @ U / dof
    A = [B[1 + j * k:1 + (j + 1) * k].T.copy() for j in range(best)]
    return VarModel(k, best, A, sigma, B[0].copy(), len(rows), aic)


def ma_coefficients(A: Sequence[np.ndarray], H: int) -> np.ndarray:
    """``Psi_0 = I``, ``Psi_l = sum_j A_j Psi_{l-j}``; shape (H, k, k)."""
    k = A[0].shape[0]
    psi = np.zeros((H, k, k))
    psi[0] = np.eye(k)
    for ell in range(1, H):
        for j in range(1, min(ell, len(A)) + 1):
            psi[ell] += A[j - 1] @ psi[ell - j]
    return psi


def gfevd_from(A, sigma, H: int = 10, ridge: bool = True, normalize_shocks: bool = False) -> np.ndarray:
    """Row-normalised generalised FEVD from lag matrices and an innovation covariance.

    By default the numerator is ``(e_i' Psi_l S e_j)^2`` without the
    ``1/s_jj`` shock scaling; ``normalize_shocks`` adds it.
    """
    A = [np.asarray(a, dtype=float) for a in A]
    S = np.array(sigma, dtype=float)
    k = S.shape[0]
    if ridge:
        S = S + 1e-8 * np.trace(S) / k * np.eye(k)
    psi = ma_coefficients(A, H)
    if not np.all(np.isfinite(psi)):
        raise VarError("non_finite", "moving-average coefficients are not finite")
    PS = psi @ S
    num = (PS**2).sum(axis=0)
    if normalize_shocks:
        num = num / np.diag(S)[None, :]
    den = np.einsum("lia,ab,lib->i", psi, S, psi)
    theta = num / den[:, None]
    return theta / theta.sum(axis=1, keepdims=True)


def gfevd(m: VarModel, H: int = 10, normalize_shocks: bool = False) -> np.ndarray:
    if m.spectral_radius() >= 1.0:
        logger.warning("explosive VAR (spectral radius %.3f); using the finite-horizon decomposition",
                       m.spectral_radius())
    return gfevd_from(m.A, m.sigma, H, ridge=True, normalize_shocks=normalize_shocks)


def dy_index(theta: np.ndarray) -> float:
    """Total spillover: ``100 * sum_{i != j} theta_ij / k``."""
    theta = np.asarray(theta, dtype=float)
    k = theta.shape[0]
    return float(100.0 * (theta.sum() - np.trace(theta)) / k)


def density_from_corr(R, tau: float = 0.40) -> float:
    R = np.asarray(R, dtype=float)
    k = R.shape[0]
    if k < 2:
        raise ValueError("density needs at least two series")
    iu = np.triu_indices(k, 1)
    a = np.abs(R[iu])
    return float(100.0 * np.sum(np.where(a >= tau, a, 0.0)) / (k * (k - 1) / 2))


def density(block, tau: float = 0.40) -> float:
    """Thresholded mean absolute Spearman correlation, in ``[0, 100]``."""
    df = pd.DataFrame(block)
    return density_from_corr(df.corr(method="spearman").to_numpy(), tau)


# ----------------------------------------------------------------------------
# rolling driver

COLUMNS = ["feature", "center", "k_eff", "h", "p", "H", "S_dy", "density", "countries", "skip_reason",
           "explosive"]


@dataclass
class SpilloverSeries:
    table: pd.DataFrame
    thetas: dict = field(default_factory=dict)

    @property
    def results(self) -> pd.DataFrame:
        return self.table[self.table["skip_reason"].isna()].reset_index(drop=True)

    def to_csv(self, path) -> None:
        self.table.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def connectedness_window(series: Mapping[str, pd.Series], center, plan: WindowPlan, feature: str = ""):
    """One row of the rolling output plus the decomposition matrix (or None)."""
    w = build_window(series, center, plan)
    row = {"feature": feature, "center": w.center.strftime("%Y-%m-%d"), "k_eff": w.k_eff, "h": w.h,
           "p": np.nan, "H": plan.H, "S_dy": np.nan, "density": np.nan,
           "countries": ";".join(w.countries), "skip_reason": w.skip_reason, "explosive": False}
    if w.block is None:
        return row, None
    try:
        m = fit_var(w.block.to_numpy(), plan.p_max)
        theta = gfevd(m, plan.H)
    except VarError as exc:
        row["skip_reason"] = exc.reason
        return row, None
    row["p"] = m.p
    row["S_dy"] = dy_index(theta)
    row["density"] = density(w.block, plan.tau)
    row["explosive"] = m.spectral_radius() >= 1.0
    return row, theta


def rolling_connectedness(source, features: Sequence[str], plan: WindowPlan = WindowPlan(),
                          jobs: int = 1) -> SpilloverSeries:
    """Spillover and density indices for every (feature, centre).

    ``source`` is an attribution cube or a mapping ``feature -> {country:
    series}``. Windows that cannot be computed keep a row with a reason code.
    """
    if hasattr(source, "series"):
        by_feature = {f: source.series(f) for f in features}
    else:
        by_feature = {f: source[f] for f in features}
    tasks = []
    for f in features:
        ser = by_feature[f]
        last = max((s.index.max() for s in ser.values() if len(s)), default=None)
        for c in plan.center_dates(last):
            tasks.append((f, c))

    def run(task):
        f, c = task
        return task, connectedness_window(by_feature[f], c, plan, f)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(run, tasks))
    else:
        out = [run(t) for t in tasks]
    out.sort(key=lambda t: (t[0][0], t[0][1]))
    rows = [r for _, (r, _) in out]
    thetas = {(r["feature"], r["center"]): th for _, (r, th) in out if th is not None}
    table = pd.DataFrame(rows, columns=COLUMNS)
    return SpilloverSeries(table, thetas)
