"""Fixed-effects linear estimators.

All objectives use the residual sum of squares (not the mean) with penalties
on slopes only. Country intercepts are profiled out by (weighted) within
demeaning, which is exact because they are unpenalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .base import ConvergenceError, Fingerprint, FittedModel, RankDeficiencyError
from .design import DesignMatrix

logger = logging.getLogger(__name__)


@dataclass
class LinearProjection:
    """Column projection applied before the linear stage (PCR / factor scores)."""

    center: np.ndarray
    loadings: np.ndarray
    scale: np.ndarray
    dummy_codes: tuple[str, ...] = ()

    def apply(self, d: DesignMatrix) -> np.ndarray:
        Z = d.X
        if self.dummy_codes:
            Z = np.hstack([Z, d.dummies(self.dummy_codes)])
        return (Z - self.center) @ self.loadings / self.scale


@dataclass
class LinearFEModel(FittedModel):
    family: str
    coef: np.ndarray
    intercepts: dict[str, float]
    fingerprint: Fingerprint
    projection: LinearProjection | None = None
    info: dict = field(default_factory=dict)

    @property
    def default_intercept(self) -> float:
        return float(np.mean(list(self.intercepts.values())))

    def predict(self, d: DesignMatrix) -> np.ndarray:
        self.check_schema(d)
        Z = d.X if self.projection is None else self.projection.apply(d)
        unseen = sorted({c for c in d.countries if c not in self.intercepts})
        if unseen:
            logger.warning("no fixed effect for %s; using mean intercept", unseen)
        a0 = self.default_intercept
        alpha = np.array([self.intercepts.get(c, a0) for c in d.countries], dtype=float)
        return alpha + Z @ self.coef


# ----------------------------------------------------------------------------
# helpers


def _groups(countries) -> tuple[np.ndarray, list[str]]:
    codes = sorted(set(countries))
    lookup = {c: i for i, c in enumerate(codes)}
    return np.array([lookup[c] for c in countries], dtype=np.int64), codes


def within(Z: np.ndarray, y: np.ndarray, g: np.ndarray, w: np.ndarray | None = None):
    """Weighted within-group demeaning. Returns ``(Zt, yt, zbar, ybar)``."""
    G = int(g.max()) + 1 if len(g) else 0
    w = np.ones(len(y)) if w is None else w
    sw = np.bincount(g, weights=w, minlength=G)
    ybar = np.bincount(g, weights=w * y, minlength=G) / sw
    if Z.shape[1]:
        zbar = np.column_stack([np.bincount(g, weights=w * Z[:, j], minlength=G) for j in range(Z.shape[1])])
        zbar = zbar / sw[:, None]
    else:
        zbar = np.zeros((G, 0))
    return Z - zbar[g], y - ybar[g], zbar, ybar


def _intercepts(codes, zbar, ybar, coef) -> dict[str, float]:
    alpha = ybar - zbar @ coef
    return {c: float(a) for c, a in zip(codes, alpha)}


def _check_rank(Zt: np.ndarray, names) -> None:
    if Zt.shape[1] == 0:
        return
    _, R, piv = scipy.linalg.qr(Zt, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(Zt.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 0.0)
    rank = int((diag > max(tol, 1e-10)).sum())
    if rank < Zt.shape[1]:
        bad = [names[j] for j in sorted(piv[rank:])]
        raise RankDeficiencyError(f"design is rank deficient after within demeaning; collinear columns: {bad}",
                                  bad)


def _ols_core(Z, y, countries, names, check_rank=True):
    g, codes = _groups(countries)
    Zt, yt, zbar, ybar = within(Z, y, g)
    if check_rank:
        _check_rank(Zt, names)
    coef = np.linalg.lstsq(Zt, yt, rcond=None)[0] if Z.shape[1] else np.zeros(0)
    return coef, _intercepts(codes, zbar, ybar, coef)


def _ridge_core(Z, y, countries, lam):
    g, codes = _groups(countries)
    Zt, yt, zbar, ybar = within(Z, y, g)
    p = Z.shape[1]
    coef = np.linalg.solve(Zt.T @ Zt + lam * np.eye(p), Zt.T @ yt) if p else np.zeros(0)
    return coef, _intercepts(codes, zbar, ybar, coef)


# ----------------------------------------------------------------------------
# estimators


def fit_ols_fe(d: DesignMatrix, seed: int = 0) -> LinearFEModel:
    """Pooled OLS with country intercepts and common slopes."""
    coef, alpha = _ols_core(d.X, d.y, d.countries, d.feature_names)
    return LinearFEModel("OLS_FE", coef, alpha, Fingerprint.of(d, seed))


def fit_ridge(d: DesignMatrix, lam: float, seed: int = 0) -> LinearFEModel:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    coef, alpha = _ridge_core(d.X, d.y, d.countries, lam)
    return LinearFEModel("Ridge", coef, alpha, Fingerprint.of(d, seed), info={"lambda": lam})


@numba.njit(cache=True)
def _cd_gram(G, c, l1, l2, theta, tol, max_sweeps):
    """Coordinate descent on ``t'Gt - 2c't + l1|t|_1 + l2|t|^2``."""
    p = theta.shape[0]
    last = np.inf
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(p):
            if G[j, j] <= 0.0:
                if theta[j] != 0.0:
                    max_change = max(max_change, abs(theta[j]))
                theta[j] = 0.0
                continue
            rho = c[j]
            for k in range(p):
                if k != j:
                    rho -= G[j, k] * theta[k]
            half = 0.5 * l1
            if rho > half:
                new = (rho - half) / (G[j, j] + l2)
            elif rho < -half:
                new = (rho + half) / (G[j, j] + l2)
            else:
                new = 0.0
            change = abs(new - theta[j])
            if change > max_change:
                max_change = change
            theta[j] = new
        last = max_change
        if max_change < tol:
            return sweep + 1, max_change
    return -1, last


def _elastic_core(Z, y, countries, l1, l2, tol=1e-8, max_sweeps=10_000, w=None, theta0=None):
    g, codes = _groups(countries)
    Zt, yt, zbar, ybar = within(Z, y, g, w)
    p = Z.shape[1]
    if w is None:
        G, c = Zt.T @ Zt, Zt.T @ yt
    else:
        G, c = (Zt * w[:, None]).T @ Zt, (Zt * w[:, None]).T @ yt
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)
    if p:
        sweeps, gap = _cd_gram(np.ascontiguousarray(G), c, float(l1), float(l2), theta, tol, max_sweeps)
        if sweeps < 0:
            raise ConvergenceError(f"coordinate descent did not converge in {max_sweeps} sweeps",
                                   iterate=theta.copy(), gap=gap)
    return theta, _intercepts(codes, zbar, ybar, theta)


def fit_lasso(d: DesignMatrix, lam: float, seed: int = 0, tol: float = 1e-8,
              max_sweeps: int = 10_000) -> LinearFEModel:
    """``min RSS + lam * |theta|_1`` by cyclic coordinate descent."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    coef, alpha = _elastic_core(d.X, d.y, d.countries, lam, 0.0, tol, max_sweeps)
    return LinearFEModel("Lasso", coef, alpha, Fingerprint.of(d, seed), info={"lambda": lam})


def fit_elastic_net(d: DesignMatrix, lam: float, rho: float, seed: int = 0, tol: float = 1e-8,
                    max_sweeps: int = 10_000) -> LinearFEModel:
    """``min RSS + lam * (rho |theta|_1 + (1 - rho) |theta|_2^2)``."""
    if lam < 0 or not 0.0 <= rho <= 1.0:
        raise ValueError("need lam >= 0 and rho in [0, 1]")
    coef, alpha = _elastic_core(d.X, d.y, d.countries, lam * rho, lam * (1.0 - rho), tol, max_sweeps)
    return LinearFEModel("ElasticNet", coef, alpha, Fingerprint.of(d, seed), info={"lambda": lam, "rho": rho})


def kkt_residual(d: DesignMatrix, model: LinearFEModel, l1: float, l2: float = 0.0) -> float:
    """Largest violation of the lasso/elastic-net optimality conditions."""
    g, _ = _groups(d.countries)
    Zt, yt, _, _ = within(d.X, d.y, g)
    theta = model.coef
    grad = 2.0 * Zt.T @ (yt - Zt @ theta) - 2.0 * l2 * theta
    worst = 0.0
    for j, t in enumerate(theta):
        if t != 0.0:
            worst = max(worst, abs(grad[j] - l1 * np.sign(t)))
        else:
            worst = max(worst, abs(grad[j]) - l1)
    return float(worst)


def smoothed_pinball(u: np.ndarray, tau: float, eps: float) -> np.ndarray:
    a = np.abs(u)
    huber = np.where(a <= eps, u * u / (2.0 * eps), a - 0.5 * eps)
    return 0.5 * huber + (tau - 0.5) * u


def pinball(u: np.ndarray, tau: float) -> np.ndarray:
    return u * (tau - (u < 0))


def fit_quantile(d: DesignMatrix, tau: float = 0.5, lam: float = 0.019, seed: int = 0, eps: float = 1e-6,
                 tol: float = 1e-9, window: int = 50, max_iter: int = 20_000) -> LinearFEModel:
    """L1-penalised fixed-effects quantile regression.

    The pinball loss is Huberised at width ``eps`` and minimised by
    majorise-minimise steps; each step is a weighted lasso solved by
    coordinate descent, so the L1 term is handled by exact soft-thresholding.
    Stops once the objective improves by less than ``tol`` (relative) over
    ``window`` iterations.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    X, y, countries = d.X, d.y, d.countries
    g, codes = _groups(countries)
    theta = np.zeros(X.shape[1])
    alpha = np.array([np.median(y[g == k]) for k in range(len(codes))])
    history = []
    for it in range(max_iter):
        r = y - alpha[g] - X @ theta
        obj = float(smoothed_pinball(r, tau, eps).sum() + lam * np.abs(theta).sum())
        history.append(obj)
        if it >= window and history[it - window] - obj < tol * max(1.0, abs(obj)):
            break
        m = np.maximum(np.abs(r), eps)
        w = 1.0 / (4.0 * m)
        ytil = y + 2.0 * m * (tau - 0.5)
        theta, alpha_map = _elastic_core(X, ytil, countries, lam, 0.0, tol=1e-12, max_sweeps=100_000, w=w,
                                         theta0=theta)
        alpha = np.array([alpha_map[c] for c in codes])
    else:
        gap = history[-window - 1] - history[-1] if len(history) > window else float("nan")
        raise ConvergenceError("quantile MM did not converge", iterate=theta.copy(), gap=gap)
    intercepts = {c: float(a) for c, a in zip(codes, alpha)}
    return LinearFEModel("QuantileReg", theta, intercepts, Fingerprint.of(d, seed),
                         info={"tau": tau, "lambda": lam, "iterations": it, "objective": history[-1]})


def _principal(d: DesignMatrix, include_dummies: bool):
    codes = tuple(sorted(set(d.countries))) if include_dummies else ()
    Z = np.hstack([d.X, d.dummies(codes)]) if include_dummies else d.X
    center = Z.mean(axis=0)
    Zc = Z - center
    _, S, Vt = np.linalg.svd(Zc, full_matrices=False)
    tol = max(Zc.shape) * np.finfo(float).eps * (S[0] if len(S) else 0.0)
    rank = int((S > max(tol, 1e-10)).sum())
    return Zc, center, S, Vt, rank, codes


def fit_pcr(d: DesignMatrix, K: int, include_dummies: bool = True, seed: int = 0) -> LinearFEModel:
    """Principal-components regression with country fixed effects.

    PCA runs on the centred regressors, by default augmented with the country
    dummy block; the top ``K`` scores enter a fixed-effects OLS.
    """
    Zc, center, S, Vt, rank, codes = _principal(d, include_dummies)
    if K < 1 or K > rank:
        raise RankDeficiencyError(f"K={K} outside [1, rank={rank}]")
    V = Vt[:K].T
    proj = LinearProjection(center, V, np.ones(K), codes)
    T = Zc @ V
    # score directions inside the dummy span are absorbed by the fixed effects;
    # the minimum-norm solution keeps predictions unique
    coef, alpha = _ols_core(T, d.y, d.countries, [f"pc{k}" for k in range(K)], check_rank=False)
    return LinearFEModel("PCR", coef, alpha, Fingerprint.of(d, seed), projection=proj,
                         info={"K": K, "rank": rank})


def fit_factor_ridge(d: DesignMatrix, n_factors: int, lam: float, include_dummies: bool = True,
                     seed: int = 0) -> LinearFEModel:
    """Ridge with fixed effects on PCA-whitened factor scores."""
    Zc, center, S, Vt, rank, codes = _principal(d, include_dummies)
    if n_factors < 1 or n_factors > rank:
        raise RankDeficiencyError(f"n_factors={n_factors} outside [1, rank={rank}]")
    V = Vt[:n_factors].T
    scale = S[:n_factors] / np.sqrt(max(d.n - 1, 1))
    proj = LinearProjection(center, V, scale, codes)
    coef, alpha = _ridge_core(Zc @ V / scale, d.y, d.countries, lam)
    return LinearFEModel("FactorRidge", coef, alpha, Fingerprint.of(d, seed), projection=proj,
                         info={"n_factors": n_factors, "lambda": lam, "rank": rank})


def design_rank(d: DesignMatrix, include_dummies: bool = True) -> int:
    return _principal(d, include_dummies)[4]
