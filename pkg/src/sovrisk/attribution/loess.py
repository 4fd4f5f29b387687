"""Robust locally weighted linear regression (LOESS)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class LoessFit:
    grid: np.ndarray
    fit: np.ndarray
    frac: float
    robust_iters: int
    clip: tuple[float, float] | None
    bounds: tuple[float, float]
    n_used: int
    params: dict = field(default_factory=dict)


def _tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def _local_fit(x, y, w_robust, x0, q):
    """Weighted local-linear value at ``x0`` over the ``q`` nearest points."""
    dist = np.abs(x - x0)
    idx = np.argsort(dist, kind="stable")[:q]
    h = dist[idx[-1]]
    w = _tricube(dist[idx] / h) if h > 0 else np.ones(q)
    w = w * w_robust[idx]
    sw = w.sum()
    if sw <= 0:
        w = w_robust[idx] if w_robust[idx].sum() > 0 else np.ones(q)
        sw = w.sum()
    xs, ys = x[idx], y[idx]
    xbar = np.dot(w, xs) / sw
    ybar = np.dot(w, ys) / sw
    sxx = np.dot(w, (xs - xbar) ** 2)
    scale = max(1.0, float(np.max(np.abs(xs - xbar))) if len(xs) else 1.0)
    if sxx <= 1e-12 * sw * scale * scale:
        return ybar
    slope = np.dot(w, (xs - xbar) * (ys - ybar)) / sxx
    return ybar + slope * (x0 - xbar)


def loess(x, y, frac: float = 0.4, robust_iters: int = 1, grid=None, n_grid: int = 50,
          clip: tuple[float, float] | None = (5.0, 95.0)) -> LoessFit:
    """Fit a LOESS curve.

    Each evaluation uses a tricube-weighted local linear fit over the nearest
    ``ceil(frac * n)`` points; every robustness pass reweights points with a
    bisquare of residuals scaled by six median absolute residuals. With
    ``clip`` the points outside the given percentile band on either axis are
    dropped first and the default grid spans the retained ``x`` range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must lie in (0, 1]")
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if clip is not None:
        lo, hi = clip
        xl, xh = np.percentile(x, [lo, hi]) if len(x) else (np.nan, np.nan)
        yl, yh = np.percentile(y, [lo, hi]) if len(y) else (np.nan, np.nan)
        keep = (x >= xl) & (x <= xh) & (y >= yl) & (y <= yh)
        x, y = x[keep], y[keep]
    if len(x) < 5:
        raise ValueError("LOESS needs at least 5 points")
    order = np.lexsort((y, x))
    x, y = x[order], y[order]
    n = len(x)
    q = min(n, max(2, math.ceil(frac * n)))
    bounds = (float(x[0]), float(x[-1]))
    g = np.linspace(bounds[0], bounds[1], n_grid) if grid is None else np.asarray(grid, dtype=float)

    rw = np.ones(n)
    for _ in range(robust_iters):
        fitted = np.array([_local_fit(x, y, rw, xi, q) for xi in x])
        resid = y - fitted
        s = np.median(np.abs(resid))
        if s <= 0:
            rw = np.ones(n)
            continue
        u = resid / (6.0 * s)
        rw = np.where(np.abs(u) < 1.0, (1.0 - u**2) ** 2, 0.0)
    fit = np.array([_local_fit(x, y, rw, g0, q) for g0 in g])
    return LoessFit(g, fit, frac, robust_iters, clip, bounds, n, {"neighbours": q})
