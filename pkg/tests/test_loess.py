import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sovrisk.attribution import loess


def wls_oracle(x, y, x0, frac, robust_iters):
    """Dense re-derivation: explicit design matrices and lstsq at every point."""
    n = len(x)
    q = math.ceil(frac * n)

    def local(rw, at):
        d = np.abs(x - at)
        h = np.sort(d)[q - 1]
        w = np.where(d <= h, (1 - np.clip(d / h, 0, 1) ** 3) ** 3, 0.0) * rw
        Z = np.column_stack([np.ones(n), x - at]) * np.sqrt(w)[:, None]
        beta = np.linalg.lstsq(Z, y * np.sqrt(w), rcond=None)[0]
        return beta[0]

    rw = np.ones(n)
    for _ in range(robust_iters):
        r = y - np.array([local(rw, xi) for xi in x])
        u = r / (6 * np.median(np.abs(r)))
        rw = np.where(np.abs(u) < 1, (1 - u**2) ** 2, 0.0)
    return np.array([local(rw, a) for a in x0])


def test_linear_data_reproduced(rng):
    x = rng.uniform(-3, 3, 200)
    fit = loess(x, 2.5 * x - 1.0, clip=None)
    assert np.max(np.abs(fit.fit - (2.5 * fit.grid - 1.0))) < 1e-8


def test_constant_curve(rng):
    fit = loess(rng.normal(size=100), np.full(100, 3.0))
    assert np.allclose(fit.fit, 3.0, atol=1e-12)


def test_noisy_sine_matches_dense_oracle(rng):
    x = np.sort(rng.uniform(0, 6, 300))
    y = np.sin(x) + 0.3 * rng.standard_normal(300)
    grid = np.linspace(0.5, 5.5, 10)
    fit = loess(x, y, grid=grid, clip=None)
    assert np.max(np.abs(fit.fit - wls_oracle(x, y, grid, 0.4, 1))) < 1e-8


def test_clip_drops_tails(rng):
    x = rng.normal(size=1000)
    y = x.copy()
    y[0] = 1e6
    fit = loess(x, y)
    assert fit.n_used < 1000
    lo, hi = np.percentile(x, [5, 95])
    assert lo <= fit.bounds[0] and fit.bounds[1] <= hi
    assert np.max(np.abs(fit.fit - fit.grid)) < 1e-8


def test_degenerate_neighbourhood_falls_back_to_mean():
    x = np.r_[np.zeros(20), np.ones(2)]
    y = np.r_[np.arange(20.0), 100.0, 100.0]
    fit = loess(x, y, frac=0.4, robust_iters=0, grid=[0.0], clip=None)
    assert fit.fit[0] == pytest.approx(np.arange(20.0)[:9].mean())


def test_input_validation():
    with pytest.raises(ValueError):
        loess(np.arange(4.0), np.arange(4.0), clip=None)
    with pytest.raises(ValueError):
        loess(np.arange(10.0), np.arange(10.0), frac=0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_order_invariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=60)
    y = np.cos(x) + rng.normal(size=60) * 0.2
    p = rng.permutation(60)
    a = loess(x, y)
    b = loess(x[p], y[p])
    assert np.array_equal(a.fit, b.fit)
