import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sovrisk.models import (RankDeficiencyError, fit_elastic_net, fit_factor_ridge, fit_lasso, fit_ols_fe,
                            fit_pcr, fit_quantile, fit_ridge, from_arrays, kkt_residual)
from sovrisk.models.linear import design_rank, pinball


def panel_instance(rng, n_countries=4, n_per=60, M=3, noise=0.0, theta=None):
    countries = np.repeat([f"C{i}" for i in range(n_countries)], n_per)
    X = rng.normal(size=(len(countries), M))
    theta = rng.normal(size=M) if theta is None else np.asarray(theta)
    alpha = {c: rng.normal() for c in set(countries)}
    y = np.array([alpha[c] for c in countries]) + X @ theta + noise * rng.normal(size=len(countries))
    return from_arrays(X, y, countries), theta, alpha


def dummy_oracle(d):
    codes = sorted(set(d.countries))
    D = np.column_stack([(d.countries == c).astype(float) for c in codes])
    Z = np.hstack([d.X, D])
    beta = np.linalg.solve(Z.T @ Z, Z.T @ d.y)
    return beta[: d.X.shape[1]], dict(zip(codes, beta[d.X.shape[1]:]))


def test_ols_recovers_exact_model(rng):
    d, theta, alpha = panel_instance(rng)
    m = fit_ols_fe(d)
    assert np.allclose(m.coef, theta, atol=1e-8)
    for c, a in alpha.items():
        assert m.intercepts[c] == pytest.approx(a, abs=1e-8)


def test_ols_single_country_is_plain_ols(rng):
    X = rng.normal(size=(50, 2))
    y = 1.5 + X @ [0.3, -0.2] + rng.normal(size=50)
    m = fit_ols_fe(from_arrays(X, y, ["A"] * 50))
    beta, *_ = np.linalg.lstsq(np.column_stack([np.ones(50), X]), y, rcond=None)
    assert m.intercepts["A"] == pytest.approx(beta[0], abs=1e-10)
    assert np.allclose(m.coef, beta[1:], atol=1e-10)


def test_ols_matches_normal_equations(rng):
    d, _, _ = panel_instance(rng, noise=0.5)
    m = fit_ols_fe(d)
    coef, alpha = dummy_oracle(d)
    assert np.allclose(m.coef, coef, atol=1e-10)
    assert all(abs(m.intercepts[c] - a) < 1e-10 for c, a in alpha.items())


def test_ols_names_collinear_columns(rng):
    d, _, _ = panel_instance(rng, M=2)
    X = np.column_stack([d.X, d.X[:, 0] * 2.0])
    with pytest.raises(RankDeficiencyError) as exc:
        fit_ols_fe(from_arrays(X, d.y, d.countries, feature_names=["a", "b", "c"]))
    assert set(exc.value.columns) & {"a", "c"}


def test_country_constant_column_is_collinear_with_fe(rng):
    d, _, _ = panel_instance(rng, M=2)
    level = np.array([float(c[1:]) for c in d.countries])
    with pytest.raises(RankDeficiencyError):
        fit_ols_fe(from_arrays(np.column_stack([d.X, level]), d.y, d.countries))


def test_large_penalty_zeroes_slopes(rng):
    d, _, _ = panel_instance(rng, noise=0.3)
    for m in (fit_lasso(d, 1e9), fit_elastic_net(d, 1e9, 0.5)):
        assert np.all(m.coef == 0.0)
        for c in set(d.countries):
            assert m.intercepts[c] == pytest.approx(d.y[d.countries == c].mean(), abs=1e-12)


def test_zero_penalty_equals_ols(rng):
    d, _, _ = panel_instance(rng, noise=0.3)
    ref = fit_ols_fe(d).coef
    assert np.allclose(fit_lasso(d, 0.0).coef, ref, atol=1e-8)
    assert np.allclose(fit_elastic_net(d, 0.0, 0.3).coef, ref, atol=1e-8)
    assert np.allclose(fit_ridge(d, 0.0).coef, ref, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 50.0), st.floats(0.05, 1.0))
def test_kkt_conditions_hold(seed, lam, rho):
    rng = np.random.default_rng(seed)
    d, _, _ = panel_instance(rng, n_countries=3, n_per=30, M=6, noise=1.0, theta=[1, 0, 0, -0.5, 0, 0.2])
    m = fit_lasso(d, lam)
    assert kkt_residual(d, m, lam) < 1e-6
    e = fit_elastic_net(d, lam, rho)
    assert kkt_residual(d, e, lam * rho, lam * (1 - rho)) < 1e-6


def test_ridge_closed_form(rng):
    d, _, _ = panel_instance(rng, noise=0.5)
    lam = 7.0
    codes = sorted(set(d.countries))
    Zt, yt = d.X.copy(), d.y.copy()
    for c in codes:
        k = d.countries == c
        Zt[k] -= Zt[k].mean(axis=0)
        yt[k] -= yt[k].mean()
    theta = np.linalg.solve(Zt.T @ Zt + lam * np.eye(3), Zt.T @ yt)
    assert np.allclose(fit_ridge(d, lam).coef, theta, atol=1e-10)


def test_quantile_median_and_upper_quantile(rng):
    y = rng.normal(size=101)
    X = np.zeros((101, 0))
    m = fit_quantile(from_arrays(X, y, ["A"] * 101, feature_names=[]), tau=0.5, lam=0.0)
    assert m.intercepts["A"] == pytest.approx(np.median(y), abs=1e-5)
    q = fit_quantile(from_arrays(X, y, ["A"] * 101, feature_names=[]), tau=0.9, lam=0.0).intercepts["A"]
    lo, hi = np.quantile(y, 0.9, method="lower"), np.quantile(y, 0.9, method="higher")
    assert lo - 1e-5 <= q <= hi + 1e-5


def test_quantile_vertex_oracle(rng):
    n, tau, lam = 15, 0.5, 0.3
    x = rng.normal(size=n)
    y = 0.5 + 0.8 * x + rng.standard_t(3, size=n)
    m = fit_quantile(from_arrays(x, y, ["A"] * n), tau=tau, lam=lam)

    def objective(a, b):
        return pinball(y - a - b * x, tau).sum() + lam * abs(b)

    cands = [(y[i] - (y[j] - y[i]) / (x[j] - x[i]) * x[i], (y[j] - y[i]) / (x[j] - x[i]))
             for i, j in itertools.combinations(range(n), 2)]
    cands += [(y[i], 0.0) for i in range(n)]
    best = min(objective(a, b) for a, b in cands)
    assert objective(m.intercepts["A"], m.coef[0]) == pytest.approx(best, abs=1e-4)


def test_pcr_full_rank_equals_ols(rng):
    d, _, _ = panel_instance(rng, noise=0.5)
    K = design_rank(d)
    assert K == 3 + 4 - 1
    assert np.allclose(fit_pcr(d, K).predict(d), fit_ols_fe(d).predict(d), atol=1e-8)
    with pytest.raises(RankDeficiencyError):
        fit_pcr(d, K + 1)


def test_pcr_rank_one_design(rng):
    n = 40
    x = rng.normal(size=n)
    X = np.column_stack([x, 2 * x])
    y = 1 + 3 * x + rng.normal(size=n)
    d = from_arrays(X, y, ["A"] * n)
    ref = fit_ols_fe(from_arrays(x, y, ["A"] * n)).predict(from_arrays(x, y, ["A"] * n))
    assert np.allclose(fit_pcr(d, 1, include_dummies=False).predict(d), ref, atol=1e-8)


def test_factor_ridge_limits_and_oracle(rng):
    d, _, _ = panel_instance(rng, noise=0.5)
    K = design_rank(d)
    assert np.allclose(fit_factor_ridge(d, K, 0.0).predict(d), fit_ols_fe(d).predict(d), atol=1e-8)
    m = fit_factor_ridge(d, 2, 5.0, include_dummies=False)
    S = m.projection.apply(d)
    codes = sorted(set(d.countries))
    St, yt = S.copy(), d.y.copy()
    for c in codes:
        k = d.countries == c
        St[k] -= St[k].mean(axis=0)
        yt[k] -= yt[k].mean()
    theta = np.linalg.solve(St.T @ St + 5.0 * np.eye(2), St.T @ yt)
    assert np.allclose(m.coef, theta, atol=1e-10)


def test_unseen_country_uses_mean_intercept(rng, caplog):
    d, _, _ = panel_instance(rng)
    m = fit_ols_fe(d)
    new = from_arrays(np.zeros((1, 3)), [0.0], ["ZZZ"])
    assert m.predict(new)[0] == pytest.approx(np.mean(list(m.intercepts.values())))
    assert "ZZZ" in caplog.text
