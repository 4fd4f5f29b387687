import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import spearmanr

from sovrisk.connect import (VarError, WindowPlan, build_window, density, density_from_corr, dy_index, fit_var,
                             gfevd, gfevd_from, half_width, rolling_connectedness)
from sovrisk.synth import brute_gfevd, random_stable_var, simulate_var


def _series(rng, codes, start="2020-01-01", days=600, drop=0.0):
    idx = pd.date_range(start, periods=days, freq="D")
    out = {}
    for c in codes:
        s = pd.Series(rng.normal(size=days).cumsum() * 0.1 + rng.normal(size=days), index=idx)
        if drop:
            s = s[rng.uniform(size=days) > drop]
        out[c] = s
    return out


def test_half_width_rule():
    plan = WindowPlan()
    assert half_width(10, plan) == 90
    assert half_width(40, plan) == 180
    assert half_width(1, plan) == 60


def oracle_window(series, center, plan):
    center = pd.Timestamp(center)
    k_eff = 0
    for s in series.values():
        s = s.dropna()
        n = ((s.index >= center - pd.Timedelta(days=180)) & (s.index <= center + pd.Timedelta(days=180))).sum()
        k_eff += n / 361 >= 0.7
    h = min(max(6 * k_eff * 3 // 2, 60), 180)
    days = pd.date_range(center - pd.Timedelta(days=h), center + pd.Timedelta(days=h))
    cands = []
    for c in sorted(series):
        s = series[c].dropna().reindex(days)
        # fill interior runs of at most 7 missing days linearly
        vals = s.to_numpy().copy()
        obs = np.flatnonzero(np.isfinite(vals))
        for a, b in zip(obs[:-1], obs[1:]):
            if 1 < b - a <= 8:
                vals[a + 1:b] = np.interp(np.arange(a + 1, b), [a, b], [vals[a], vals[b]])
        cov = np.isfinite(vals).sum() / len(days)
        sd = np.nanstd(vals, ddof=1) if np.isfinite(vals).sum() > 1 else 0.0
        if cov >= 0.7 and sd >= 1e-10:
            cands.append((c, cov, sd, vals))
    cands = sorted(cands, key=lambda t: (-t[1], -t[2], t[0]))[:10]
    cands.sort(key=lambda t: t[0])
    return h, {c: (v - np.nanmean(v)) / sd for c, _, sd, v in cands}


def test_build_window_matches_oracle(rng):
    codes = [f"C{i:02d}" for i in range(12)]
    series = _series(rng, codes, drop=0.15)
    series["C03"] = series["C03"].iloc[::10]
    series["C07"] = pd.Series(1.0, index=series["C07"].index)
    w = build_window(series, "2020-10-01")
    h, cols = oracle_window(series, "2020-10-01", WindowPlan())
    assert w.h == h and w.countries == list(cols)
    assert len(cols) == 10 and "C03" not in cols and "C07" not in cols
    for c in cols:
        assert np.allclose(w.block[c].to_numpy(), cols[c], atol=1e-12, equal_nan=True)


def test_too_few_series(rng):
    w = build_window(_series(rng, ["AAA"]), "2020-10-01")
    assert w.block is None and w.skip_reason == "too_few_series"


def test_var1_recovery(rng):
    # a single T = 500 draw has standard errors near 0.03, so the 0.05 bound is
    # applied to the replication mean and each draw is held to 4 standard errors
    A = np.array([[0.6, 0.3], [-0.2, 0.5]])
    est = []
    for _ in range(20):
        Y = simulate_var(rng, [A], np.eye(2), 500)
        m = fit_var(Y, p_max=1)
        Z = np.column_stack([np.ones(len(Y) - 1), Y[:-1]])
        se = np.sqrt(np.outer(np.diag(m.sigma), np.diag(np.linalg.inv(Z.T @ Z))[1:]))
        assert np.all(np.abs(m.A[0] - A) < 4 * se)
        est.append(m.A[0])
    assert np.max(np.abs(np.mean(est, axis=0) - A)) < 0.05


def test_white_noise_selects_one_lag():
    hits = 0
    for seed in range(40):
        Y = np.random.default_rng(seed).normal(size=(300, 2))
        m = fit_var(Y)
        hits += m.p == 1
    assert hits >= 0.9 * 40


def test_white_noise_coefficients_near_zero(rng):
    Y = rng.normal(size=(400, 2))
    m = fit_var(Y, p_max=1)
    se = 1 / math.sqrt(m.n_obs)
    assert np.all(np.abs(m.A[0]) < 3.5 * se)


def test_ridge_arithmetic(rng):
    m = fit_var(rng.normal(size=(100, 2)), p_max=1)
    m.sigma = np.diag([1.5, 0.5])
    assert m.ridge == pytest.approx(1e-8, rel=1e-15)


def test_var_errors(rng):
    with pytest.raises(VarError) as e:
        fit_var(rng.normal(size=(5, 3)))
    assert e.value.reason == "short_sample"
    x = rng.normal(size=200)
    with pytest.raises(VarError) as e:
        fit_var(np.column_stack([x, x]), p_max=1)
    assert e.value.reason == "singular"


def test_gfevd_identity_and_bivariate():
    assert np.allclose(gfevd_from([np.zeros((3, 3))], np.eye(3)), np.eye(3), atol=1e-12)
    A = np.array([[0.5, 0.3], [0.0, 0.5]])
    got = gfevd_from([A], np.eye(2), H=10)
    assert np.max(np.abs(got - brute_gfevd([A], np.eye(2), H=10))) < 1e-10
    assert got[1, 0] == pytest.approx(0.0, abs=1e-8) and got[0, 1] > 0.1


def test_gfevd_random_and_permutation(rng):
    for _ in range(20):
        k = int(rng.integers(2, 5))
        A, S = random_stable_var(rng, k, int(rng.integers(1, 3)))
        th = gfevd_from(A, S)
        assert np.max(np.abs(th - brute_gfevd(A, S))) < 1e-10
        assert np.max(np.abs(th.sum(axis=1) - 1)) < 1e-12 and np.all(th >= 0)
    P = np.eye(3)[[1, 2, 0]]
    A, S = random_stable_var(rng, 3, 2)
    th = gfevd_from(A, S)
    tp = gfevd_from([P @ a @ P.T for a in A], P @ S @ P.T)
    assert np.allclose(tp, P @ th @ P.T, atol=1e-12)


def test_dy_index_cases(rng):
    assert dy_index(np.eye(4)) == 0.0
    for k in (2, 3, 5):
        assert dy_index(np.full((k, k), 1 / k)) == pytest.approx(100 * (k - 1) / k, abs=1e-12)
    T = rng.uniform(size=(4, 4))
    T /= T.sum(axis=1, keepdims=True)
    hand = sum(T[i, j] for i in range(4) for j in range(4) if i != j)
    assert dy_index(T) == pytest.approx(100 * hand / 4, abs=1e-12)


def test_density_arithmetic():
    R = np.array([[1, 0.5, 0.3], [0.5, 1, 0.9], [0.3, 0.9, 1.0]])
    assert density_from_corr(R, 0.4) == pytest.approx(46.67, abs=0.01)
    x = np.arange(50.0)
    block = pd.DataFrame({"a": x, "b": np.exp(x / 10), "c": x**3})
    assert density(block) == pytest.approx(100.0)


def test_density_matches_scipy_and_monotone_invariance(rng):
    block = pd.DataFrame(rng.normal(size=(100, 4)))
    block[1] += block[0]
    R = spearmanr(block.to_numpy()).correlation
    assert density(block) == pytest.approx(density_from_corr(R), abs=1e-12)
    moved = block.copy()
    moved[2] = np.exp(moved[2])
    assert density(moved) == pytest.approx(density(block), abs=1e-12)


def test_scale_invariance(rng):
    series = _series(rng, ["A", "B", "C"], days=500)
    plan = WindowPlan(centers=("2020-08-01",))
    a = rolling_connectedness({"f": series}, ["f"], plan).table
    scaled = {c: s * (3.0 + i) for i, (c, s) in enumerate(series.items())}
    b = rolling_connectedness({"f": scaled}, ["f"], plan).table
    assert a["S_dy"].iloc[0] == pytest.approx(b["S_dy"].iloc[0], abs=1e-9)
    assert a["density"].iloc[0] == pytest.approx(b["density"].iloc[0], abs=1e-12)


def test_rolling_matches_scripted_composition(rng):
    series = _series(rng, ["AAA", "BBB", "CCC"], days=700, drop=0.05)
    plan = WindowPlan(start="2020-05-01", end="2021-06-01", step_days=30)
    out = rolling_connectedness({"f": series}, ["f"], plan, jobs=2)
    assert len(out.table) == len(plan.center_dates())
    for _, row in out.table.iterrows():
        w = build_window(series, row["center"], plan)
        if w.block is None:
            assert row["skip_reason"] == w.skip_reason
            continue
        m = fit_var(w.block.to_numpy(), plan.p_max)
        th = gfevd(m, plan.H)
        assert row["S_dy"] == dy_index(th) and row["density"] == density(w.block, plan.tau)
        assert row["p"] == m.p and row["countries"] == ";".join(w.countries)
        assert np.array_equal(out.thetas[("f", row["center"])], th)
    again = rolling_connectedness({"f": series}, ["f"], plan)
    pd.testing.assert_frame_equal(out.table, again.table)


def test_independent_noise_density_is_small():
    below = 0
    for seed in range(100):
        block = pd.DataFrame(np.random.default_rng(seed).normal(size=(360, 10)))
        below += density(block) < 5
    assert below >= 95


def test_plan_validation():
    with pytest.raises(ValueError):
        WindowPlan(coverage_threshold=0.0)
    with pytest.raises(ValueError):
        WindowPlan(h_bounds=(100, 50))
