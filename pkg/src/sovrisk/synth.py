"""Synthetic panels with known structure, and brute-force reference oracles.

The oracles here deliberately share no code with the production attribution
and connectedness modules: Shapley values come from explicit subset
enumeration and variance decompositions from explicit summation loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np
import pandas as pd

from .panel import DEFAULT_REGIONS, MARKET_VARIABLES, NEWS_VARIABLES, REGION_ORDER, CountryMeta, Panel, Region

_DEFAULT_LOADINGS = {
    Region.AdvancedEconomies: (0.3, 0.4),
    Region.EMAsia: (0.5, 0.6),
    Region.EMLatam: (0.7, 0.7),
    Region.EMEurope: (0.5, 0.8),
    Region.EMMENA: (0.4, 0.5),
}


@dataclass
class DGPSpec:
    """Synthetic data-generating process.

    ``cds = fe + b_fed*FED + b_vix*VIX + news_strength * g'news
            + interaction * FED*VIX + threshold * GPR * 1{VIX > q_threshold(VIX)} + noise``

    FED, VIX and every news index are AR(1) with unit stationary variance.
    ``threshold_regions`` restricts the threshold channel (``None`` = all).
    """

    n_countries: int = 42
    n_days: int = 1500
    start: str = "2019-01-01"
    seed: int = 0
    fed_persistence: float = 0.995
    vix_persistence: float = 0.98
    news_persistence: float = 0.98
    loadings: dict = field(default_factory=lambda: dict(_DEFAULT_LOADINGS))
    news_loadings: tuple[float, ...] = (0.15, 0.1, 0.05, -0.1, 0.05, 0.1)
    news_strength: float = 1.0
    interaction: float = 0.5
    threshold: float = 2.0
    threshold_quantile: float = 0.8
    threshold_regions: tuple | None = None
    fe_sd: float = 1.0
    noise_sd: float = 0.2
    max_start_offset: int = 0
    gap_rate: float = 0.0
    regions: dict = field(default_factory=lambda: dict(DEFAULT_REGIONS))

    def __post_init__(self):
        for name in ("fed_persistence", "vix_persistence", "news_persistence"):
            if not -1.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (-1, 1)")
        if not 0.0 < self.threshold_quantile < 1.0:
            raise ValueError("threshold_quantile must lie in (0, 1)")
        if len(self.news_loadings) != len(NEWS_VARIABLES):
            raise ValueError(f"news_loadings needs {len(NEWS_VARIABLES)} entries")
        if self.n_countries < 1 or self.n_days < 2:
            raise ValueError("need at least one country and two days")


def _ar1(rng, n, phi, size=None):
    shape = (n,) if size is None else (n, size)
    e = rng.standard_normal(shape) * math.sqrt(1.0 - phi * phi)
    x = np.empty(shape)
    x[0] = rng.standard_normal(shape[1:]) if size else rng.standard_normal()
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def pick_countries(n: int, regions: dict) -> list[str]:
    """``n`` codes dealt round-robin across regions, codes sorted within region."""
    pools = [sorted(c for c, r in regions.items() if r == reg) for reg in REGION_ORDER]
    pools = [p for p in pools if p]
    out = []
    while len(out) < n:
        progressed = False
        for p in pools:
            if p and len(out) < n:
                out.append(p.pop(0))
                progressed = True
        if not progressed:
            raise ValueError(f"taxonomy has fewer than {n} countries")
    return out


def generate(spec: DGPSpec) -> tuple[Panel, pd.DataFrame]:
    """Draw a panel from ``spec``.

    Returns the panel (raw, unsmoothed) and a truth table with one row per
    (date, country) holding every additive component of the CDS value.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 20170101]))
    T = spec.n_days
    dates = pd.date_range(spec.start, periods=T, freq="D")
    fed = _ar1(rng, T, spec.fed_persistence)
    vix = _ar1(rng, T, spec.vix_persistence)
    q = float(np.quantile(vix, spec.threshold_quantile))
    active = vix > q
    codes = pick_countries(spec.n_countries, spec.regions)
    gamma = np.asarray(spec.news_loadings, dtype=float) * spec.news_strength
    countries, local, truth = {}, {}, []
    gpr_idx = NEWS_VARIABLES.index("GPR")
    for c in codes:
        reg = Region(spec.regions[c])
        countries[c] = CountryMeta(c, reg)
        news = _ar1(rng, T, spec.news_persistence, len(NEWS_VARIABLES))
        fe = rng.normal(0.0, spec.fe_sd)
        b_fed, b_vix = spec.loadings[reg]
        noise = rng.normal(0.0, spec.noise_sd, T) if spec.noise_sd > 0 else np.zeros(T)
        use_thr = spec.threshold_regions is None or reg in spec.threshold_regions
        comp = {
            "fe": np.full(T, fe),
            "fed": b_fed * fed,
            "vix": b_vix * vix,
            "news": news @ gamma,
            "interaction": spec.interaction * fed * vix,
            "threshold": (spec.threshold * news[:, gpr_idx] * active) if use_thr else np.zeros(T),
            "noise": noise,
        }
        cds = comp["fe"] + comp["fed"] + comp["vix"] + comp["news"] + comp["interaction"] + comp["threshold"] \
            + comp["noise"]
        start = int(rng.integers(0, spec.max_start_offset + 1)) if spec.max_start_offset else 0
        keep = np.zeros(T, dtype=bool)
        keep[start:] = True
        if spec.gap_rate > 0:
            keep &= rng.random(T) >= spec.gap_rate
        local[(c, "CDS")] = pd.Series(cds[keep], index=dates[keep])
        for k, v in enumerate(NEWS_VARIABLES):
            local[(c, v)] = pd.Series(news[keep, k], index=dates[keep])
        frame = pd.DataFrame({"date": dates[keep], "country": c, **{k: v[keep] for k, v in comp.items()},
                              "cds": cds[keep], "threshold_active": active[keep]})
        truth.append(frame)
    glob = {"FED": pd.Series(fed, index=dates), "VIX": pd.Series(vix, index=dates)}
    panel = Panel(countries, local, glob)
    truth_df = pd.concat(truth, ignore_index=True)
    truth_df.attrs["vix_threshold"] = q
    return panel, truth_df


# ----------------------------------------------------------------------------
# Shapley oracles


def _members(model):
    """``(base, scale, [tree, ...])`` for a single tree or an ensemble."""
    if hasattr(model, "trees"):
        return float(model.base), float(model.scale), list(model.trees)
    return 0.0, 1.0, [model]


def _subset_values(tree, x, M):
    """Cover-weighted conditional expectation of one tree for every subset mask."""
    masks = np.arange(1 << M, dtype=np.int64)

    def walk(node):
        f = int(tree.feature[node])
        if f < 0:
            return np.full(masks.shape, float(tree.value[node]))
        l, r = int(tree.left[node]), int(tree.right[node])
        vl, vr = walk(l), walk(r)
        known = ((masks >> f) & 1).astype(bool)
        follow = vl if x[f] <= tree.threshold[node] else vr
        avg = (tree.cover[l] * vl + tree.cover[r] * vr) / tree.cover[node]
        return np.where(known, follow, avg)

    return walk(0)


def coalition_values(model, x) -> np.ndarray:
    """``v(S)`` for all ``2^M`` subsets ``S`` (bit ``j`` set = feature ``j`` known)."""
    x = np.asarray(x, dtype=float)
    M = len(x)
    if M > 12:
        raise ValueError("exhaustive enumeration is limited to 12 features")
    base, scale, members = _members(model)
    v = np.zeros(1 << M)
    for t in members:
        v += _subset_values(t, x, M)
    return base + scale * v


def brute_shapley(model, x) -> tuple[float, np.ndarray]:
    """Exact Shapley values by enumerating every feature subset.

    Returns ``(phi0, phi)`` with ``phi0 = v(empty set)``.
    """
    x = np.asarray(x, dtype=float)
    M = len(x)
    v = coalition_values(model, x)
    masks = np.arange(1 << M)
    sizes = np.array([bin(m).count("1") for m in masks])
    w = np.array([math.factorial(s) * math.factorial(M - s - 1) / math.factorial(M) if s < M else 0.0
                  for s in sizes])
    phi = np.zeros(M)
    for j in range(M):
        without = masks[(masks >> j) & 1 == 0]
        phi[j] = np.sum(w[without] * (v[without | (1 << j)] - v[without]))
    return float(v[0]), phi


def brute_shapley_permutations(model, x) -> tuple[float, np.ndarray]:
    """Shapley values as the average marginal contribution over all orderings (M <= 8)."""
    x = np.asarray(x, dtype=float)
    M = len(x)
    if M > 8:
        raise ValueError("permutation enumeration is limited to 8 features")
    v = coalition_values(model, x)
    phi = np.zeros(M)
    count = 0
    for perm in permutations(range(M)):
        mask = 0
        for j in perm:
            phi[j] += v[mask | (1 << j)] - v[mask]
            mask |= 1 << j
        count += 1
    return float(v[0]), phi / count


def brute_shapley_interactions(model, x) -> np.ndarray:
    """Pairwise Shapley interaction matrix by subset enumeration.

    Off-diagonal entries follow the standard interaction index split evenly
    between ``(i, j)`` and ``(j, i)``; the diagonal holds the remaining main
    effect so rows sum to the Shapley values.
    """
    x = np.asarray(x, dtype=float)
    M = len(x)
    v = coalition_values(model, x)
    _, phi = brute_shapley(model, x)
    out = np.zeros((M, M))
    if M >= 2:
        denom = 2.0 * math.factorial(M - 1)
        for i, j in combinations(range(M), 2):
            rest = [k for k in range(M) if k not in (i, j)]
            total = 0.0
            for size in range(len(rest) + 1):
                w = math.factorial(size) * math.factorial(M - size - 2) / denom
                for S in combinations(rest, size):
                    m = sum(1 << k for k in S)
                    total += w * (v[m | (1 << i) | (1 << j)] - v[m | (1 << i)] - v[m | (1 << j)] + v[m])
            out[i, j] = out[j, i] = total
    for i in range(M):
        out[i, i] = phi[i] - (out[i].sum() - out[i, i])
    return out


# ----------------------------------------------------------------------------
# variance-decomposition oracle


def brute_gfevd(A, sigma, H: int = 10, ridge: bool = True, normalize_shocks: bool = False) -> np.ndarray:
    """Row-normalised generalised FEVD by explicit summation.

    ``A`` is a sequence of ``k x k`` lag matrices. With ``ridge`` the
    covariance gets ``1e-8 * trace / k`` added to its diagonal first.
    """
    A = [np.asarray(a, dtype=float) for a in A]
    S = np.array(sigma, dtype=float)
    k = S.shape[0]
    if k > 4 or H > 20:
        raise ValueError("oracle limited to k <= 4 and H <= 20")
    if ridge:
        lam = 1e-8 * sum(S[i][i] for i in range(k)) / k
        for i in range(k):
            S[i][i] += lam
    p = len(A)
    psi = []
    for ell in range(H):
        P = [[1.0 if (r == c and ell == 0) else 0.0 for c in range(k)] for r in range(k)]
        for lag in range(1, min(ell, p) + 1):
            prev = psi[ell - lag]
            for r in range(k):
                for c in range(k):
                    acc = 0.0
                    for m in range(k):
                        acc += A[lag - 1][r][m] * prev[m][c]
                    P[r][c] += acc
        psi.append(P)
    theta = [[0.0] * k for _ in range(k)]
    for i in range(k):
        den = 0.0
        for ell in range(H):
            P = psi[ell]
            for a in range(k):
                for b in range(k):
                    den += P[i][a] * S[a][b] * P[i][b]
        for j in range(k):
            num = 0.0
            for ell in range(H):
                P = psi[ell]
                s = 0.0
                for a in range(k):
                    s += P[i][a] * S[a][j]
                num += s * s
            if normalize_shocks:
                num /= S[j][j]
            theta[i][j] = num / den
    out = np.zeros((k, k))
    for i in range(k):
        row = sum(theta[i])
        for j in range(k):
            out[i, j] = theta[i][j] / row
    return out


def random_stable_var(rng: np.random.Generator, k: int, p: int = 1, radius: float = 0.9):
    """Random VAR lag matrices with companion spectral radius below ``radius``, plus an SPD covariance."""
    while True:
        A = [rng.normal(0, 0.4, (k, k)) for _ in range(p)]
        comp = np.zeros((k * p, k * p))
        comp[:k, :] = np.hstack(A)
        if p > 1:
            comp[k:, :-k] = np.eye(k * (p - 1))
        rho = np.max(np.abs(np.linalg.eigvals(comp)))
        if rho < radius:
            break
    L = rng.normal(size=(k, k))
    sigma = L @ L.T + 0.5 * np.eye(k)
    return A, sigma


def simulate_var(rng: np.random.Generator, A, sigma, T: int, burn: int = 200) -> np.ndarray:
    k = sigma.shape[0]
    p = len(A)
    chol = np.linalg.cholesky(sigma)
    y = np.zeros((T + burn, k))
    for t in range(p, T + burn):
        y[t] = sum(A[j] @ y[t - j - 1] for j in range(p)) + chol @ rng.standard_normal(k)
    return y[burn:]
