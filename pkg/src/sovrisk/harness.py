"""Pseudo-real-time backtests, expanding-window tuning and accuracy accounting.

Training data for a model fitted at refit date ``r`` is restricted to rows
whose *target* date is at most ``r - buffer``; since a row's feature date
precedes its target date, every date read during training lies outside
``(origin - buffer, origin]`` for each origin the model later serves.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .models import registry
from .models.design import DesignMatrix, build_design
from .panel import Panel, Region

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = ["country", "origin", "family", "infoset", "yhat", "y", "err"]
LEVELS = ("pooled", "country", "region", "global")


class LeakageError(RuntimeError):
    pass


def _day(d) -> np.datetime64:
    return np.datetime64(pd.Timestamp(d).date(), "D")


@dataclass(frozen=True)
class BacktestPlan:
    first_origin: str
    last_origin: str
    refit_every: int = 7
    buffer: int = 28
    horizon: int = 1
    infosets: tuple[str, ...] = ("MarketsOnly", "MarketsPlusNews")
    ma_window: int = 28

    def __post_init__(self):
        if pd.Timestamp(self.last_origin) < pd.Timestamp(self.first_origin):
            raise ValueError("last_origin precedes first_origin")
        if self.refit_every < 1 or self.buffer < 0 or self.horizon < 0:
            raise ValueError("refit_every >= 1, buffer >= 0 and horizon >= 0 required")
        if self.buffer < self.ma_window - 1:
            warnings.warn(f"buffer {self.buffer} is shorter than the smoothing window minus one "
                          f"({self.ma_window - 1}); smoothed features can overlap the forecast origin",
                          stacklevel=2)

    def refit_dates(self) -> list[np.datetime64]:
        start, end = _day(self.first_origin), _day(self.last_origin)
        n = int((end - start).astype(int)) // self.refit_every + 1
        return [start + np.timedelta64(k * self.refit_every, "D") for k in range(n)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["infosets"] = list(self.infosets)
        return d


class DesignSource:
    """Serves training and prediction rows from a full design matrix."""

    def __init__(self, design: DesignMatrix):
        self.design = design

    def training(self, refit_date, buffer: int) -> DesignMatrix:
        cutoff = _day(refit_date) - np.timedelta64(buffer, "D")
        return self.design.subset(self.design.target_dates <= cutoff)

    def between(self, start, stop) -> DesignMatrix:
        """Rows with feature date in ``[start, stop)``."""
        d = self.design.dates
        return self.design.subset((d >= _day(start)) & (d < _day(stop)))


class InstrumentedSource(DesignSource):
    """A design source that logs every date it hands out for training."""

    def __init__(self, design: DesignMatrix):
        super().__init__(design)
        self.log: list[tuple[np.datetime64, np.ndarray]] = []

    def training(self, refit_date, buffer: int) -> DesignMatrix:
        d = super().training(refit_date, buffer)
        seen = np.unique(np.concatenate([d.dates, d.target_dates])) if d.n else np.array([], "datetime64[D]")
        self.log.append((_day(refit_date), seen))
        return d


@dataclass
class ForecastLedger:
    records: pd.DataFrame
    fingerprints: pd.DataFrame
    plan: BacktestPlan
    specs: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def to_csv(self, path) -> None:
        self.records.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def read_csv(cls, path, plan: BacktestPlan | None = None) -> "ForecastLedger":
        df = pd.read_csv(path, float_precision="round_trip",
                         dtype={"country": str, "family": str, "infoset": str})
        return cls(df, pd.DataFrame(), plan)


def certify(fingerprint, refit_date, buffer: int) -> None:
    """Fail closed if a model saw any target dated after ``refit_date - buffer``."""
    if fingerprint.max_date is None:
        return
    if _day(fingerprint.max_date) + np.timedelta64(buffer, "D") > _day(refit_date):
        raise LeakageError(f"training data reaches {fingerprint.max_date}, later than "
                           f"{refit_date} minus the {buffer}-day buffer")


def _run_spec(spec: registry.ModelSpec, source: DesignSource, plan: BacktestPlan, regions):
    refits = plan.refit_dates()
    end = _day(plan.last_origin) + np.timedelta64(1, "D")
    rows, prints, skipped = [], [], []
    for k, r in enumerate(refits):
        stop = refits[k + 1] if k + 1 < len(refits) else end
        test = source.between(r, stop)
        if test.n == 0:
            continue
        train = source.training(r, plan.buffer)
        if train.n == 0:
            logger.info("%s/%s: no training rows at %s; origins skipped", spec.family, spec.infoset, r)
            skipped.append({"family": spec.family, "infoset": spec.infoset, "refit": str(r),
                            "reason": "no_training_rows"})
            continue
        model = registry.fit(spec, train, regions)
        certify(model.fingerprint, r, plan.buffer)
        if hasattr(model, "groups"):
            known = {c for c, g in model.country_group.items() if g in model.groups}
            test = test.subset(np.array([c in known for c in test.countries], dtype=bool))
        yhat = model.predict(test)
        prints.append({"family": spec.family, "infoset": spec.infoset, "refit": str(r),
                       **model.fingerprint.to_dict()})
        rows.append(pd.DataFrame({
            "country": test.countries, "origin": test.dates.astype(str), "family": spec.family,
            "infoset": spec.infoset, "yhat": yhat, "y": test.y, "err": test.y - yhat}))
    return rows, prints, skipped


def run_backtest(panel: Panel, specs: Sequence[registry.ModelSpec], plan: BacktestPlan,
                 sources: Mapping[str, DesignSource] | None = None, jobs: int = 1,
                 regions: Mapping[str, Region] | None = None) -> ForecastLedger:
    """Recursive out-of-sample forecasts for every spec.

    Models are refitted every ``plan.refit_every`` days starting at the first
    origin; in between the latest model predicts daily. ``sources`` may
    supply (e.g. instrumented) design sources per information set.
    """
    if not specs:
        raise ValueError("no model specs given")
    keys = [(s.family, s.infoset) for s in specs]
    if len(set(keys)) != len(keys):
        raise ValueError("each (family, infoset) pair may appear only once")
    regions = dict(panel.regions() if regions is None else regions)
    sources = dict(sources or {})
    for s in specs:
        if s.infoset not in sources:
            sources[s.infoset] = DesignSource(build_design(panel, s.infoset, plan.horizon))

    def task(spec):
        return _run_spec(spec, sources[spec.infoset], plan, regions)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(task, specs))
    else:
        results = [task(s) for s in specs]
    frames = [f for rows, _, _ in results for f in rows]
    records = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=LEDGER_COLUMNS)
    records = records[LEDGER_COLUMNS].sort_values(["family", "infoset", "country", "origin"],
                                                  kind="mergesort").reset_index(drop=True)
    prints = pd.DataFrame([p for _, ps, _ in results for p in ps])
    skipped = [s for _, _, sk in results for s in sk]
    return ForecastLedger(records, prints, plan, [s.to_dict() for s in specs], skipped)


# ----------------------------------------------------------------------------
# tuning


def validation_dates(train_end, n_folds: int = 5, step: int = 60) -> list[pd.Timestamp]:
    end = pd.Timestamp(train_end)
    return [end - pd.Timedelta(days=step * k) for k in range(n_folds)]


@dataclass
class SearchSpace:
    family: str
    budget: int = 50
    seed: int = 0
    fixed: dict = field(default_factory=dict)
    candidates: list | None = None

    def sample(self) -> list[dict]:
        """Seeded random draws (or the explicit candidates), validated and de-duplicated."""
        if self.candidates is not None:
            pts = [registry.validate(self.family, c) for c in self.candidates]
        else:
            if self.budget < 1:
                raise ValueError("budget must be >= 1")
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, 6007]))
            pts = [registry.sample_params(self.family, rng, self.fixed) for _ in range(self.budget)]
        out, seen = [], set()
        for p in pts:
            key = json.dumps(p, sort_keys=True)
            if key not in seen:
                seen.add(key)
                out.append(p)
        return out


@dataclass
class TuneResult:
    best: dict
    score: float
    table: pd.DataFrame
    dates: list[pd.Timestamp]


def _fold_error(errors: np.ndarray, metric: str) -> float:
    if metric == "MAE":
        return float(np.mean(np.abs(errors)))
    if metric == "RMSE":
        return float(np.sqrt(np.mean(errors**2)))
    raise ValueError(f"unknown fold metric {metric!r}")


def tune(panel: Panel, family: str, space: SearchSpace, train_end, infoset: str = "MarketsPlusNews",
         buffer: int = 28, step: int = 60, n_folds: int = 5, metric: str = "MAE", horizon: int = 1,
         regions: Mapping[str, Region] | None = None, seed: int = 0,
         design: DesignMatrix | None = None) -> TuneResult:
    """Expanding-window search.

    Validation dates step back ``step`` days from ``train_end``. For each
    fold the candidate is fitted on rows with target date at most
    ``vdate - buffer`` and scored on the forecasts made at ``vdate``. The
    candidate score is the mean over folds; a candidate with an empty
    training fold is invalid. Ties go to the lexicographically smallest
    canonical parameter string, so the result does not depend on the order
    in which candidates are listed.
    """
    lo, hi = panel.span
    if not lo <= pd.Timestamp(train_end) <= hi:
        raise ValueError(f"train_end {train_end} outside the panel span")
    d = build_design(panel, infoset, horizon) if design is None else design
    regions = dict(panel.regions() if regions is None else regions)
    dates = validation_dates(train_end, n_folds, step)
    src = DesignSource(d)
    folds = []
    for v in dates:
        train = src.training(v, buffer)
        test = src.between(v, v + pd.Timedelta(days=1))
        folds.append((v, train, test))
    rows = []
    for params in space.sample():
        spec = registry.ModelSpec(family, params, infoset, seed)
        scores, valid = [], True
        for v, train, test in folds:
            if train.n == 0:
                valid = False
                break
            if test.n == 0:
                continue
            model = registry.fit(spec, train, regions)
            scores.append(_fold_error(test.y - model.predict(test), metric))
        score = float(np.mean(scores)) if valid and scores else math.inf
        rows.append({"params": json.dumps(params, sort_keys=True), "score": score, "folds": len(scores),
                     "valid": valid and bool(scores)})
    table = pd.DataFrame(rows)
    ok = table[table["valid"]]
    if ok.empty:
        raise ValueError("no valid candidate: every candidate had an empty training fold")
    best = ok.sort_values(["score", "params"], kind="mergesort").iloc[0]
    return TuneResult(json.loads(best["params"]), float(best["score"]), table, dates)


# ----------------------------------------------------------------------------
# scoring


def _metrics(err: np.ndarray) -> tuple[float, float]:
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err**2)))


def score(ledger, levels: Sequence[str] = LEVELS, regions: Mapping[str, Region] | None = None) -> pd.DataFrame:
    """MAE and RMSE per (family, infoset) at the requested aggregation levels.

    ``pooled`` pools every country-day; ``country`` gives per-country values;
    ``global`` is the unweighted mean of the country values and ``region``
    the unweighted mean over each region's countries.
    """
    df = ledger.records if hasattr(ledger, "records") else ledger
    if df.empty:
        raise ValueError("empty ledger")
    out = []
    for (fam, info), g in df.groupby(["family", "infoset"], sort=True):
        err = g["err"].to_numpy(float)
        if "pooled" in levels:
            mae, rmse = _metrics(err)
            out.append((fam, info, "pooled", "all", len(err), mae, rmse))
        per = {c: (len(gc),) + _metrics(gc["err"].to_numpy(float)) for c, gc in g.groupby("country", sort=True)}
        if "country" in levels:
            out += [(fam, info, "country", c, n, mae, rmse) for c, (n, mae, rmse) in per.items()]
        if "global" in levels:
            out.append((fam, info, "global", "all", len(err), float(np.mean([v[1] for v in per.values()])),
                        float(np.mean([v[2] for v in per.values()]))))
        if "region" in levels:
            if regions is None:
                raise ValueError("region level needs a taxonomy")
            by_region: dict[str, list] = {}
            for c, v in per.items():
                by_region.setdefault(Region(regions[c]).value, []).append(v)
            for r in sorted(by_region):
                vals = by_region[r]
                out.append((fam, info, "region", r, int(sum(v[0] for v in vals)),
                            float(np.mean([v[1] for v in vals])), float(np.mean([v[2] for v in vals]))))
    return pd.DataFrame(out, columns=["family", "infoset", "level", "group", "n", "MAE", "RMSE"])


def news_increment(m_mkt: pd.DataFrame, m_news: pd.DataFrame) -> pd.DataFrame:
    """``delta = metric(markets) - metric(markets + news)``; ``pct = 100 delta / metric(markets)``.

    Positive values mean news helps. Cells with a zero benchmark are flagged
    ``undefined`` and carry NaN.
    """
    keys = ["family", "level", "group"]
    a = m_mkt.drop(columns=["infoset"], errors="ignore").set_index(keys)
    b = m_news.drop(columns=["infoset"], errors="ignore").set_index(keys)
    if set(a.index) != set(b.index):
        missing = sorted(set(a.index) ^ set(b.index))
        raise ValueError(f"tables cover different cells: {missing[:5]}")
    b = b.loc[a.index]
    out = pd.DataFrame(index=a.index)
    for metric in ("MAE", "RMSE"):
        mk, nw = a[metric].to_numpy(float), b[metric].to_numpy(float)
        delta = mk - nw
        with np.errstate(divide="ignore", invalid="ignore"):
            pct = np.where(mk != 0, 100.0 * delta / np.where(mk != 0, mk, 1.0), np.nan)
        out[f"{metric}_mkt"] = mk
        out[f"{metric}_news"] = nw
        out[f"d{metric}"] = delta
        out[f"pct_d{metric}"] = pct
        out[f"{metric}_undefined"] = mk == 0
    return out.reset_index()


def split_infosets(metrics: pd.DataFrame) -> tuple[pd.DataFrame, pd.DataFrame]:
    return (metrics[metrics["infoset"] == "MarketsOnly"].reset_index(drop=True),
            metrics[metrics["infoset"] == "MarketsPlusNews"].reset_index(drop=True))


def table1(metrics: pd.DataFrame, level: str = "pooled", group: str = "all") -> pd.DataFrame:
    """Benchmark / News / Diff / %Var layout per family.

    As in the published table, ``Diff = News - Benchmark`` so negative
    values are improvements.
    """
    m = metrics[(metrics["level"] == level) & (metrics["group"] == group)]
    mk = m[m["infoset"] == "MarketsOnly"].set_index("family")
    nw = m[m["infoset"] == "MarketsPlusNews"].set_index("family")
    fams = [f for f in registry.FAMILIES if f in mk.index and f in nw.index]
    rows = []
    for f in fams:
        r = {"model": f, "bench_RMSE": mk.at[f, "RMSE"], "bench_MAE": mk.at[f, "MAE"],
             "news_RMSE": nw.at[f, "RMSE"], "news_MAE": nw.at[f, "MAE"]}
        for metric in ("RMSE", "MAE"):
            diff = r[f"news_{metric}"] - r[f"bench_{metric}"]
            base = r[f"bench_{metric}"]
            r[f"{metric}_diff"] = diff
            r[f"{metric}_pct_var"] = 100.0 * diff / base if base != 0 else np.nan
        rows.append(r)
    return pd.DataFrame(rows, columns=["model", "bench_RMSE", "bench_MAE", "news_RMSE", "news_MAE",
                                       "RMSE_diff", "RMSE_pct_var", "MAE_diff", "MAE_pct_var"])


def ledger_digest(records: pd.DataFrame) -> str:
    text = records.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    return hashlib.sha256(text.encode()).hexdigest()
