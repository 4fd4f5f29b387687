"""Daily country panel: ingestion, validation, taxonomy and windowing arithmetic.

The panel is stored as a set of ``pandas.Series`` indexed by a daily
``DatetimeIndex``. Global variables (FED, VIX) are held once and broadcast to
every country on access, so they are identical across countries by
construction.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

GLOBAL_CODE = "GLOBAL"

MARKET_VARIABLES = ("FED", "VIX")
NEWS_VARIABLES = ("GPR", "EPU", "TPU", "ECO", "INT", "POL")
VARIABLES = ("CDS",) + MARKET_VARIABLES + NEWS_VARIABLES
GLOBAL_VARIABLES = frozenset(MARKET_VARIABLES)


class Region(str, Enum):
    AdvancedEconomies = "AdvancedEconomies"
    EMAsia = "EMAsia"
    EMLatam = "EMLatam"
    EMEurope = "EMEurope"
    EMMENA = "EMMENA"


REGION_ORDER = tuple(Region)

# 42-country sample; AE first, then the four EM blocks.
DEFAULT_REGIONS: dict[str, Region] = {
    **{c: Region.AdvancedEconomies for c in (
        "AUS", "AUT", "BEL", "CAN", "DNK", "FIN", "FRA", "DEU", "ITA", "JPN",
        "NLD", "NOR", "ESP", "SWE", "GBR", "USA")},
    **{c: Region.EMAsia for c in ("CHN", "IND", "IDN", "MYS", "PHL", "THA", "VNM")},
    **{c: Region.EMLatam for c in ("ARG", "BRA", "CHL", "COL", "MEX", "PER", "URY")},
    **{c: Region.EMEurope for c in ("CZE", "HUN", "POL", "RUS", "TUR", "UKR")},
    **{c: Region.EMMENA for c in ("EGY", "ISR", "JOR", "MAR", "QAT", "SAU")},
}


class PanelValidationError(ValueError):
    """Raised when panel input violates the schema.

    ``problems`` holds ``(line_number, message)`` pairs; line numbers refer to
    the source CSV (header is line 1) or are ``None`` for structural issues.
    """

    def __init__(self, problems: list[tuple[int | None, str]]):
        self.problems = problems
        lines = [f"line {ln}: {msg}" if ln is not None else msg for ln, msg in problems]
        super().__init__("invalid panel input:\n  " + "\n  ".join(lines))


class DegenerateSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class CountryMeta:
    code: str
    region: Region


@dataclass(frozen=True)
class PreprocessPolicy:
    ma_window: int = 28
    standardize: bool = True
    standardization_scope: str = "FullSample"  # or "TrainOnly"
    cutoff: pd.Timestamp | None = None  # required for TrainOnly

    def __post_init__(self):
        if self.ma_window < 1:
            raise ValueError("ma_window must be >= 1")
        if self.standardization_scope not in ("FullSample", "TrainOnly"):
            raise ValueError(f"unknown standardization scope {self.standardization_scope!r}")
        if self.standardization_scope == "TrainOnly" and self.cutoff is None:
            raise ValueError("TrainOnly scope needs a cutoff date")


def _as_series(s: pd.Series) -> pd.Series:
    out = pd.Series(np.asarray(s, dtype=float), index=pd.DatetimeIndex(s.index).normalize())
    return out.sort_index()


@dataclass
class Panel:
    """Unbalanced daily panel.

    ``local`` maps ``(country, variable)`` to a series; ``global_series`` maps
    the global variables to a single series shared by every country.
    """

    countries: dict[str, CountryMeta]
    local: dict[tuple[str, str], pd.Series]
    global_series: dict[str, pd.Series] = field(default_factory=dict)

    def __post_init__(self):
        missing = [c for c in self.countries if (c, "CDS") not in self.local]
        if missing:
            raise PanelValidationError([(None, f"country {c} has no CDS series") for c in missing])

    @property
    def country_codes(self) -> list[str]:
        """Countries ordered by region, then code."""
        order = {r: i for i, r in enumerate(REGION_ORDER)}
        return sorted(self.countries, key=lambda c: (order[self.countries[c].region], c))

    def regions(self) -> dict[str, Region]:
        return {c: m.region for c, m in self.countries.items()}

    def variables(self, country: str) -> list[str]:
        out = [v for v in VARIABLES if v in GLOBAL_VARIABLES and v in self.global_series]
        out += [v for v in VARIABLES if (country, v) in self.local]
        return [v for v in VARIABLES if v in out]

    def has(self, country: str, variable: str) -> bool:
        if variable in GLOBAL_VARIABLES:
            return variable in self.global_series
        return (country, variable) in self.local

    def get(self, country: str, variable: str) -> pd.Series:
        if variable in GLOBAL_VARIABLES:
            return self.global_series[variable]
        return self.local[(country, variable)]

    def series_keys(self) -> list[tuple[str, str]]:
        """All (country, variable) pairs, global variables broadcast."""
        return [(c, v) for c in self.country_codes for v in self.variables(c)]

    @property
    def span(self) -> tuple[pd.Timestamp, pd.Timestamp]:
        all_series = list(self.local.values()) + list(self.global_series.values())
        lo = min(s.index.min() for s in all_series if len(s))
        hi = max(s.index.max() for s in all_series if len(s))
        return lo, hi

    def to_long(self) -> pd.DataFrame:
        """Long frame ``date,country,variable,value``; globals stored once."""
        frames = []
        for (c, v), s in self.local.items():
            frames.append(pd.DataFrame({"date": s.index, "country": c, "variable": v, "value": s.values}))
        for v, s in self.global_series.items():
            frames.append(pd.DataFrame({"date": s.index, "country": GLOBAL_CODE, "variable": v,
                                        "value": s.values}))
        df = pd.concat(frames, ignore_index=True)
        return df.sort_values(["country", "variable", "date"], kind="mergesort").reset_index(drop=True)

    def fingerprint(self) -> str:
        """SHA-256 over the canonical long representation."""
        df = self.to_long()
        text = df.to_csv(index=False, date_format="%Y-%m-%d", float_format="%.17g", lineterminator="\n")
        return hashlib.sha256(text.encode()).hexdigest()

    def with_series(self, local: Mapping[tuple[str, str], pd.Series],
                    global_series: Mapping[str, pd.Series]) -> "Panel":
        keep = {c: m for c, m in self.countries.items() if (c, "CDS") in local}
        local = {k: s for k, s in local.items() if k[0] in keep}
        return Panel(keep, local, dict(global_series))


# ----------------------------------------------------------------------------
# taxonomy and I/O


def load_regions(path: str | Path | None = None) -> dict[str, Region]:
    """Built-in region table, optionally overridden by a ``country,region`` CSV."""
    table = dict(DEFAULT_REGIONS)
    if path is None:
        return table
    problems = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"country", "region"} <= set(reader.fieldnames):
            raise PanelValidationError([(1, "regions file needs header country,region")])
        for ln, row in enumerate(reader, start=2):
            try:
                table[row["country"].strip()] = Region(row["region"].strip())
            except ValueError:
                problems.append((ln, f"unknown region {row['region']!r}"))
    if problems:
        raise PanelValidationError(problems)
    return table


def load_panel(path: str | Path, regions: Mapping[str, Region] | str | Path | None = None) -> Panel:
    """Read a long CSV ``date,country,variable,value`` into a :class:`Panel`.

    Global variables may be given once under country ``GLOBAL`` or replicated
    per country; replicated copies must agree on shared dates.
    """
    if regions is None or isinstance(regions, (str, Path)):
        regions = load_regions(regions)
    problems: list[tuple[int | None, str]] = []
    seen: dict[tuple[str, str, str], int] = {}
    records: dict[tuple[str, str], list[tuple[pd.Timestamp, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "country", "variable", "value"]:
            raise PanelValidationError([(1, "header must be date,country,variable,value")])
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                problems.append((ln, f"expected 4 fields, got {len(row)}"))
                continue
            d, c, v, x = (f.strip() for f in row)
            try:
                date = pd.Timestamp(d)
                if date != date.normalize():
                    raise ValueError
            except (ValueError, TypeError):
                problems.append((ln, f"bad date {d!r}"))
                continue
            if c != GLOBAL_CODE and c not in regions:
                problems.append((ln, f"unknown country {c!r}"))
                continue
            if v not in VARIABLES:
                problems.append((ln, f"unknown variable {v!r}"))
                continue
            if c == GLOBAL_CODE and v not in GLOBAL_VARIABLES:
                problems.append((ln, f"variable {v} cannot be global"))
                continue
            try:
                value = float(x)
            except ValueError:
                problems.append((ln, f"bad value {x!r}"))
                continue
            if not math.isfinite(value):
                problems.append((ln, f"non-finite value {x!r}"))
                continue
            key = (d, c, v)
            if key in seen:
                problems.append((ln, f"duplicate key ({d},{c},{v}), first seen on line {seen[key]}"))
                continue
            seen[key] = ln
            records.setdefault((c, v), []).append((date, value))
    if problems:
        raise PanelValidationError(problems)

    local: dict[tuple[str, str], pd.Series] = {}
    global_parts: dict[str, list[pd.Series]] = {}
    for (c, v), obs in records.items():
        s = pd.Series([o[1] for o in obs], index=pd.DatetimeIndex([o[0] for o in obs])).sort_index()
        if v in GLOBAL_VARIABLES:
            global_parts.setdefault(v, []).append(s)
        else:
            local[(c, v)] = s
    global_series = {}
    for v, parts in global_parts.items():
        merged = pd.concat(parts, axis=1)
        spread = merged.max(axis=1) - merged.min(axis=1)
        bad = spread[spread > 1e-12]
        if len(bad):
            raise PanelValidationError([(None, f"global variable {v} differs across countries on "
                                               f"{bad.index[0]:%Y-%m-%d}")])
        global_series[v] = merged.mean(axis=1)
    countries = {c: CountryMeta(c, regions[c]) for c, _ in local}
    missing = sorted({c for c, _ in local} - {c for c, v in local if v == "CDS"})
    if missing:
        raise PanelValidationError([(None, f"country {c} has no CDS series") for c in missing])
    return Panel(countries, local, global_series)


def save_panel(panel: Panel, path: str | Path) -> None:
    df = panel.to_long()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "country", "variable", "value"])
        for row in df.itertuples(index=False):
            w.writerow([f"{row.date:%Y-%m-%d}", row.country, row.variable, repr(float(row.value))])


# ----------------------------------------------------------------------------
# series operations


def moving_average(s: pd.Series, window: int = 28) -> pd.Series:
    """Trailing calendar-day mean over ``(t - window, t]``.

    Gaps shrink the averaging set. The first ``window - 1`` observations are
    dropped so the output starts at the window-th observation.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    s = _as_series(s)
    if s.empty:
        return s
    out = s.rolling(f"{window}D").mean()
    return out.iloc[window - 1:]


def standardize(s: pd.Series, policy: PreprocessPolicy = PreprocessPolicy(),
                cutoff: pd.Timestamp | None = None) -> tuple[pd.Series, float, float]:
    """Z-score a series; returns ``(z, mean, sd)``.

    With ``TrainOnly`` scope the moments come from observations dated on or
    before the cutoff and are applied to the whole series.
    """
    s = _as_series(s)
    ref = s
    if policy.standardization_scope == "TrainOnly":
        cut = pd.Timestamp(cutoff if cutoff is not None else policy.cutoff)
        ref = s[s.index <= cut]
    if len(ref) < 2:
        raise DegenerateSeriesError("need at least two observations to standardize")
    mean = float(ref.mean())
    sd = float(ref.std(ddof=1))
    if not sd > 1e-12:
        raise DegenerateSeriesError(f"standard deviation {sd:g} too small")
    return (s - mean) / sd, mean, sd


def destandardize(z: pd.Series, mean: float, sd: float) -> pd.Series:
    return z * sd + mean


def coverage(s: pd.Series, center, half_width: int) -> float:
    """Fraction of days in ``[center - h, center + h]`` with an observation."""
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    center = pd.Timestamp(center)
    lo, hi = center - pd.Timedelta(days=half_width), center + pd.Timedelta(days=half_width)
    idx = pd.DatetimeIndex(s.index)
    n = int(((idx >= lo) & (idx <= hi)).sum())
    return n / (2 * half_width + 1)


def interpolate_short_gaps(s: pd.Series, max_gap: int = 7) -> pd.Series:
    """Linearly fill runs of at most ``max_gap`` missing days between observations."""
    if max_gap < 1:
        raise ValueError("max_gap must be >= 1")
    s = _as_series(s).dropna()
    if len(s) < 2:
        return s
    days = (s.index - s.index[0]).days.to_numpy()
    vals = s.to_numpy()
    gaps = np.diff(days) - 1
    fill_dates, fill_vals = [], []
    for k in np.flatnonzero((gaps >= 1) & (gaps <= max_gap)):
        d0, d1 = days[k], days[k + 1]
        new = np.arange(d0 + 1, d1)
        fill_dates.append(new)
        fill_vals.append(vals[k] + (vals[k + 1] - vals[k]) * (new - d0) / (d1 - d0))
    if not fill_dates:
        return s
    extra = pd.Series(np.concatenate(fill_vals),
                      index=s.index[0] + pd.to_timedelta(np.concatenate(fill_dates), unit="D"))
    return pd.concat([s, extra]).sort_index()


def preprocess(panel: Panel, policy: PreprocessPolicy = PreprocessPolicy()) -> tuple[Panel, pd.DataFrame]:
    """Smooth and standardize every series.

    Returns the new panel and a table of the standardization moments.
    Degenerate series are dropped and logged; a country whose CDS series is
    dropped leaves the panel.
    """
    stats = []

    def run(key, s):
        out = moving_average(s, policy.ma_window)
        if policy.standardize:
            out, mu, sd = standardize(out, policy)
            stats.append({"country": key[0], "variable": key[1], "mean": mu, "sd": sd})
        return out

    local, glob = {}, {}
    for key, s in panel.local.items():
        try:
            local[key] = run(key, s)
        except DegenerateSeriesError as exc:
            logger.warning("dropping %s/%s: %s", key[0], key[1], exc)
    for v, s in panel.global_series.items():
        try:
            glob[v] = run((GLOBAL_CODE, v), s)
        except DegenerateSeriesError as exc:
            logger.warning("dropping global %s: %s", v, exc)
    return panel.with_series(local, glob), pd.DataFrame(stats, columns=["country", "variable", "mean", "sd"])


def panel_from_frame(df: pd.DataFrame, regions: Mapping[str, Region] | None = None) -> Panel:
    """Build a panel from a long frame with the CSV columns (no line tracking)."""
    regions = dict(DEFAULT_REGIONS if regions is None else regions)
    local, glob = {}, {}
    for (c, v), g in df.groupby(["country", "variable"], sort=True):
        s = pd.Series(g["value"].to_numpy(float), index=pd.DatetimeIndex(g["date"])).sort_index()
        if v in GLOBAL_VARIABLES:
            glob.setdefault(v, s)
        else:
            local[(c, v)] = s
    countries = {c: CountryMeta(c, regions[c]) for c, v in local if v == "CDS"}
    return Panel(countries, local, glob)


def countries_in(regions: Mapping[str, Region], region: Region) -> list[str]:
    return sorted(c for c, r in regions.items() if r == region)


def iter_dates(start, end, step_days: int) -> Iterable[pd.Timestamp]:
    d, end = pd.Timestamp(start), pd.Timestamp(end)
    while d <= end:
        yield d
        d += pd.Timedelta(days=step_days)
