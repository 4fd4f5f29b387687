"""Model specifications, hyperparameter schemas and the uniform fit entry point."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..panel import Region
from . import linear, trees
from .design import INFOSETS, DesignMatrix

logger = logging.getLogger(__name__)

FAMILIES = ("OLS_FE", "Lasso", "Ridge", "ElasticNet", "QuantileReg", "PCR", "FactorRidge", "GradientBoosting",
            "Bagging", "RandomForest", "ExtraTrees", "MultilayerRF_1S", "MultilayerRF_2S")
LINEAR_FAMILIES = FAMILIES[:7]
TREE_FAMILIES = FAMILIES[7:]
GROUP_KEYS = {"MultilayerRF_2S": ("stage1", "stage2"), "MultilayerRF_1S": ("AE", "EM")}


class HyperparamError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    """One hyperparameter: type, valid closed range and random-search range."""

    kind: type
    low: float
    high: float
    search: tuple[float, float]
    log: bool = False


INF = math.inf
_FOREST = {
    "n_estimators": Param(int, 1, INF, (1000, 1000)),
    "max_depth": Param(int, 1, INF, (2, 150)),
    "min_samples_split": Param(int, 2, INF, (2, 20)),
    "min_samples_leaf": Param(int, 1, INF, (1, 25)),
    "max_features": Param(float, 1e-9, 1.0, (0.05, 1.0)),
}
_REGION_FOREST = {
    "n_estimators": Param(int, 1, INF, (1000, 1000)),
    "max_depth": Param(int, 1, INF, (2, 60)),
    "subsample": Param(float, 1e-9, 1.0, (0.5, 1.0)),
    "colsample_bynode": Param(float, 1e-9, 1.0, (0.2, 1.0)),
    "min_child_weight": Param(int, 1, INF, (1, 60)),
}
SCHEMAS: dict[str, dict[str, Param]] = {
    "OLS_FE": {},
    "Lasso": {"lambda": Param(float, 0.0, INF, (1e-4, 10.0), log=True)},
    "Ridge": {"lambda": Param(float, 0.0, INF, (1e-3, 1e4), log=True)},
    "ElasticNet": {"lambda": Param(float, 0.0, INF, (1e-4, 10.0), log=True),
                   "rho": Param(float, 0.0, 1.0, (0.0, 1.0))},
    "QuantileReg": {"tau": Param(float, 1e-9, 1 - 1e-9, (0.5, 0.5)),
                    "lambda": Param(float, 0.0, INF, (1e-4, 10.0), log=True)},
    "PCR": {"K": Param(int, 1, INF, (1, 60))},
    "FactorRidge": {"n_factors": Param(int, 1, INF, (1, 30)),
                    "lambda": Param(float, 0.0, INF, (1e-2, 1e3), log=True)},
    "GradientBoosting": {
        "n_estimators": Param(int, 0, INF, (50, 600)),
        "learning_rate": Param(float, 0.0, INF, (0.005, 0.3), log=True),
        "max_depth": Param(int, 1, INF, (2, 10)),
        "subsample": Param(float, 1e-9, 1.0, (0.5, 1.0)),
        "colsample_bytree": Param(float, 1e-9, 1.0, (0.3, 1.0)),
        "min_child_weight": Param(int, 1, INF, (1, 50)),
    },
    "Bagging": _FOREST,
    "RandomForest": _FOREST,
    "ExtraTrees": _FOREST,
    "MultilayerRF_1S": _REGION_FOREST,
    "MultilayerRF_2S": _REGION_FOREST,
}


def _check_value(family: str, name: str, value, p: Param):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise HyperparamError(f"{family}.{name}: expected a number, got {value!r}")
    if p.kind is int:
        if float(value) != int(value):
            raise HyperparamError(f"{family}.{name}: expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if not (p.low <= value <= p.high) or (isinstance(value, float) and math.isnan(value)):
        raise HyperparamError(f"{family}.{name}={value} outside [{p.low}, {p.high}]")
    return value


def validate(family: str, params: Mapping) -> dict:
    """Check ``params`` against the family schema; returns a normalised copy."""
    if family not in SCHEMAS:
        raise HyperparamError(f"unknown model family {family!r}; known: {list(FAMILIES)}")
    schema = SCHEMAS[family]
    if family in GROUP_KEYS:
        want = set(GROUP_KEYS[family])
        if set(params) != want:
            raise HyperparamError(f"{family}: expected parameter groups {sorted(want)}, got {sorted(params)}")
        return {g: validate_flat(family, schema, params[g]) for g in GROUP_KEYS[family]}
    return validate_flat(family, schema, params)


def validate_flat(family: str, schema: Mapping[str, Param], params: Mapping) -> dict:
    unknown = sorted(set(params) - set(schema))
    missing = sorted(set(schema) - set(params))
    if unknown or missing:
        raise HyperparamError(f"{family}: unknown parameters {unknown}, missing parameters {missing}")
    return {k: _check_value(family, k, params[k], schema[k]) for k in schema}


def load_defaults(path: str | Path | None = None) -> dict[tuple[str, str], dict]:
    """Parse the defaults table into ``{(family, infoset): params}``."""
    if path is None:
        text = resources.files("sovrisk.models").joinpath("hyperparams.toml").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = tomllib.loads(text)
    out = {}
    for family, by_infoset in raw.items():
        for infoset, params in by_infoset.items():
            if infoset not in INFOSETS:
                raise HyperparamError(f"{family}: unknown information set {infoset!r}")
            out[(family, infoset)] = validate(family, params)
    return out


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparams: dict = field(hash=False)
    infoset: str = "MarketsPlusNews"
    seed: int = 0

    def __post_init__(self):
        if self.infoset not in INFOSETS:
            raise HyperparamError(f"unknown information set {self.infoset!r}")
        object.__setattr__(self, "hyperparams", validate(self.family, self.hyperparams))

    @classmethod
    def default(cls, family: str, infoset: str = "MarketsPlusNews", seed: int = 0, defaults=None,
                **overrides) -> "ModelSpec":
        """Spec from the defaults table, with top-level (or ``group.key``) overrides."""
        table = load_defaults() if defaults is None else defaults
        try:
            params = json.loads(json.dumps(table[(family, infoset)]))
        except KeyError:
            raise HyperparamError(f"no defaults for ({family}, {infoset})") from None
        for key, value in overrides.items():
            if family in GROUP_KEYS and "." not in key:
                for g in params:
                    params[g][key] = value
            elif "." in key:
                g, k = key.split(".", 1)
                params[g][k] = value
            else:
                params[key] = value
        return cls(family, params, infoset, seed)

    def to_dict(self) -> dict:
        return {"family": self.family, "infoset": self.infoset, "seed": self.seed, "hyperparams": self.hyperparams}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(d["family"], dict(d["hyperparams"]), d.get("infoset", "MarketsPlusNews"), int(d.get("seed", 0)))

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def region_groups(family: str, regions: Mapping[str, Region], params: Mapping) -> tuple[dict, dict]:
    """Country -> group name and group -> forest kwargs for the multilayer forests."""
    ae_key, em_key = GROUP_KEYS[family]
    country_group, group_params = {}, {}
    for c, r in regions.items():
        r = Region(r)
        country_group[c] = r.value
        src = params[ae_key] if r is Region.AdvancedEconomies else params[em_key]
        group_params[r.value] = dict(max_depth=src["max_depth"], subsample=src["subsample"],
                                     feature_fraction=src["colsample_bynode"],
                                     min_child_weight=src["min_child_weight"], n_estimators=src["n_estimators"])
    return country_group, group_params


def fit(spec: ModelSpec, d: DesignMatrix, regions: Mapping[str, Region] | None = None):
    """Fit ``spec`` on ``d``; ``regions`` is needed by the multilayer forests."""
    h, s = spec.hyperparams, spec.seed
    fam = spec.family
    if fam == "OLS_FE":
        return linear.fit_ols_fe(d, seed=s)
    if fam == "Lasso":
        return linear.fit_lasso(d, h["lambda"], seed=s)
    if fam == "Ridge":
        return linear.fit_ridge(d, h["lambda"], seed=s)
    if fam == "ElasticNet":
        return linear.fit_elastic_net(d, h["lambda"], h["rho"], seed=s)
    if fam == "QuantileReg":
        return linear.fit_quantile(d, h["tau"], h["lambda"], seed=s)
    if fam in ("PCR", "FactorRidge"):
        key = "K" if fam == "PCR" else "n_factors"
        rank = linear.design_rank(d)
        k = h[key]
        if k > rank:
            logger.warning("%s: %s=%d exceeds design rank %d; clipped", fam, key, k, rank)
            k = rank
        if fam == "PCR":
            return linear.fit_pcr(d, k, seed=s)
        return linear.fit_factor_ridge(d, k, h["lambda"], seed=s)
    if fam == "GradientBoosting":
        return trees.fit_gradient_boosting(d, seed=s, **h)
    if fam == "Bagging":
        return trees.fit_bagging(d, seed=s, **h)
    if fam == "RandomForest":
        return trees.fit_random_forest(d, seed=s, **h)
    if fam == "ExtraTrees":
        return trees.fit_extra_trees(d, seed=s, **h)
    if fam in GROUP_KEYS:
        if regions is None:
            raise ValueError(f"{fam} needs a country-to-region map")
        country_group, group_params = region_groups(fam, regions, h)
        return trees.fit_multilayer(d, country_group, group_params, variant=fam[-2:], seed=s)
    raise HyperparamError(f"unknown model family {fam!r}")


def predict(model, d: DesignMatrix) -> np.ndarray:
    return model.predict(d)


def sample_params(family: str, rng: np.random.Generator, fixed: Mapping | None = None) -> dict:
    """Draw one point from the family's search ranges; ``fixed`` pins values."""
    fixed = dict(fixed or {})

    def draw(schema):
        out = {}
        for name, p in schema.items():
            lo, hi = p.search
            if p.log:
                v = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            else:
                v = float(rng.uniform(lo, hi))
            out[name] = int(round(v)) if p.kind is int else v
        return out

    schema = SCHEMAS[family]
    if family in GROUP_KEYS:
        params = {g: draw(schema) for g in GROUP_KEYS[family]}
        for key, value in fixed.items():
            for g in params:
                params[g][key] = value
    else:
        params = draw(schema)
        params.update(fixed)
    return validate(family, params)
