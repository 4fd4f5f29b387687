import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sovrisk.models import FAMILIES, INFOSETS, HyperparamError, ModelSpec, fit, from_arrays, load_defaults
from sovrisk.models import registry
from sovrisk.models.registry import region_groups, sample_params, validate

# (family, infoset) -> expected values from the reference hyperparameter tables
REFERENCE = {
    ("GradientBoosting", "MarketsPlusNews"): dict(n_estimators=535, learning_rate=0.012, max_depth=8, subsample=0.97,
                                                  colsample_bytree=0.62, min_child_weight=3),
    ("GradientBoosting", "MarketsOnly"): dict(n_estimators=145, learning_rate=0.034, max_depth=5, subsample=0.68,
                                              colsample_bytree=0.69, min_child_weight=2),
    ("Bagging", "MarketsPlusNews"): dict(max_depth=40, min_samples_split=5, min_samples_leaf=8, max_features=0.67),
    ("Bagging", "MarketsOnly"): dict(max_depth=6, min_samples_split=14, min_samples_leaf=3, max_features=0.93),
    ("RandomForest", "MarketsPlusNews"): dict(max_depth=60, min_samples_split=5, min_samples_leaf=4,
                                              max_features=0.10),
    ("RandomForest", "MarketsOnly"): dict(max_depth=115, min_samples_split=4, min_samples_leaf=20,
                                          max_features=0.12),
    ("ExtraTrees", "MarketsPlusNews"): dict(max_depth=139, min_samples_split=3, min_samples_leaf=1,
                                            max_features=0.22),
    ("ExtraTrees", "MarketsOnly"): dict(max_depth=128, min_samples_split=6, min_samples_leaf=10, max_features=0.38),
    ("Lasso", "MarketsPlusNews"): {"lambda": 0.027},
    ("Lasso", "MarketsOnly"): {"lambda": 0.018},
    ("Ridge", "MarketsPlusNews"): {"lambda": 1000.0},
    ("Ridge", "MarketsOnly"): {"lambda": 0.010},
    ("ElasticNet", "MarketsPlusNews"): {"lambda": 0.034, "rho": 0.82},
    ("ElasticNet", "MarketsOnly"): {"lambda": 0.016, "rho": 0.94},
    ("QuantileReg", "MarketsPlusNews"): {"tau": 0.5, "lambda": 0.019},
    ("PCR", "MarketsPlusNews"): {"K": 47},
    ("PCR", "MarketsOnly"): {"K": 43},
    ("FactorRidge", "MarketsPlusNews"): {"n_factors": 13, "lambda": 25.0},
    ("FactorRidge", "MarketsOnly"): {"n_factors": 20, "lambda": 3.5},
}
REFERENCE_GROUPS = {
    ("MultilayerRF_2S", "MarketsPlusNews"): {"stage1": (28, 0.69, 0.59, 17), "stage2": (35, 0.78, 0.30, 14)},
    ("MultilayerRF_2S", "MarketsOnly"): {"stage1": (16, 0.89, 0.72, 20), "stage2": (29, 0.77, 0.35, 50)},
    ("MultilayerRF_1S", "MarketsPlusNews"): {"AE": (27, 0.87, 0.73, 10), "EM": (41, 0.67, 0.35, 14)},
    ("MultilayerRF_1S", "MarketsOnly"): {"AE": (15, 0.83, 0.67, 23), "EM": (24, 0.60, 0.36, 40)},
}
GROUP_FIELDS = ("max_depth", "subsample", "colsample_bynode", "min_child_weight")


def test_defaults_cover_every_family_and_infoset():
    table = load_defaults()
    assert set(table) == {(f, i) for f in FAMILIES for i in INFOSETS}
    for (f, _), params in table.items():
        validate(f, params)


@pytest.mark.parametrize("key", sorted(REFERENCE))
def test_defaults_match_reference(key):
    got = load_defaults()[key]
    for name, value in REFERENCE[key].items():
        assert got[name] == value and type(got[name]) is type(value)


@pytest.mark.parametrize("key", sorted(REFERENCE_GROUPS))
def test_group_defaults_match_reference(key):
    got = load_defaults()[key]
    for group, values in REFERENCE_GROUPS[key].items():
        assert tuple(got[group][f] for f in GROUP_FIELDS) == values


def test_defaults_roundtrip_through_file(tmp_path):
    table = load_defaults()
    lines = []
    for (fam, inf), params in sorted(table.items()):
        if fam in registry.GROUP_KEYS:
            for g, sub in params.items():
                lines.append(f"[{fam}.{inf}.{g}]")
                lines += [f"{k} = {json.dumps(v)}" for k, v in sub.items()]
        else:
            lines.append(f"[{fam}.{inf}]")
            lines += [f"{k} = {json.dumps(v)}" for k, v in params.items()]
    path = tmp_path / "h.toml"
    path.write_text("\n".join(lines) + "\n")
    assert load_defaults(path) == table


@pytest.mark.parametrize("bad", [{"lambda": -1.0}, {"lambda": "x"}, {"lambda": 1.0, "rho": 2.0}, {}])
def test_invalid_hyperparameters_rejected(bad):
    with pytest.raises(HyperparamError):
        validate("Lasso", bad)


def test_spec_overrides_and_roundtrip():
    s = ModelSpec.default("MultilayerRF_2S", "MarketsOnly", seed=4, n_estimators=7, **{"stage2.max_depth": 3})
    assert s.hyperparams["stage1"]["n_estimators"] == 7 and s.hyperparams["stage2"]["max_depth"] == 3
    assert ModelSpec.from_dict(json.loads(s.canonical())) == s
    with pytest.raises(HyperparamError):
        ModelSpec.default("ExtraTrees", max_depth=0)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(0, 2**32 - 1))
def test_sampled_points_validate(family, seed):
    p = sample_params(family, np.random.default_rng(seed))
    assert validate(family, p) == p


def test_region_groups_split_ae_and_em():
    regions = {"USA": "AdvancedEconomies", "BRA": "EMLatam", "TUR": "EMEurope"}
    params = load_defaults()[("MultilayerRF_2S", "MarketsPlusNews")]
    cg, gp = region_groups("MultilayerRF_2S", regions, params)
    assert cg == {"USA": "AdvancedEconomies", "BRA": "EMLatam", "TUR": "EMEurope"}
    assert gp["AdvancedEconomies"]["max_depth"] == 28 and gp["EMLatam"]["max_depth"] == 35


def test_pcr_k_clipped_to_rank(rng, caplog):
    X = rng.normal(size=(60, 2))
    d = from_arrays(X, X @ [1.0, -1.0], rng.choice(["A", "B"], 60))
    m = fit(ModelSpec.default("PCR", "MarketsPlusNews"), d)
    assert m.info["K"] == 3 and "clipped" in caplog.text
