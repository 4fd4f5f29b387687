import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sovrisk.panel import (DEFAULT_REGIONS, GLOBAL_CODE, VARIABLES, DegenerateSeriesError, PanelValidationError,
                           PreprocessPolicy, Region, coverage, interpolate_short_gaps, load_panel, load_regions,
                           moving_average, preprocess, save_panel, standardize)
from sovrisk.synth import DGPSpec, generate


def _write(path, rows):
    path.write_text("date,country,variable,value\n" + "".join(f"{r}\n" for r in rows))
    return path


def test_taxonomy_counts():
    counts = pd.Series([r.value for r in DEFAULT_REGIONS.values()]).value_counts()
    assert len(DEFAULT_REGIONS) == 42
    assert counts["AdvancedEconomies"] == 16
    assert counts["EMAsia"] == 7 and counts["EMLatam"] == 7
    assert counts["EMEurope"] == 6 and counts["EMMENA"] == 6


def test_load_tiny_panel(tmp_path):
    p = _write(tmp_path / "p.csv", ["2020-01-01,USA,CDS,1.0", "2020-01-02,USA,CDS,2.0",
                                    "2020-01-01,USA,GPR,0.5", "2020-01-03,USA,GPR,0.7"])
    panel = load_panel(p)
    assert len(panel.local) == 2
    assert panel.span == (pd.Timestamp("2020-01-01"), pd.Timestamp("2020-01-03"))
    assert panel.regions() == {"USA": Region.AdvancedEconomies}


def test_duplicate_key_is_named(tmp_path):
    p = _write(tmp_path / "p.csv", ["2020-01-01,USA,CDS,1.0", "2020-01-01,USA,CDS,2.0"])
    with pytest.raises(PanelValidationError) as exc:
        load_panel(p)
    assert "duplicate key (2020-01-01,USA,CDS)" in str(exc.value)
    assert exc.value.problems[0][0] == 3


def test_bad_rows_report_line_numbers(tmp_path):
    p = _write(tmp_path / "p.csv", ["2020-01-01,USA,CDS,1.0", "2020-13-01,USA,CDS,2.0", "2020-01-02,XXX,CDS,1",
                                    "2020-01-02,USA,FOO,1", "2020-01-02,USA,CDS,nan"])
    with pytest.raises(PanelValidationError) as exc:
        load_panel(p)
    assert [ln for ln, _ in exc.value.problems] == [3, 4, 5, 6]


def test_global_series_stored_once(tmp_path):
    rows = ["2020-01-01,USA,CDS,1", "2020-01-01,DEU,CDS,2", "2020-01-01,USA,VIX,15", "2020-01-01,DEU,VIX,15",
            f"2020-01-02,{GLOBAL_CODE},VIX,16"]
    panel = load_panel(_write(tmp_path / "p.csv", rows))
    assert list(panel.global_series) == ["VIX"]
    assert panel.get("USA", "VIX") is panel.get("DEU", "VIX")
    assert panel.get("USA", "VIX").tolist() == [15.0, 16.0]


def test_conflicting_global_copies_rejected(tmp_path):
    rows = ["2020-01-01,USA,CDS,1", "2020-01-01,DEU,CDS,2", "2020-01-01,USA,VIX,15", "2020-01-01,DEU,VIX,14"]
    with pytest.raises(PanelValidationError):
        load_panel(_write(tmp_path / "p.csv", rows))


def test_roundtrip_and_42_country_fixture(tmp_path):
    panel, _ = generate(DGPSpec(n_days=60))
    assert len(panel.countries) == 42
    assert len(panel.series_keys()) == 42 * len(VARIABLES)
    save_panel(panel, tmp_path / "x.csv")
    again = load_panel(tmp_path / "x.csv")
    assert again.fingerprint() == panel.fingerprint()


def test_regions_override(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("country,region\nUSA,EMAsia\n")
    assert load_regions(f)["USA"] is Region.EMAsia
    f.write_text("country,region\nUSA,Mars\n")
    with pytest.raises(PanelValidationError):
        load_regions(f)


def _daily(values, start="2020-01-01"):
    return pd.Series(values, index=pd.date_range(start, periods=len(values), freq="D"), dtype=float)


def test_moving_average_constant_and_arithmetic():
    assert np.allclose(moving_average(_daily(np.full(40, 5.0)), 7), 5.0)
    out = moving_average(_daily(np.arange(1, 41)), 28)
    assert out.iloc[0] == 14.5
    assert out.index[0] == pd.Timestamp("2020-01-28")


def test_moving_average_with_gap_matches_enumeration():
    s = _daily(np.random.default_rng(0).normal(size=60))
    s = s.drop(s.index[20:23])
    w = 10
    out = moving_average(s, w)
    for t, v in out.items():
        window = s[(s.index > t - pd.Timedelta(days=w)) & (s.index <= t)]
        assert abs(window.mean() - v) < 1e-12
    assert len(out) == len(s) - (w - 1)


def test_standardize_moments_and_degenerate():
    z, mu, sd = standardize(_daily(np.random.default_rng(1).normal(3, 2, 200)))
    assert abs(z.mean()) < 1e-10 and abs(z.std(ddof=1) - 1) < 1e-10
    with pytest.raises(DegenerateSeriesError):
        standardize(_daily(np.full(10, 2.0)))


def test_standardize_train_only_uses_precutoff_moments():
    s = _daily(np.random.default_rng(2).normal(size=100))
    cut = s.index[59]
    pol = PreprocessPolicy(standardization_scope="TrainOnly", cutoff=cut)
    z, mu, sd = standardize(s, pol)
    ref = s.iloc[:60]
    assert mu == pytest.approx(ref.mean(), abs=1e-14) and sd == pytest.approx(ref.std(ddof=1), abs=1e-14)
    assert np.allclose(z.iloc[60:], (s.iloc[60:] - ref.mean()) / ref.std(ddof=1), atol=1e-14)


def test_coverage():
    s = _daily(np.ones(400))
    assert coverage(s, "2020-06-01", 30) == 1.0
    half = s[::2]
    c = coverage(half, "2020-06-01", 30)
    assert c == pytest.approx(31 / 61)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=30, max_size=200), st.integers(1, 60))
def test_coverage_matches_day_count(mask, h):
    s = _daily(np.arange(len(mask)))[np.array(mask)]
    center = pd.Timestamp("2020-01-01") + pd.Timedelta(days=len(mask) // 2)
    days = pd.date_range(center - pd.Timedelta(days=h), center + pd.Timedelta(days=h))
    expect = sum(d in set(s.index) for d in days) / len(days)
    assert coverage(s, center, h) == expect


def test_interpolate_short_gaps():
    s = pd.Series([2.0, 4.0], index=pd.to_datetime(["2020-01-01", "2020-01-03"]))
    out = interpolate_short_gaps(s, 7)
    assert out.tolist() == [2.0, 3.0, 4.0]
    far = pd.Series([2.0, 4.0], index=pd.to_datetime(["2020-01-01", "2020-01-20"]))
    assert interpolate_short_gaps(far, 7).equals(far)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=5, max_size=120), st.integers(1, 10))
def test_interpolation_idempotent(mask, g):
    s = _daily(np.random.default_rng(len(mask)).normal(size=len(mask)))[np.array(mask)]
    once = interpolate_short_gaps(s, g)
    assert interpolate_short_gaps(once, g).equals(once)


def test_preprocess_drops_degenerate(small_raw):
    raw = small_raw[0]
    c = raw.country_codes[0]
    local = dict(raw.local)
    local[(c, "EPU")] = pd.Series(1.0, index=local[(c, "EPU")].index)
    out, stats = preprocess(raw.with_series(local, raw.global_series))
    assert not out.has(c, "EPU")
    assert len(stats) == len(out.local) + len(out.global_series)
