import contextlib
import hashlib
import io
import json
from pathlib import Path

import pandas as pd
import pytest

from sovrisk.cli import DEFAULTS, main, resolve_config


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue().strip(), err.getvalue()


def sha(p):
    return hashlib.sha256(Path(p).read_bytes()).hexdigest()


SMALL = ["--set", "synth.n_countries=5", "--set", "synth.n_days=500", "--set", "synth.seed=7"]
RACE = ["--set", "models.families=['OLS_FE', 'Ridge', 'ExtraTrees']", "--set", "hyper.ExtraTrees.n_estimators=10",
        "--set", "plan.first_origin='2020-01-01'", "--set", "plan.refit_every=60"]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    code, run_dir, err = run_cli("synth", "--out", out, "--jobs", 1, *SMALL)
    assert code == 0, err
    return out, Path(run_dir)


@pytest.fixture(scope="module")
def race_dir(synth_dir):
    out, sd = synth_dir
    code, run_dir, err = run_cli("horserace", "--out", out, "--jobs", 1, "--set", f"paths.panel='{sd / 'panel.csv'}'",
                                 "--set", f"paths.regions='{sd / 'regions.csv'}'", *RACE)
    assert code == 0, err
    return Path(run_dir)


def test_synth_outputs(synth_dir):
    _, sd = synth_dir
    for name in ("panel.csv", "truth.csv", "regions.csv", "manifest.json"):
        assert (sd / name).is_file()
    man = json.loads((sd / "manifest.json").read_text())
    assert man["command"] == "synth" and man["config"]["synth.n_countries"] == 5
    assert set(man["outputs"]) == {"panel.csv", "truth.csv", "regions.csv"}


def test_preprocess(synth_dir):
    out, sd = synth_dir
    before = sha(sd / "panel.csv")
    code, rd, err = run_cli("preprocess", "--out", out, "--set", f"paths.panel='{sd / 'panel.csv'}'")
    assert code == 0, err
    assert (Path(rd) / "moments.csv").is_file() and sha(sd / "panel.csv") == before


def test_horserace_outputs(race_dir):
    for name in ("ledger.csv", "metrics.csv", "news_increment.csv", "table1.csv", "fingerprints.csv",
                 "news_gain.svg"):
        assert (race_dir / name).is_file(), name
    t1 = pd.read_csv(race_dir / "table1.csv")
    assert list(t1["model"]) == ["OLS_FE", "Ridge", "ExtraTrees"]


def test_horserace_replay_is_byte_identical(race_dir):
    code, rd, err = run_cli("horserace", "--replay", race_dir / "manifest.json", "--jobs", 3)
    assert code == 0, err
    for name in ("ledger.csv", "metrics.csv", "table1.csv", "news_increment.csv"):
        assert sha(Path(rd) / name) == sha(race_dir / name)


def test_explain_connect_report(synth_dir, race_dir):
    out, sd = synth_dir
    base = ["--out", out, "--jobs", 1, "--set", f"paths.panel='{sd / 'panel.csv'}'",
            "--set", f"paths.regions='{sd / 'regions.csv'}'"]
    code, ed, err = run_cli("explain", *base, "--set", "hyper.ExtraTrees.n_estimators=5",
                            "--set", "hyper.ExtraTrees.max_depth=6", "--set", "explain.features=['VIX']")
    assert code == 0, err
    ed = Path(ed)
    for name in ("attribution.csv", "interactions.csv", "importance.csv", "interactions_VIX.csv",
                 "dependence_VIX.csv", "model.json"):
        assert (ed / name).is_file(), name
    man = json.loads((ed / "manifest.json").read_text())
    assert man["local_accuracy_gap"] < 1e-8
    code, rd, err = run_cli("explain", "--replay", ed / "manifest.json")
    assert code == 0, err
    assert sha(Path(rd) / "attribution.csv") == sha(ed / "attribution.csv")

    code, cd, err = run_cli("connect", "--out", out, "--jobs", 1, "--set", f"paths.cube='{ed / 'attribution.csv'}'",
                            "--set", "connect.features=['VIX', 'FED']", "--set", "connect.start='2019-09-01'",
                            "--set", "connect.end='2020-03-01'", "--set", "connect.step_days=30")
    assert code == 0, err
    sp = pd.read_csv(Path(cd) / "spillover.csv")
    assert len(sp) == 2 * 7 and sp["S_dy"].notna().any()
    assert sp["S_dy"].dropna().between(0, 100).all()

    code, rp, err = run_cli("report", "--out", out, "--set", f"paths.ledger='{race_dir / 'ledger.csv'}'",
                            "--set", f"paths.regions='{sd / 'regions.csv'}'",
                            "--set", f"paths.spillover='{Path(cd) / 'spillover.csv'}'")
    assert code == 0, err
    assert sha(Path(rp) / "table1.csv") == sha(race_dir / "table1.csv")
    assert "Connectedness" in (Path(rp) / "report.md").read_text()


def test_corrupted_panel_exits_2(tmp_path, synth_dir):
    _, sd = synth_dir
    bad = tmp_path / "bad.csv"
    lines = (sd / "panel.csv").read_text().splitlines()
    lines[5] = lines[5].replace(lines[5].split(",")[0], "XXX", 1)
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run_cli("horserace", "--out", tmp_path, "--set", f"paths.panel='{bad}'")
    assert code == 2 and "line 6" in err


def test_missing_file_and_usage_errors(tmp_path):
    assert run_cli("horserace", "--out", tmp_path, "--set", "paths.panel='nope.csv'")[0] == 2
    assert run_cli("horserace", "--out", tmp_path, "--set", "bogus.key=1")[0] == 1
    assert run_cli("horserace", "--out", tmp_path, "--set", "novalue")[0] == 1
    assert run_cli("explode")[0] == 1
    assert run_cli("explain", "--out", tmp_path, "--set", "explain.family='Ridge'",
                   "--set", "paths.panel='x.csv'")[0] in (1, 2)


def test_set_overrides_config_file(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[plan]\nbuffer = 40\nrefit_every = 3\n[run]\nseed = 9\n')
    got = resolve_config(cfg, ["plan.buffer=50"])
    assert got["plan.buffer"] == 50 and got["plan.refit_every"] == 3 and got["run.seed"] == 9
    assert got["plan.horizon"] == DEFAULTS["plan.horizon"]
