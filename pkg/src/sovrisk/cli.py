"""Command-line entry point.

Every subcommand resolves a flat dotted-key configuration with precedence
``built-in defaults < --config file < --set KEY=VALUE < dedicated flags``
and writes its artifacts plus a ``manifest.json`` into a fresh run directory
``<out>/<command>-<UTC timestamp>-<config hash>``. ``--replay MANIFEST``
reruns a previous configuration.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import pandas as pd

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness, svg
from .attribution import (ModelIntegrityError, dependence_curve, interaction_heatmap, read_cube,
                          summarize_importance, tree_shap)
from .connect import VarError, WindowPlan, rolling_connectedness
from .models import (COUNTRY_FEATURE, FAMILIES, INFOSETS, TREE_FAMILIES, ConvergenceError, HyperparamError,
                     ModelSpec, RankDeficiencyError, SchemaMismatchError, build_design, infoset_features,
                     load_defaults, load_model, save_model)
from .models import registry
from .panel import (DegenerateSeriesError, PanelValidationError, PreprocessPolicy, load_panel, load_regions,
                    preprocess, save_panel)
from .synth import DGPSpec, generate

logger = logging.getLogger("sovrisk")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS: dict[str, object] = {
    "run.out": "runs",
    "run.seed": 0,
    "paths.panel": "",
    "paths.regions": "",
    "paths.hyperparams": "",
    "paths.cube": "",
    "paths.ledger": "",
    "paths.spillover": "",
    "preprocess.enabled": True,
    "preprocess.ma_window": 28,
    "preprocess.standardize": True,
    "preprocess.scope": "FullSample",
    "preprocess.cutoff": "",
    "plan.first_origin": "2021-02-01",
    "plan.last_origin": "",
    "plan.refit_every": 7,
    "plan.buffer": 28,
    "plan.horizon": 1,
    "models.families": list(FAMILIES),
    "models.infosets": list(INFOSETS),
    "tune.enabled": False,
    "tune.budget": 50,
    "tune.train_end": "2021-01-31",
    "tune.step": 60,
    "tune.folds": 5,
    "tune.metric": "MAE",
    "explain.family": "ExtraTrees",
    "explain.infoset": "MarketsPlusNews",
    "explain.model": "",
    "explain.train_end": "",
    "explain.interactions": True,
    "explain.max_rows": 0,
    "explain.features": [],
    "explain.heatmap_key": "VIX",
    "explain.loess_frac": 0.4,
    "explain.robust_iters": 1,
    "connect.features": [],
    "connect.start": "2021-01-01",
    "connect.end": "",
    "connect.step_days": 7,
    "connect.H": 10,
    "connect.tau": 0.4,
    "connect.p_max": 4,
    "connect.n_max": 10,
    "connect.coverage": 0.7,
    "connect.target_lag": 3,
}
_SYNTH_FIELDS = {f.name: f for f in dataclasses.fields(DGPSpec) if f.name not in ("loadings", "regions")}
for _name, _f in _SYNTH_FIELDS.items():
    _v = _f.default if _f.default is not dataclasses.MISSING else None
    DEFAULTS[f"synth.{_name}"] = list(_v) if isinstance(_v, tuple) else _v

# keys that change how a run executes but not what it computes
_VOLATILE = ("run.out",)


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------------
# configuration


def _flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_value(text: str):
    """TOML scalar or array syntax; anything unparsable is taken as a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _check_key(key: str) -> None:
    if key in DEFAULTS:
        return
    if key.startswith("hyper."):
        parts = key.split(".")
        if len(parts) in (3, 4) and parts[1] in FAMILIES:
            return
    raise UsageError(f"unknown configuration key {key!r}")


def resolve_config(config_path=None, sets=(), base: dict | None = None) -> dict:
    cfg = dict(DEFAULTS)
    if base is not None:
        cfg.update(base)
    if config_path:
        try:
            with open(config_path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {config_path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"cannot parse {config_path}: {exc}") from None
        cfg.update(_flatten(doc))
    for item in sets:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = parse_value(v.strip())
    for k in cfg:
        _check_key(k)
    return cfg


def config_hash(cfg: dict, command: str) -> str:
    core = {k: v for k, v in cfg.items() if k not in _VOLATILE}
    text = json.dumps({"command": command, "config": core}, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _version() -> str:
    try:
        return metadata.version("sovrisk")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "0+unknown"


class Run:
    """A run directory plus the manifest accumulated while writing into it."""

    def __init__(self, command: str, cfg: dict, jobs: int):
        self.command, self.cfg, self.jobs = command, cfg, jobs
        self.hash = config_hash(cfg, command)
        stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S")
        root = Path(str(cfg["run.out"]))
        root.mkdir(parents=True, exist_ok=True)
        base = root / f"{command}-{stamp}-{self.hash}"
        path, k = base, 0
        while path.exists():
            k += 1
            path = Path(f"{base}-{k}")
        path.mkdir()
        self.dir = path
        self.inputs: dict[str, str] = {}
        self.extra: dict[str, object] = {}

    def input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"input file not found: {p}")
        self.inputs[str(p)] = _sha256(p)
        return p

    def path(self, name: str) -> Path:
        return self.dir / name

    def finish(self) -> Path:
        outputs = {p.name: _sha256(p) for p in sorted(self.dir.iterdir()) if p.is_file()}
        manifest = {
            "tool": "sovrisk", "version": _version(), "command": self.command, "config_hash": self.hash,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "seed": self.cfg.get("run.seed"), "jobs": self.jobs, "config": self.cfg, "inputs": self.inputs,
            "outputs": outputs, **self.extra,
        }
        out = self.path("manifest.json")
        out.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        return out


def _csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


# ----------------------------------------------------------------------------
# shared steps


def _regions(run: Run, cfg: dict):
    if cfg["paths.regions"]:
        return load_regions(run.input(cfg["paths.regions"]))
    return load_regions()


def _load(run: Run, cfg: dict):
    if not cfg["paths.panel"]:
        raise UsageError("paths.panel is required")
    regions = _regions(run, cfg)
    panel = load_panel(run.input(cfg["paths.panel"]), regions)
    run.extra["panel_fingerprint"] = panel.fingerprint()
    if cfg["preprocess.enabled"]:
        panel, stats = preprocess(panel, _policy(cfg))
        run.extra["preprocessed_fingerprint"] = panel.fingerprint()
        run.extra["standardization_scope"] = cfg["preprocess.scope"]
    return panel


def _policy(cfg: dict) -> PreprocessPolicy:
    cutoff = pd.Timestamp(cfg["preprocess.cutoff"]) if cfg["preprocess.cutoff"] else None
    return PreprocessPolicy(int(cfg["preprocess.ma_window"]), bool(cfg["preprocess.standardize"]),
                            str(cfg["preprocess.scope"]), cutoff)


def _defaults(run: Run, cfg: dict):
    if cfg["paths.hyperparams"]:
        return load_defaults(run.input(cfg["paths.hyperparams"]))
    return load_defaults()


def _overrides(cfg: dict, family: str) -> dict:
    prefix = f"hyper.{family}."
    return {k[len(prefix):]: v for k, v in sorted(cfg.items()) if k.startswith(prefix)}


def _spec(cfg: dict, table, family: str, infoset: str) -> ModelSpec:
    if family not in FAMILIES:
        raise UsageError(f"unknown model family {family!r}")
    if infoset not in INFOSETS:
        raise UsageError(f"unknown information set {infoset!r}")
    return ModelSpec.default(family, infoset, int(cfg["run.seed"]), table, **_overrides(cfg, family))


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(run: Run, cfg: dict) -> None:
    kwargs = {}
    for name, f in _SYNTH_FIELDS.items():
        v = cfg[f"synth.{name}"]
        kwargs[name] = tuple(v) if isinstance(v, list) else v
    spec = DGPSpec(**kwargs)
    panel, truth = generate(spec)
    save_panel(panel, run.path("panel.csv"))
    truth = truth.assign(date=pd.to_datetime(truth["date"]).dt.strftime("%Y-%m-%d"))
    _csv(truth, run.path("truth.csv"))
    regions = pd.DataFrame({"country": list(panel.countries),
                            "region": [m.region.value for m in panel.countries.values()]})
    _csv(regions.sort_values("country"), run.path("regions.csv"))
    run.extra["vix_threshold"] = float(truth.attrs.get("vix_threshold", np.nan))
    run.extra["panel_fingerprint"] = panel.fingerprint()


def cmd_preprocess(run: Run, cfg: dict) -> None:
    regions = _regions(run, cfg)
    if not cfg["paths.panel"]:
        raise UsageError("paths.panel is required")
    panel = load_panel(run.input(cfg["paths.panel"]), regions)
    out, stats = preprocess(panel, _policy(cfg))
    save_panel(out, run.path("panel.csv"))
    _csv(stats, run.path("moments.csv"))
    run.extra["panel_fingerprint"] = panel.fingerprint()
    run.extra["preprocessed_fingerprint"] = out.fingerprint()


def _plan(cfg: dict, panel) -> harness.BacktestPlan:
    last = cfg["plan.last_origin"]
    horizon = int(cfg["plan.horizon"])
    if not last:
        last = (panel.span[1] - pd.Timedelta(days=horizon)).strftime("%Y-%m-%d")
    return harness.BacktestPlan(str(cfg["plan.first_origin"]), str(last), int(cfg["plan.refit_every"]),
                                int(cfg["plan.buffer"]), horizon, tuple(_as_list(cfg["models.infosets"])),
                                int(cfg["preprocess.ma_window"]))


def _write_scores(run: Run, records: pd.DataFrame, regions) -> pd.DataFrame:
    metrics = harness.score(records, harness.LEVELS, regions)
    _csv(metrics, run.path("metrics.csv"))
    mk, nw = harness.split_infosets(metrics)
    if not mk.empty and not nw.empty:
        inc = harness.news_increment(mk[mk["family"].isin(nw["family"])], nw[nw["family"].isin(mk["family"])])
        _csv(inc, run.path("news_increment.csv"))
        t1 = harness.table1(metrics, "pooled", "all")
        _csv(t1, run.path("table1.csv"))
        _csv(harness.table1(metrics, "global", "all"), run.path("table1_country_avg.csv"))
        if len(t1):
            svg.line_chart(run.path("news_gain.svg"),
                           {"RMSE": (np.arange(len(t1)), -t1["RMSE_pct_var"]),
                            "MAE": (np.arange(len(t1)), -t1["MAE_pct_var"])},
                           title="Accuracy gain from news (%)", ylabel="% reduction",
                           x_labels=list(t1["model"]))
    return metrics


def cmd_horserace(run: Run, cfg: dict) -> None:
    panel = _load(run, cfg)
    regions = panel.regions()
    table = _defaults(run, cfg)
    plan = _plan(cfg, panel)
    families = _as_list(cfg["models.families"])
    specs = [_spec(cfg, table, f, i) for i in plan.infosets for f in families]
    if cfg["tune.enabled"]:
        tuned, rows = [], []
        for s in specs:
            space = harness.SearchSpace(s.family, int(cfg["tune.budget"]), int(cfg["run.seed"]))
            res = harness.tune(panel, s.family, space, cfg["tune.train_end"], s.infoset, plan.buffer,
                               int(cfg["tune.step"]), int(cfg["tune.folds"]), str(cfg["tune.metric"]),
                               plan.horizon, regions, s.seed)
            rows.append(res.table.assign(family=s.family, infoset=s.infoset))
            tuned.append(ModelSpec(s.family, res.best, s.infoset, s.seed))
        _csv(pd.concat(rows, ignore_index=True), run.path("tuning.csv"))
        specs = tuned
    ledger = harness.run_backtest(panel, specs, plan, jobs=run.jobs, regions=regions)
    if ledger.records.empty:
        raise PanelValidationError([(None, "no forecast origin had training data")])
    ledger.to_csv(run.path("ledger.csv"))
    if not ledger.fingerprints.empty:
        _csv(ledger.fingerprints, run.path("fingerprints.csv"))
    _write_scores(run, ledger.records, regions)
    run.extra.update(plan=plan.to_dict(), specs=[s.to_dict() for s in specs], skipped=ledger.skipped,
                     ledger_sha256=harness.ledger_digest(ledger.records))


def _explain_cube(run: Run, cfg: dict, panel):
    if cfg["explain.model"]:
        model = load_model(run.input(cfg["explain.model"]))
        feats = tuple(f for f in model.feature_names if f != COUNTRY_FEATURE)
        d = build_design(panel, horizon=0, features=feats)
        family = model.family
    else:
        family, infoset = str(cfg["explain.family"]), str(cfg["explain.infoset"])
        if family not in TREE_FAMILIES:
            raise UsageError(f"attribution needs a tree family, got {family!r}")
        spec = _spec(cfg, _defaults(run, cfg), family, infoset)
        d = build_design(panel, infoset, horizon=0, features=infoset_features(infoset))
        if cfg["explain.train_end"]:
            d = d.subset(d.dates <= np.datetime64(pd.Timestamp(cfg["explain.train_end"]).date(), "D"))
        if d.n == 0:
            raise PanelValidationError([(None, "no complete rows to fit the attribution model")])
        model = registry.fit(spec, d, panel.regions())
        save_model(model, run.path("model.json"))
        run.extra["spec"] = spec.to_dict()
    rows = int(cfg["explain.max_rows"])
    if 0 < rows < d.n:
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg["run.seed"]), 1]))
        keep = np.zeros(d.n, dtype=bool)
        keep[np.sort(rng.choice(d.n, rows, replace=False))] = True
        d = d.subset(keep)
    cube = tree_shap(model, d, interactions=bool(cfg["explain.interactions"]))
    gap = cube.local_accuracy_gap()
    if gap > 1e-8:
        raise ModelIntegrityError(f"attributions miss the prediction by {gap:.3g}")
    run.extra.update(family=family, local_accuracy_gap=gap)
    return cube


def cmd_explain(run: Run, cfg: dict) -> None:
    panel = _load(run, cfg)
    regions = panel.regions()
    cube = _explain_cube(run, cfg, panel)
    cube.to_csv(run.path("attribution.csv"),
                run.path("interactions.csv") if cube.interactions is not None else None)
    imp = summarize_importance(cube, regions)
    _csv(imp.to_frame(), run.path("importance.csv"))
    svg.heatmap(run.path("importance.svg"), imp.country.to_numpy(), list(imp.country.index),
                list(imp.country.columns), title="Mean |attribution| by country")
    key = str(cfg["explain.heatmap_key"])
    if cube.interactions is not None and key in cube.feature_names:
        hm = interaction_heatmap(cube, key, regions)
        _csv(hm.reset_index(), run.path(f"interactions_{key}.csv"))
        svg.heatmap(run.path(f"interactions_{key}.svg"), hm.to_numpy(), list(hm.index), list(hm.columns),
                    title=f"Mean |interaction| with {key}")
    feats = _as_list(cfg["explain.features"]) or [f for f in cube.feature_names if f != COUNTRY_FEATURE]
    for f in feats:
        if f not in cube.feature_names:
            raise UsageError(f"feature {f!r} not in the model")
        try:
            dc = dependence_curve(cube, f, float(cfg["explain.loess_frac"]), int(cfg["explain.robust_iters"]))
        except ValueError as exc:
            logger.warning("no dependence curve for %s: %s", f, exc)
            continue
        _csv(dc.curve_frame(), run.path(f"dependence_{f}.csv"))
        svg.scatter(run.path(f"dependence_{f}.svg"), dc.x, dc.phi, (dc.fit.grid, dc.fit.fit),
                    title=f"Dependence: {f}", xlabel=f, ylabel="attribution")


def cmd_connect(run: Run, cfg: dict) -> None:
    if cfg["paths.cube"]:
        cube = read_cube(run.input(cfg["paths.cube"]))
    else:
        panel = _load(run, cfg)
        cube = _explain_cube(run, cfg, panel)
        cube.to_csv(run.path("attribution.csv"))
    feats = _as_list(cfg["connect.features"]) or [f for f in cube.feature_names if f != COUNTRY_FEATURE]
    plan = WindowPlan(start=str(cfg["connect.start"]), end=str(cfg["connect.end"]) or None,
                      step_days=int(cfg["connect.step_days"]), H=int(cfg["connect.H"]),
                      tau=float(cfg["connect.tau"]), p_max=int(cfg["connect.p_max"]),
                      n_max=int(cfg["connect.n_max"]), coverage_threshold=float(cfg["connect.coverage"]),
                      target_lag=int(cfg["connect.target_lag"]))
    for f in feats:
        if f not in cube.feature_names:
            raise UsageError(f"feature {f!r} not in the attribution cube")
    res = rolling_connectedness(cube, feats, plan, jobs=run.jobs)
    res.to_csv(run.path("spillover.csv"))
    for f in feats:
        t = res.table[res.table["feature"] == f]
        if t.empty:
            continue
        x = np.arange(len(t))
        svg.line_chart(run.path(f"spillover_{f}.svg"),
                       {"S_dy": (x, t["S_dy"].to_numpy(float)), "density": (x, t["density"].to_numpy(float))},
                       title=f"Connectedness of {f} attributions", ylabel="index",
                       x_labels=list(t["center"]))
    run.extra["windows"] = int(len(res.table))
    run.extra["skipped_windows"] = int(res.table["skip_reason"].notna().sum())


def cmd_report(run: Run, cfg: dict) -> None:
    if not cfg["paths.ledger"] and not cfg["paths.spillover"]:
        raise UsageError("report needs paths.ledger and/or paths.spillover")
    lines = ["# Run report", ""]
    if cfg["paths.ledger"]:
        records = pd.read_csv(run.input(cfg["paths.ledger"]), float_precision="round_trip",
                              dtype={"country": str})
        missing = set(harness.LEDGER_COLUMNS) - set(records.columns)
        if missing:
            raise PanelValidationError([(1, f"ledger lacks columns {sorted(missing)}")])
        regions = _regions(run, cfg)
        unknown = sorted(set(records["country"]) - set(regions))
        if unknown:
            raise PanelValidationError([(None, f"countries without a region: {unknown}")])
        metrics = _write_scores(run, records, regions)
        pooled = metrics[metrics["level"] == "pooled"]
        lines += ["## Pooled accuracy", "", "| family | infoset | MAE | RMSE |", "|---|---|---|---|"]
        lines += [f"| {r.family} | {r.infoset} | {r.MAE:.4f} | {r.RMSE:.4f} |" for r in pooled.itertuples()]
        lines.append("")
    if cfg["paths.spillover"]:
        sp = pd.read_csv(run.input(cfg["paths.spillover"]), float_precision="round_trip")
        ok = sp[sp["skip_reason"].isna()]
        summ = ok.groupby("feature")[["S_dy", "density"]].agg(["mean", "min", "max"])
        summ.columns = [f"{a}_{b}" for a, b in summ.columns]
        summ = summ.reset_index()
        _csv(summ, run.path("spillover_summary.csv"))
        lines += ["## Connectedness", "", "| feature | mean S_dy | mean density | windows |", "|---|---|---|---|"]
        counts = ok.groupby("feature").size()
        lines += [f"| {r.feature} | {r.S_dy_mean:.2f} | {r.density_mean:.2f} | {counts[r.feature]} |"
                  for r in summ.itertuples()]
        lines.append("")
    run.path("report.md").write_text("\n".join(lines), encoding="utf-8")


COMMANDS = {
    "synth": (cmd_synth, "simulate a synthetic panel and its true components"),
    "preprocess": (cmd_preprocess, "smooth and standardize a raw panel"),
    "horserace": (cmd_horserace, "pseudo-real-time backtest of every family and information set"),
    "explain": (cmd_explain, "fit a tree model and compute exact Shapley attributions"),
    "connect": (cmd_connect, "rolling spillover and network density of attribution series"),
    "report": (cmd_report, "tabulate the outputs of earlier runs"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sovrisk", description="News, market drivers and sovereign CDS forecasting.")
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, helptext) in COMMANDS.items():
        s = sub.add_parser(name, help=helptext, description=helptext)
        s.add_argument("--config", help="TOML file of dotted configuration keys")
        s.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        s.add_argument("--replay", metavar="MANIFEST", help="rerun the configuration stored in a manifest")
        s.add_argument("--out", help="root directory for run directories (run.out)")
        s.add_argument("--jobs", type=int, default=None, help="parallel workers (default: logical CPUs)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _error(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        base = None
        if args.replay:
            try:
                man = json.loads(Path(args.replay).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise UsageError(f"manifest not found: {args.replay}") from None
            if man.get("command") != args.command:
                raise UsageError(f"manifest is for {man.get('command')!r}, not {args.command!r}")
            base = man["config"]
            for path, digest in man.get("inputs", {}).items():
                if not Path(path).is_file() or _sha256(Path(path)) != digest:
                    raise PanelValidationError([(None, f"replay input changed or missing: {path}")])
        cfg = resolve_config(args.config, args.sets, base)
        if args.out:
            cfg["run.out"] = args.out
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        if jobs < 1:
            raise UsageError("--jobs must be >= 1")
        run = Run(args.command, cfg, jobs)
        COMMANDS[args.command][0](run, cfg)
        manifest = run.finish()
        print(run.dir)
        logger.info("manifest written to %s", manifest)
        return EXIT_OK
    except (UsageError, HyperparamError) as exc:
        return _error(EXIT_USAGE, str(exc))
    except (PanelValidationError, DegenerateSeriesError, SchemaMismatchError, FileNotFoundError,
            harness.LeakageError, ModelIntegrityError) as exc:
        return _error(EXIT_DATA, str(exc))
    except (ConvergenceError, RankDeficiencyError, VarError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _error(EXIT_NUMERIC, str(exc))
    except ValueError as exc:
        return _error(EXIT_USAGE, str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
