"""Versioned JSON dumps of fitted models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .base import Fingerprint
from .linear import LinearFEModel, LinearProjection
from .trees import GroupedModel, Tree, TreeEnsemble

FORMAT_VERSION = 1
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "cover")


def _fp(fp: Fingerprint) -> dict:
    return fp.to_dict()


def _fp_from(d: dict) -> Fingerprint:
    return Fingerprint(d["n_rows"], tuple(d["feature_names"]), d["seed"], d["max_date"], d["keys_digest"])


def _ensemble(m: TreeEnsemble) -> dict:
    return {"kind": "ensemble", "family": m.family, "base": m.base, "scale": m.scale,
            "country_codes": list(m.country_codes), "fingerprint": _fp(m.fingerprint), "params": m.params,
            "trees": [{k: getattr(t, k).tolist() for k in _TREE_FIELDS} for t in m.trees]}


def _ensemble_from(d: dict) -> TreeEnsemble:
    ints = {"feature", "left", "right"}
    trees = [Tree(*[np.asarray(t[k], dtype=np.int64 if k in ints else float) for k in _TREE_FIELDS])
             for t in d["trees"]]
    return TreeEnsemble(d["family"], trees, d["base"], d["scale"], tuple(d["country_codes"]),
                        _fp_from(d["fingerprint"]), d["params"])


def to_dict(model) -> dict:
    if isinstance(model, LinearFEModel):
        proj = None
        if model.projection is not None:
            p = model.projection
            proj = {"center": p.center.tolist(), "loadings": p.loadings.tolist(), "scale": p.scale.tolist(),
                    "dummy_codes": list(p.dummy_codes)}
        body = {"kind": "linear", "family": model.family, "coef": model.coef.tolist(),
                "intercepts": model.intercepts, "fingerprint": _fp(model.fingerprint), "projection": proj,
                "info": model.info}
    elif isinstance(model, TreeEnsemble):
        body = _ensemble(model)
    elif isinstance(model, GroupedModel):
        body = {"kind": "grouped", "family": model.family, "country_group": model.country_group,
                "fingerprint": _fp(model.fingerprint), "params": model.params,
                "groups": {k: _ensemble(v) for k, v in model.groups.items()}}
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return {"format": "sovrisk-model", "version": FORMAT_VERSION, "model": body}


def from_dict(doc: dict):
    if doc.get("format") != "sovrisk-model" or doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model document (format={doc.get('format')}, version={doc.get('version')})")
    d = doc["model"]
    if d["kind"] == "linear":
        proj = None
        if d["projection"] is not None:
            p = d["projection"]
            proj = LinearProjection(np.asarray(p["center"], float), np.asarray(p["loadings"], float).reshape(
                len(p["center"]), -1), np.asarray(p["scale"], float), tuple(p["dummy_codes"]))
        return LinearFEModel(d["family"], np.asarray(d["coef"], float), dict(d["intercepts"]),
                             _fp_from(d["fingerprint"]), proj, d["info"])
    if d["kind"] == "ensemble":
        return _ensemble_from(d)
    if d["kind"] == "grouped":
        return GroupedModel(d["family"], {k: _ensemble_from(v) for k, v in d["groups"].items()},
                            dict(d["country_group"]), _fp_from(d["fingerprint"]), d["params"])
    raise ValueError(f"unknown model kind {d['kind']!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_dict(model)), encoding="utf-8")


def load_model(path: str | Path):
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
