"""Shared model types: training fingerprints, fitted-model base and errors."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .design import DesignMatrix


class RankDeficiencyError(ValueError):
    def __init__(self, message: str, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterate=None, gap: float = float("nan")):
        self.iterate = iterate
        self.gap = gap
        super().__init__(f"{message} (last gap {gap:.3g})")


class SchemaMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    """What a model was trained on.

    ``max_date`` is the latest date read for training, i.e. the latest target
    date; ``keys_digest`` hashes the sorted ``(country, feature date)`` keys.
    """

    n_rows: int
    feature_names: tuple[str, ...]
    seed: int
    max_date: str | None
    keys_digest: str

    @classmethod
    def of(cls, d: DesignMatrix, seed: int = 0) -> "Fingerprint":
        keys = sorted(d.keys())
        h = hashlib.sha256("\n".join(f"{c},{t}" for c, t in keys).encode()).hexdigest()
        max_date = str(d.target_dates.max().astype("datetime64[D]")) if d.n else None
        return cls(d.n, tuple(d.feature_names), int(seed), max_date, h)

    def to_dict(self) -> dict:
        return {"n_rows": self.n_rows, "feature_names": list(self.feature_names), "seed": self.seed,
                "max_date": self.max_date, "keys_digest": self.keys_digest}


class FittedModel:
    """Base for fitted estimators: schema check plus ``predict``."""

    family: str
    fingerprint: Fingerprint

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.fingerprint.feature_names

    def check_schema(self, d: DesignMatrix) -> None:
        if tuple(d.feature_names) != self.feature_names:
            want, got = list(self.feature_names), list(d.feature_names)
            missing = [f for f in want if f not in got]
            extra = [f for f in got if f not in want]
            raise SchemaMismatchError(
                f"feature schema mismatch: expected {want}, got {got}; "
                f"missing={missing} extra={extra}")

    def predict(self, d: DesignMatrix) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError
