"""Forecasting and explaining sovereign CDS spreads with market and news drivers.

Subpackages: :mod:`sovrisk.panel` (data), :mod:`sovrisk.models` (estimators),
:mod:`sovrisk.harness` (backtests), :mod:`sovrisk.attribution` (Shapley
values), :mod:`sovrisk.connect` (spillover networks), :mod:`sovrisk.synth`
(synthetic data and oracles) and :mod:`sovrisk.cli`.
"""

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("sovrisk")
except _metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0+unknown"

__all__ = ["__version__"]
