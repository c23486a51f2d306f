"""Nonparanormal prognostic biomarker models.

Thin Python layer over the C++ core. Fit configurations and simulation designs
are passed as JSON strings (or dicts), in the same format the ``npb`` tool reads.
"""

import json as _json

from . import _core
from ._core import (
    FitError,
    Model,
    NumericError,
    SchemaError,
    auc,
    bvn_cdf,
    ks_uniform,
    pit,
    read_csv,
    rectangle_probability,
    roc_curve,
    youden,
)

__version__ = _core.__version__


def _as_json(config):
    return config if isinstance(config, str) else _json.dumps(config)


def fit(bounds, x=None, config=None):
    """Fit a model. ``bounds`` is (n, 4): y_lower, y_upper, t_lower, t_upper."""
    return _core.fit(bounds, x, _as_json(config or {}))


def generate_dataset(design, seed=1, cell=0, replication=0):
    return _core.generate_dataset(_as_json(design), seed, cell, replication)


def true_roc(design, t, x=None, grid=512):
    return _core.true_roc(_as_json(design), t, x, grid)


def run_benchmark(config):
    return _core.run_benchmark(_as_json(config))


__all__ = [
    "FitError", "Model", "NumericError", "SchemaError", "auc", "bvn_cdf", "fit",
    "generate_dataset", "ks_uniform", "pit", "read_csv", "rectangle_probability",
    "roc_curve", "run_benchmark", "true_roc", "youden",
]
