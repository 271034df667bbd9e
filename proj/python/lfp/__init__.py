"""Python access to the lfp phase-space solvers."""

import json

from . import _core
from ._core import (
    BoundaryMassError,
    ConfigError,
    FlowEscapeError,
    NumericalError,
    PhaseGrid,
    UnsupportedError,
    build_grid,
    coherent_symbol,
    dequantize,
    example_widths,
    quantize,
    read_metrics_csv,
    trace_norm,
)

__all__ = [
    "BoundaryMassError",
    "ConfigError",
    "FlowEscapeError",
    "NumericalError",
    "PhaseGrid",
    "UnsupportedError",
    "build_grid",
    "coherent_symbol",
    "dequantize",
    "example_widths",
    "oracle_check",
    "quadratic_example_config",
    "quartic_config",
    "quantize",
    "read_metrics_csv",
    "read_snapshot",
    "run",
    "trace_norm",
    "validate_config",
]


def quadratic_example_config(h, gamma, n_points, halfwidth, t_final):
    return json.loads(_core.quadratic_example_config(h, gamma, n_points, halfwidth, t_final))


def quartic_config(h, gamma, n_points, halfwidth, t_final):
    return json.loads(_core.quartic_config(h, gamma, n_points, halfwidth, t_final))


def validate_config(config):
    return _core.validate_config(json.dumps(config))


def run(config, out_dir=None):
    return _core.run(json.dumps(config), "" if out_dir is None else str(out_dir))


def oracle_check(config):
    return _core.oracle_check(json.dumps(config))


def read_snapshot(path):
    header, data = _core.read_snapshot(str(path))
    return json.loads(header), data
