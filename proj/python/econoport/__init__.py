"""Economic circuit simulation: netlists, analyses, 2-port models and metrics."""

import json

from ._core import (
    AlgebraError,
    ElaborationError,
    Error,
    IoError,
    ParameterModel,
    ParseError,
    RationalFunction,
    SolveError,
    aggregate,
    check_scenarios,
    consumer,
    diminishing_returns,
    ftp_rate,
    gdp,
    inflation,
    normalize_netlist,
    pid_policy,
    reserve_bank,
    surplus_rate,
    trader,
)
from . import _core


def run(text, seed=None):
    """Run every analysis in a deck; returns a list of (kind, result dict)."""
    return [(kind, json.loads(body)) for kind, body in _core.run_deck(text, seed)]


def bode(text, stimulus, probe, grid="log:200:0.01:1000"):
    return json.loads(_core.bode(text, stimulus, probe, grid))


def bode_svg(text, stimulus, probe, grid="log:200:0.01:1000"):
    return _core.bode_svg(text, stimulus, probe, grid)


def extract(text, subckt, kind="Y", grid="log:50:0.01:1000"):
    return json.loads(_core.extract(text, subckt, kind, grid))


__all__ = [
    "AlgebraError", "ElaborationError", "Error", "IoError", "ParameterModel", "ParseError",
    "RationalFunction", "SolveError", "aggregate", "bode", "bode_svg", "check_scenarios",
    "consumer", "diminishing_returns", "extract", "ftp_rate", "gdp", "inflation",
    "normalize_netlist", "pid_policy", "reserve_bank", "run", "surplus_rate", "trader",
]
