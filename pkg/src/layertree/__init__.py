"""Solver toolkit for the constrained layer tree problem and solar-farm cable layouts."""

from .model import (
    FormatError,
    InconsistentInstance,
    Instance,
    LayerSpec,
    LayerTree,
    Node,
    normalize,
    read_instance,
    read_tree,
    verify_tree,
    write_instance,
    write_tree,
)
from .dp_core import Budget, Decision, Outcome, solve_basic
from .dp_opts import OptConfig, solve
from .generator import GenParams, generate, generate_one
from .oracle import brute_force_decide

__version__ = "0.1.0"
