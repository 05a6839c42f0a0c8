"""Postfix (linear-string) genetic programming for symbolic regression."""

from postfixgp._accel import backend_name
from postfixgp.engine import GpParams, RunState, continue_run, init_run, predict_multi_step, predict_one_step, run
from postfixgp.evaluator import Dataset, metrics
from postfixgp.genome import Genome, PrimitiveSet, render_infix
from postfixgp.selection import SelectionConfig

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Genome",
    "GpParams",
    "PrimitiveSet",
    "RunState",
    "SelectionConfig",
    "backend_name",
    "continue_run",
    "init_run",
    "metrics",
    "predict_multi_step",
    "predict_one_step",
    "render_infix",
    "run",
]
