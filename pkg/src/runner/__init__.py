from .cli import build_parser, main
from .execute import run_experiment
from .experiments import EXPERIMENTS
from .suite import run_suite

__all__ = ["EXPERIMENTS", "build_parser", "main", "run_experiment", "run_suite"]
