from .activation import Activation
from .data_axis import DataAxis
from .distance import Distance
from .function_class import FunctionClass
from .subcommand import Subcommand

__all__ = ["Activation", "DataAxis", "Distance", "FunctionClass", "Subcommand"]
