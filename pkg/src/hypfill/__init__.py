"""Hyperbolic fillings of finite metric samples, conformal weights on them,
and numerical checks of the resulting boundary geometry."""
from .errors import HypfillError
from .filling import FillingGraph, ParamRegime, Vertex, build_filling
from .generators import make_cantor, make_circle, make_interval, make_sierpinski
from .metric_space import FiniteMetricSpace, from_matrix, from_points, load, snowflake
from .nets import build_nested_nets
from .weights import MeasureOracle, constant_rho, custom_rho, measure_rho

__version__ = "0.1.0"

__all__ = [
    "FillingGraph", "FiniteMetricSpace", "HypfillError", "MeasureOracle", "ParamRegime", "Vertex",
    "build_filling", "build_nested_nets", "constant_rho", "custom_rho", "from_matrix", "from_points",
    "load", "make_cantor", "make_circle", "make_interval", "make_sierpinski", "measure_rho", "snowflake",
]
