"""Hermitian Yang-Mills heat flow on lattice cylinders, with the G2 exterior
algebra, Donaldson functional, energy diagnostics and instanton monads."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .flow import FlowConfig, FlowTrace, HYMFlow
from .lattice import LatticeChart, make_twist

__all__ = ["FlowConfig", "FlowTrace", "HYMFlow", "LatticeChart", "make_twist", "__version__"]
