"""Conic programming: standard-form programs, an interior-point solver and an LMI layer."""

from .cones import Cone, smat, svec
from .program import ConicProgram, ConicSolution
from .solver import solve

__all__ = ["Cone", "ConicProgram", "ConicSolution", "solve", "svec", "smat"]
