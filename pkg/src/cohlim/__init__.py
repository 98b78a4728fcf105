"""Numerics for infinite-volume multimode coherent states.

Deterministic expectation functionals on Weyl test functions, random-phase
functionals built from discretized Ito integrals, quasifree moment formulas,
squeeze-map consistency checks, reservoir dynamics and exact dephasing of
small systems coupled to a random-phase coherent reservoir.
"""

from cohlim.mode_space import MomentumGrid, TestFunction, ModeDensity
from cohlim.circle_measure import PhaseMeasure

__all__ = ["MomentumGrid", "TestFunction", "ModeDensity", "PhaseMeasure"]

__version__ = "0.1.0"
