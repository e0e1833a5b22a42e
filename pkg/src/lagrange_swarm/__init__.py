"""Distributed leader tracking for networks of Euler-Lagrange agents.

Followers use a distributed finite-time observer of the leader's state and a
model-independent control law over switching directed graphs.
"""
from .control import GainSet
from .graph import DirectedGraph, SwitchingSignal, laplacian, solve_gamma
from .kernels import BACKEND, COMPILED_AVAILABLE
from .scenario import default_scenario, load_scenario
from .simulation import ScenarioConfig, SimTrace, run

__version__ = "0.1.0"

__all__ = ["BACKEND", "COMPILED_AVAILABLE", "DirectedGraph", "GainSet", "ScenarioConfig", "SimTrace",
           "SwitchingSignal", "default_scenario", "laplacian", "load_scenario", "run", "solve_gamma",
           "__version__"]
