"""Symmetric-polynomial upper bounds on high-order self-energy terms,
assembled by a cellular automaton over energy combinations."""

from .automaton import BoundResult, build, run, tail_bound
from .model import (
    EnergyCombination,
    ModelConfig,
    Subspace,
    SubsystemSpectrum,
    TransitionModel,
    classify,
    energy_of,
    enumerate_combinations,
    validate_z,
)
from .sympoly import Partition, WalkTuple, canonicalize, eval_monomial, merge

__version__ = "0.1.0"
