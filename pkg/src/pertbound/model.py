"""Unperturbed-system abstraction: subsystem spectra, transition summaries
and the energy combinations that label automaton cells.

All types are frozen; every operation here is a pure function.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .errors import ConfigurationError, SingularResolventError

__all__ = [
    "SubsystemSpectrum",
    "TransitionModel",
    "EnergyCombination",
    "ModelConfig",
    "Subspace",
    "enumerate_combinations",
    "energy_of",
    "classify",
    "validate_z",
    "ground_combination",
]


class Subspace(enum.Enum):
    LOW = "LOW"
    HIGH = "HIGH"


@dataclass(frozen=True)
class SubsystemSpectrum:
    """Energy levels shared by every subsystem.

    Levels are shifted on construction so that the ground level sits at
    exactly zero.
    """

    levels: tuple[float, ...]
    degeneracies: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        levels = tuple(float(e) for e in self.levels)
        if len(levels) < 2:
            raise ConfigurationError("a subsystem needs at least two energy levels")
        if any(not math.isfinite(e) for e in levels):
            raise ConfigurationError(f"non-finite energy level in {levels}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError(f"levels must be strictly increasing, got {levels}")
        ground = levels[0]
        object.__setattr__(self, "levels", tuple(e - ground for e in levels))
        if self.degeneracies is not None:
            degs = tuple(int(d) for d in self.degeneracies)
            if len(degs) != len(levels) or any(d < 1 for d in degs):
                raise ConfigurationError(
                    f"degeneracies {degs} do not match {len(levels)} levels"
                )
            object.__setattr__(self, "degeneracies", degs)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def gap(self) -> float:
        """Energy of the first excited level (the gap above the ground level)."""
        return self.levels[1]


@dataclass(frozen=True)
class TransitionModel:
    """Scalar summary of the perturbation.

    ``lambdas[i]`` bounds every matrix element of the perturbation on
    subsystem ``i``; ``omega`` bounds diagonal elements on full product
    eigenstates; ``M[s][t]`` is the largest number of level-``t`` eigenstates
    reachable from one level-``s`` eigenstate.
    """

    lambdas: tuple[float, ...]
    omega: float
    M: tuple[tuple[int, ...], ...]
    neighbor_only: bool = True

    def __post_init__(self):
        lambdas = tuple(float(x) for x in self.lambdas)
        if not lambdas:
            raise ConfigurationError("at least one subsystem (lambda) is required")
        if any(not (x >= 0 and math.isfinite(x)) for x in lambdas):
            raise ConfigurationError(f"lambdas must be finite and nonnegative, got {lambdas}")
        omega = float(self.omega)
        if not (omega >= 0 and math.isfinite(omega)):
            raise ConfigurationError(f"omega must be finite and nonnegative, got {omega}")
        rows = tuple(tuple(self.M[s]) for s in range(len(self.M)))
        ell = len(rows)
        if ell < 1 or any(len(row) != ell for row in rows):
            raise ConfigurationError("M must be a square matrix")
        checked = []
        for s, row in enumerate(rows):
            out = []
            for t, v in enumerate(row):
                if int(v) != v or v < 0:
                    raise ConfigurationError(f"M[{s}][{t}] = {v!r} is not a nonnegative integer")
                if self.neighbor_only and abs(s - t) > 1 and v:
                    raise ConfigurationError(
                        f"M[{s}][{t}] = {v} couples non-neighbouring levels (neighbor_only is set)"
                    )
                out.append(int(v))
            checked.append(tuple(out))
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "M", tuple(checked))

    @property
    def num_subsystems(self) -> int:
        return len(self.lambdas)

    @property
    def num_levels(self) -> int:
        return len(self.M)


@dataclass(frozen=True, order=True)
class EnergyCombination:
    """Occupation count of each subsystem energy level."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ConfigurationError(f"negative occupation in {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    def moved(self, s: int, t: int) -> "EnergyCombination":
        """Combination obtained by moving one subsystem from level ``s`` to ``t``."""
        if self.counts[s] == 0:
            raise ConfigurationError(f"no subsystem at level {s} in {self.counts}")
        counts = list(self.counts)
        counts[s] -= 1
        counts[t] += 1
        return EnergyCombination(tuple(counts))

    def __str__(self):
        return "(" + ",".join(map(str, self.counts)) + ")"


@dataclass(frozen=True)
class ModelConfig:
    spectrum: SubsystemSpectrum
    transitions: TransitionModel
    cutoff: Optional[float] = None
    z: float = 0.0

    def __post_init__(self):
        if self.spectrum.num_levels != self.transitions.num_levels:
            raise ConfigurationError(
                f"spectrum has {self.spectrum.num_levels} levels but M is "
                f"{self.transitions.num_levels}x{self.transitions.num_levels}"
            )
        cutoff = self.spectrum.gap / 2 if self.cutoff is None else float(self.cutoff)
        if not cutoff > 0:
            raise ConfigurationError(f"cutoff E_* must be positive, got {cutoff}")
        object.__setattr__(self, "cutoff", cutoff)
        z = float(self.z)
        if not math.isfinite(z):
            raise ConfigurationError(f"z must be finite, got {z}")
        object.__setattr__(self, "z", z)

    @property
    def num_subsystems(self) -> int:
        return self.transitions.num_subsystems

    @property
    def num_levels(self) -> int:
        return self.spectrum.num_levels

    def combinations(self) -> list[EnergyCombination]:
        return enumerate_combinations(self.num_levels, self.num_subsystems)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_combinations(ell: int, m: int) -> list[EnergyCombination]:
    """All occupation vectors of ``ell`` levels summing to ``m``, lexicographically."""
    if ell < 1 or m < 1:
        raise ConfigurationError(f"need ell >= 1 and m >= 1, got ell={ell}, m={m}")
    return [EnergyCombination(c) for c in _compositions(m, ell)]


def ground_combination(ell: int, m: int) -> EnergyCombination:
    return EnergyCombination((m,) + (0,) * (ell - 1))


def energy_of(n: EnergyCombination | Sequence[int], spectrum: SubsystemSpectrum) -> float:
    counts = n.counts if isinstance(n, EnergyCombination) else tuple(n)
    if len(counts) != spectrum.num_levels:
        raise ConfigurationError(
            f"combination {tuple(counts)} has {len(counts)} entries, "
            f"spectrum has {spectrum.num_levels} levels"
        )
    total = 0.0
    for c, e in zip(counts, spectrum.levels):
        total += c * e
    return total


def classify(n: EnergyCombination, cfg: ModelConfig) -> Subspace:
    return Subspace.LOW if energy_of(n, cfg.spectrum) < cfg.cutoff else Subspace.HIGH


def validate_z(cfg: ModelConfig, eps_rel: float = 1e-9) -> float:
    """Check that every resolvent factor ``1/|z - E(n)|`` on the high subspace is finite.

    Returns the smallest distance ``|z - E(n)|`` over high-subspace
    combinations (``inf`` if there are none).
    """
    eps = eps_rel * cfg.spectrum.gap
    best = math.inf
    for n in cfg.combinations():
        energy = energy_of(n, cfg.spectrum)
        if energy < cfg.cutoff:
            continue
        dist = abs(cfg.z - energy)
        if dist < eps:
            raise SingularResolventError(
                f"z = {cfg.z!r} coincides with E{n} = {energy!r}", combination=n, distance=dist
            )
        best = min(best, dist)
    return best
