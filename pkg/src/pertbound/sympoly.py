"""Partitions, monomial symmetric polynomials and the walk tuples the
automaton passes between cells.

A walk tuple stands for a symmetry class of walks on labelled energy
configurations. Its canonical content is the multiset of *slots*: one
``(level, exponent)`` pair per subsystem, where ``exponent`` counts how many
times the perturbation has acted on that subsystem so far (0 = untouched).
The reduced configuration, the partition and the slot-to-part mapping are
all read off that multiset.

The weight ``xi`` of a tuple is the summed weight of walks that end in one
fixed labelled representative of the class, so at the end of a run a tuple
contributes ``xi * m_b(lambda)`` with ``m_b`` the monomial symmetric
polynomial in which every distinct monomial appears once.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Optional, Sequence

from .errors import ArityError, CorruptStateError

__all__ = [
    "Partition",
    "WalkTuple",
    "eval_monomial",
    "part_multiplicity_factor",
    "canonicalize",
    "merge",
    "OMEGA_STEP",
    "format_trace_terms",
]

# Label used inside factor traces for a diagonal (omega) step.
OMEGA_STEP = (-1, -1)


class Partition(tuple):
    """Non-decreasing tuple of positive exponents."""

    def __new__(cls, parts: Iterable[int] = ()):
        parts = tuple(int(p) for p in parts)
        if any(p < 1 for p in parts):
            raise ValueError(f"partition parts must be positive, got {parts}")
        if any(b < a for a, b in zip(parts, parts[1:])):
            raise ValueError(f"partition must be non-decreasing, got {parts}")
        return super().__new__(cls, parts)

    @property
    def weight(self) -> int:
        return sum(self)

    def __repr__(self):
        return f"Partition({tuple(self)})"

    def __str__(self):
        return "(" + ",".join(map(str, self)) + ")"


def part_multiplicity_factor(b: Sequence[int]) -> int:
    """Product of factorials of the multiplicities of repeated parts."""
    out = 1
    for count in Counter(b).values():
        out *= math.factorial(count)
    return out


def eval_monomial(b: Sequence[int], lambdas: Sequence[float], convention: str = "distinct") -> float:
    """Evaluate the monomial symmetric polynomial ``m_b`` at ``lambdas``.

    With ``convention="distinct"`` every distinct monomial is counted once
    (``m_(2,2)(x, y) = x^2 y^2``). ``convention="ordered"`` sums over all
    ordered injections of parts into variables, which multiplies the distinct
    value by the product of factorials of repeated-part multiplicities.
    """
    b = tuple(int(p) for p in b)
    lambdas = [float(x) for x in lambdas]
    if len(b) > len(lambdas):
        raise ArityError(f"partition {b} has {len(b)} parts but only {len(lambdas)} variables")
    if convention not in ("distinct", "ordered"):
        raise ValueError(f"unknown convention {convention!r}")
    if not b:
        return 1.0

    # Assign each variable either nothing or one still-available exponent
    # value; states track how many copies of each distinct value remain.
    values = sorted(set(b))
    need = tuple(b.count(v) for v in values)
    states: dict[tuple[int, ...], float] = {need: 1.0}
    for x in lambdas:
        powers = [x**v for v in values]
        nxt: dict[tuple[int, ...], float] = defaultdict(float)
        for remaining, acc in states.items():
            nxt[remaining] += acc
            for j, left in enumerate(remaining):
                if left:
                    key = remaining[:j] + (left - 1,) + remaining[j + 1:]
                    nxt[key] += acc * powers[j]
        states = nxt
    total = states.get((0,) * len(values), 0.0)
    if convention == "ordered":
        total *= part_multiplicity_factor(b)
    return total


def _slot_sort_key(slot):
    level, exponent = slot
    return (-level, -exponent)


@dataclass(frozen=True)
class WalkTuple:
    """The 4-tuple ``(c~, b, xi, mu)`` plus optional trace bookkeeping.

    ``mapping[j]`` is the index in ``partition`` of the part carried by slot
    ``j`` of ``reduced_config``, or ``None`` for an untouched slot.
    ``denom_trace`` holds ``(cell counts, power)`` pairs and ``factor_trace``
    holds ``((s, t), count)`` pairs (``OMEGA_STEP`` for diagonal steps); both
    are ``None`` outside trace mode.
    """

    reduced_config: tuple[int, ...]
    partition: Partition
    weight: float
    mapping: tuple[Optional[int], ...]
    denom_trace: Optional[tuple] = None
    factor_trace: Optional[tuple] = None

    @classmethod
    def from_slots(cls, slots, weight, denom_trace=None, factor_trace=None) -> "WalkTuple":
        """Build the canonical tuple for a multiset of ``(level, exponent)`` slots."""
        ordered = sorted(slots, key=_slot_sort_key)
        parts = sorted(e for _, e in ordered if e > 0)
        first_index = {}
        for i, p in enumerate(parts):
            first_index.setdefault(p, i)
        used: Counter = Counter()
        mapping = []
        for _, e in ordered:
            if e > 0:
                mapping.append(first_index[e] + used[e])
                used[e] += 1
            else:
                mapping.append(None)
        return cls(
            tuple(level for level, _ in ordered),
            Partition(parts),
            float(weight),
            tuple(mapping),
            denom_trace,
            factor_trace,
        )

    @property
    def slots(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (level, 0 if j is None else self.partition[j])
            for level, j in zip(self.reduced_config, self.mapping)
        )

    @property
    def occupation(self) -> tuple[int, ...]:
        """Level-occupation counts of ``reduced_config`` (length = highest level + 1)."""
        if not self.reduced_config:
            return ()
        counts = [0] * (max(self.reduced_config) + 1)
        for level in self.reduced_config:
            counts[level] += 1
        return tuple(counts)

    def occupation_in(self, num_levels: int) -> tuple[int, ...]:
        counts = [0] * num_levels
        for level in self.reduced_config:
            counts[level] += 1
        return tuple(counts)

    @property
    def key(self):
        return (self.reduced_config, tuple(self.partition), self.mapping,
                self.denom_trace, self.factor_trace)

    def with_weight(self, weight: float) -> "WalkTuple":
        return WalkTuple(self.reduced_config, self.partition, float(weight), self.mapping,
                         self.denom_trace, self.factor_trace)


def _check_consistent(t: WalkTuple) -> None:
    if len(t.mapping) != len(t.reduced_config):
        raise CorruptStateError(
            f"mapping has {len(t.mapping)} entries for {len(t.reduced_config)} slots"
        )
    if any(level < 0 for level in t.reduced_config):
        raise CorruptStateError(f"negative level in {t.reduced_config}")
    if any(p < 1 for p in t.partition) or list(t.partition) != sorted(t.partition):
        raise CorruptStateError(f"partition {tuple(t.partition)} is not non-decreasing positive")
    touched = [j for j in t.mapping if j is not None]
    if sorted(touched) != list(range(len(t.partition))):
        raise CorruptStateError(
            f"mapping {t.mapping} is not a bijection onto the {len(t.partition)} parts"
        )
    if not t.weight >= 0:
        raise CorruptStateError(f"negative or NaN weight {t.weight}")


def canonicalize(t: WalkTuple) -> WalkTuple:
    _check_consistent(t)
    return WalkTuple.from_slots(t.slots, t.weight, t.denom_trace, t.factor_trace)


def _key_order(key):
    c, b, mu, denom, factor = key
    return (c, b, tuple(-1 if j is None else j for j in mu), denom or (), factor or ())


def merge(tuples: Iterable[WalkTuple]) -> list[WalkTuple]:
    """Combine tuples with equal canonical key by summing weights.

    Sums are correctly rounded (``math.fsum``), so the result does not depend
    on input order. Output is sorted by key.
    """
    groups: dict = defaultdict(list)
    first: dict = {}
    host = None
    for t in tuples:
        occ = t.occupation
        if host is None:
            host = occ
        elif occ != host:
            raise CorruptStateError(f"cannot merge tuples hosted by {host} and {occ}")
        key = t.key
        groups[key].append(t.weight)
        first.setdefault(key, t)
    out = []
    for key in sorted(groups, key=_key_order):
        out.append(first[key].with_weight(math.fsum(groups[key])))
    return out


# ----------------------------------------------------------------------------
# trace-mode pretty printing
# ----------------------------------------------------------------------------

def _energy_symbol(counts: Sequence[int]) -> str:
    pieces = []
    for level, c in enumerate(counts):
        if level == 0 or c == 0:
            continue
        pieces.append(f"E_{level}" if c == 1 else f"{c}E_{level}")
    return "+".join(pieces) if pieces else "0"


def _power(base: str, p: int) -> str:
    return base if p == 1 else f"{base}^{p}"


def _format_coefficient(x: float) -> str:
    nearest = round(x)
    if nearest != 0 and abs(x - nearest) <= 1e-9 * abs(nearest):
        return str(int(nearest))
    return repr(x)


def format_term(coefficient: float, partition: Sequence[int], factor_trace, denom_trace,
                level_energies: Sequence[float]) -> str:
    """Render one trace term as ``coeff * M-product * m_{(b)} / |denominators|``."""
    factors = [_power(f"M_{s}{t}", k) for (s, t), k in factor_trace if (s, t) != OMEGA_STEP]
    factors += [_power("omega", k) for step, k in factor_trace if step == OMEGA_STEP]
    numerator = " ".join(factors) if factors else "1"

    def energy(counts):
        return sum(c * e for c, e in zip(counts, level_energies))

    denoms = sorted(denom_trace, key=lambda item: (energy(item[0]), item[0]))
    denominator = " ".join(_power(f"(z-{_energy_symbol(n)})", p) for n, p in denoms)
    part = ",".join(map(str, partition))
    return f"{_format_coefficient(coefficient)} * {numerator} * m_{{({part})}} / |{denominator}|"


def trace_factor_value(factor_trace, denom_trace, M, omega, z, level_energies) -> float:
    """Numerical value of the M/omega product divided by the resolvent denominators."""
    value = 1.0
    for (s, t), k in factor_trace:
        value *= (omega if (s, t) == OMEGA_STEP else M[s][t]) ** k
    for n, p in denom_trace:
        energy = sum(c * e for c, e in zip(n, level_energies))
        value /= abs(z - energy) ** p
    return value


def format_trace_terms(tuples: Iterable[WalkTuple], M, omega: float, z: float,
                       level_energies: Sequence[float]) -> list[str]:
    """Pretty-print final trace-mode tuples, one line per distinct term.

    Coefficients are reported against ``m_b`` in the ordered-injection
    convention (sum over all ordered choices of distinct variables), so a
    repeated-part term such as ``m_(2,2)`` carries half the weight it has in
    the distinct-monomial convention.
    """
    acc: dict = defaultdict(list)
    for t in tuples:
        if t.denom_trace is None or t.factor_trace is None:
            raise CorruptStateError("tuple carries no trace; run the automaton in trace mode")
        acc[(tuple(t.partition), t.factor_trace, t.denom_trace)].append(t.weight)
    lines = []
    for (b, factors, denoms) in sorted(acc):
        xi = math.fsum(acc[(b, factors, denoms)])
        base = trace_factor_value(factors, denoms, M, omega, z, level_energies)
        coefficient = xi / base / part_multiplicity_factor(b)
        lines.append(format_term(coefficient, b, factors, denoms, level_energies))
    return lines


def group_by_partition(tuples: Iterable[WalkTuple]) -> list[tuple[Partition, float]]:
    """Sum weights per partition, sorted by partition."""
    pairs = sorted((tuple(t.partition), t.weight) for t in tuples)
    return [(Partition(b), math.fsum(w for _, w in grp))
            for b, grp in groupby(pairs, key=lambda p: p[0])]
