"""Cellular automaton that assembles the symmetric-polynomial bound on
``||T_r||_inf``.

One cell per energy combination ``n``; a directed edge ``n -> n'`` whenever a
single perturbation step can move one subsystem so that the occupation
changes from ``n`` to ``n'`` (self-loops come from diagonal ``omega`` steps
and from within-level ``M_ss`` moves). Edges from the high to the low
subspace are only used on the final step.

An order-``r`` run is one emission from the low starting cell, ``r - 2``
rounds of (Phase I, Phase II) on the high cells, and a last Phase I followed
by the final emission into the low cells. Phase I of every cell completes
before any Phase II of the same iteration starts.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    AutomatonLogicError,
    ConfigurationError,
    CorruptStateError,
    UnsupportedOrderError,
)
from .model import (
    EnergyCombination,
    ModelConfig,
    Subspace,
    classify,
    energy_of,
    ground_combination,
    validate_z,
)
from .sympoly import (
    OMEGA_STEP,
    Partition,
    WalkTuple,
    eval_monomial,
    format_trace_terms,
    group_by_partition,
    merge,
)

__all__ = [
    "Cell",
    "Edge",
    "Automaton",
    "BoundResult",
    "DIVERGENT",
    "build",
    "initialize",
    "phase_one",
    "phase_two",
    "run",
    "tail_bound",
    "default_workers",
]

DIVERGENT = math.inf


def default_workers() -> int:
    """Worker count from ``PB_THREADS`` (default 1)."""
    raw = os.environ.get("PB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"PB_THREADS must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"PB_THREADS must be a positive integer, got {raw!r}")
    return value


@dataclass
class Cell:
    label: EnergyCombination
    subspace: Subspace
    energy: float
    state: list[WalkTuple] = field(default_factory=list)

    @property
    def is_low(self) -> bool:
        return self.subspace is Subspace.LOW


@dataclass
class Edge:
    source: EnergyCombination
    target: EnergyCombination
    final_only: bool
    state: list[WalkTuple] = field(default_factory=list)


@dataclass
class Automaton:
    config: ModelConfig
    cells: dict[EnergyCombination, Cell]
    edges: dict[tuple[EnergyCombination, EnergyCombination], Edge]
    min_distance: float
    trace: bool = False

    def __post_init__(self):
        self._incoming: dict[EnergyCombination, list[Edge]] = {n: [] for n in self.cells}
        for (src, dst) in sorted(self.edges):
            self._incoming[dst].append(self.edges[(src, dst)])

    @property
    def low_cells(self) -> list[Cell]:
        return [c for c in self.cells.values() if c.is_low]

    @property
    def high_cells(self) -> list[Cell]:
        return [c for c in self.cells.values() if not c.is_low]

    def incoming(self, n: EnergyCombination) -> list[Edge]:
        return self._incoming[n]

    def tuple_count(self) -> int:
        return sum(len(c.state) for c in self.cells.values()) + sum(
            len(e.state) for e in self.edges.values()
        )


@dataclass
class BoundResult:
    value: float
    terms: list[tuple[Partition, float]]
    trace: Optional[list[str]] = None
    order: int = 0
    z: float = 0.0
    tuples_total: int = 0
    start: Optional[EnergyCombination] = None


def build(cfg: ModelConfig, trace: bool = False) -> Automaton:
    """Lay out cells and edges for ``cfg``; all states start empty."""
    min_distance = validate_z(cfg)
    spectrum, tm = cfg.spectrum, cfg.transitions
    cells = {}
    for n in cfg.combinations():
        cells[n] = Cell(n, classify(n, cfg), energy_of(n, spectrum))

    edges = {}
    for n, cell in cells.items():
        for s, occupied in enumerate(n.counts):
            if not occupied:
                continue
            for t, mult in enumerate(tm.M[s]):
                if not mult:
                    continue
                target = n.moved(s, t)
                if cell.is_low and cells[target].is_low:
                    continue  # a V_{--} step never occurs inside T_r, r >= 2
                edges.setdefault((n, target), Edge(n, target, not cell.is_low and cells[target].is_low))
        if tm.omega > 0 and not cell.is_low:
            edges.setdefault((n, n), Edge(n, n, False))
    return Automaton(cfg, cells, dict(sorted(edges.items())), min_distance, trace)


def initialize(a: Automaton, start: Optional[EnergyCombination] = None) -> None:
    """Clear every state and seed ``start`` (default: the ground cell) with one tuple."""
    ell, m = a.config.num_levels, a.config.num_subsystems
    start = ground_combination(ell, m) if start is None else start
    cell = a.cells.get(start)
    if cell is None or not cell.is_low:
        raise ConfigurationError(f"starting cell {start} is not in the low subspace")
    for c in a.cells.values():
        c.state = []
    for e in a.edges.values():
        e.state = []
    slots = [(level, 0) for level, count in enumerate(start.counts) for _ in range(count)]
    empty = () if a.trace else None
    cell.state = [WalkTuple.from_slots(slots, 1.0, empty, empty)]


def _bump(trace_items, item):
    """Add one occurrence of ``item`` to a sorted ``(item, count)`` multiset."""
    counts = dict(trace_items)
    counts[item] = counts.get(item, 0) + 1
    return tuple(sorted(counts.items()))


def phase_one(a: Automaton, cell: Cell) -> None:
    """Absorb incoming edge states and apply the resolvent factor ``1/|z - E(n)|``."""
    if cell.is_low:
        raise AutomatonLogicError(f"Phase I is only defined on high cells, not {cell.label}")
    pending = list(cell.state)
    for edge in a.incoming(cell.label):
        pending.extend(edge.state)
        edge.state = []
    if not pending:
        cell.state = []
        return
    merged = merge(pending)
    if merged[0].occupation_in(len(cell.label)) != cell.label.counts:
        raise CorruptStateError(
            f"cell {cell.label} received tuples with configuration {merged[0].reduced_config}"
        )
    factor = 1.0 / abs(a.config.z - cell.energy)
    if a.trace:
        cell.state = [
            WalkTuple(t.reduced_config, t.partition, t.weight * factor, t.mapping,
                      _bump(t.denom_trace, cell.label.counts), t.factor_trace)
            for t in merged
        ]
    else:
        cell.state = [t.with_weight(t.weight * factor) for t in merged]


def phase_two(a: Automaton, cell: Cell, is_final: bool) -> dict:
    """Apply one perturbation step to every stored tuple.

    Returns the emitted tuples keyed by edge and clears the cell. Emission
    targets high cells, except on the final step, where only low cells are
    targeted.
    """
    tm = a.config.transitions
    n = cell.label
    out: dict[tuple[EnergyCombination, EnergyCombination], list[WalkTuple]] = {}
    for t in cell.state:
        slots = t.slots
        for (s, e) in Counter(slots):
            for target_level, mult in enumerate(tm.M[s]):
                if not mult:
                    continue
                if tm.neighbor_only and abs(s - target_level) > 1:
                    raise AutomatonLogicError(
                        f"transition {s}->{target_level} violates neighbour-only model"
                    )
                dst = n.moved(s, target_level)
                edge = a.edges.get((n, dst))
                if edge is None or a.cells[dst].is_low != is_final:
                    continue
                new_slots = list(slots)
                new_slots.remove((s, e))
                new_slots.append((target_level, e + 1))
                # xi is per labelled representative: count the slots that
                # could have been the one just moved.
                same = sum(1 for x in new_slots if x == (target_level, e + 1))
                factors = None if t.factor_trace is None else _bump(t.factor_trace, (s, target_level))
                out.setdefault((n, dst), []).append(
                    WalkTuple.from_slots(new_slots, t.weight * mult * same, t.denom_trace, factors)
                )
        if tm.omega > 0 and not cell.is_low and not is_final:
            factors = None if t.factor_trace is None else _bump(t.factor_trace, OMEGA_STEP)
            out.setdefault((n, n), []).append(
                WalkTuple(t.reduced_config, t.partition, t.weight * tm.omega, t.mapping,
                          t.denom_trace, factors)
            )
    cell.state = []
    return out


def _deposit(a: Automaton, emissions: list[dict]) -> None:
    for emitted in emissions:
        for key in sorted(emitted):
            a.edges[key].state.extend(emitted[key])


def _collect_low(a: Automaton) -> list[WalkTuple]:
    final = []
    for cell in a.low_cells:
        pending = list(cell.state)
        for edge in a.incoming(cell.label):
            pending.extend(edge.state)
            edge.state = []
        cell.state = merge(pending) if pending else []
        final.extend(cell.state)
    return final


def _run_from(a: Automaton, r: int, start: EnergyCombination, pool) -> tuple[list[WalkTuple], int]:
    initialize(a, start)
    _deposit(a, [phase_two(a, a.cells[start], is_final=False)])
    high = a.high_cells
    total = 1

    def each(fn, cells):
        if pool is None:
            return [fn(c) for c in cells]
        return list(pool.map(fn, cells))

    for iteration in range(2, r + 1):
        each(lambda c: phase_one(a, c), high)
        total += sum(len(c.state) for c in high)
        final = iteration == r
        _deposit(a, each(lambda c: phase_two(a, c, final), high))
    tuples = _collect_low(a)
    return tuples, total + len(tuples)


def run(a: Automaton, r: int, workers: Optional[int] = None) -> BoundResult:
    """Bound ``||T_r||_inf`` for the automaton's model.

    With several low cells (enlarged cutoff) every low cell is tried as the
    starting configuration and the largest row bound is returned.
    """
    if r < 2:
        raise UnsupportedOrderError(f"order must be >= 2, got {r}")
    validate_z(a.config)
    workers = default_workers() if workers is None else workers
    lambdas = a.config.transitions.lambdas
    cache: dict[tuple[int, ...], float] = {}

    def m_b(b):
        key = tuple(b)
        if key not in cache:
            cache[key] = eval_monomial(key, lambdas)
        return cache[key]

    best = None
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for cell in a.low_cells:
            tuples, total = _run_from(a, r, cell.label, pool)
            value = math.fsum(t.weight * m_b(t.partition) for t in tuples)
            if best is None or value > best[0]:
                best = (value, tuples, total, cell.label)
    finally:
        if pool is not None:
            pool.shutdown()

    value, tuples, total, start = best
    trace = None
    if a.trace:
        tm = a.config.transitions
        trace = format_trace_terms(tuples, tm.M, tm.omega, a.config.z, a.config.spectrum.levels)
    return BoundResult(value, group_by_partition(tuples), trace, r, a.config.z, total, start)


def tail_ratio(a: Automaton) -> float:
    """Per-step growth ratio ``B/d`` of the geometric tail.

    ``B`` bounds the row sums of ``|V_{++}|``: the diagonal bound plus, for
    each subsystem, its coupling times the largest row sum of ``M``.
    """
    tm = a.config.transitions
    row = max(sum(r) for r in tm.M)
    growth = tm.omega + math.fsum(tm.lambdas) * row
    if a.min_distance == math.inf:
        return 0.0
    return growth / a.min_distance


def tail_bound(a: Automaton, r_c: int, bound_at_rc: float) -> float:
    """Geometric bound on the orders beyond ``r_c``; ``DIVERGENT`` if the ratio is >= 1."""
    if bound_at_rc < 0:
        raise ValueError(f"bound_at_rc must be nonnegative, got {bound_at_rc}")
    q = tail_ratio(a)
    if q >= 1:
        return DIVERGENT
    return bound_at_rc * q / (1 - q)
