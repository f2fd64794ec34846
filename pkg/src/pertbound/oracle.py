"""Exact, exponential-cost reference computations.

Dense operators built from Pauli strings, exact self-energy terms ``T_r``,
transition-model derivation from a subsystem Hamiltonian, and a direct
walk enumeration over labelled energy configurations. Everything here is
meant for desk-scale systems (at most 14 spins) and exists to check the
automaton.
"""

from __future__ import annotations

import csv
import itertools
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegeneracyAmbiguousError,
    SingularResolventError,
    SizeGuardError,
    UnsupportedOrderError,
)
from .model import ModelConfig, SubsystemSpectrum, TransitionModel

__all__ = [
    "PauliTerm",
    "parse_pauli_term",
    "build_operator",
    "operator_diagonal",
    "ExactSeries",
    "ExactNorms",
    "exact_norms",
    "exact_term",
    "SelfEnergyError",
    "self_energy_error",
    "derive_transition_model",
    "walk_sum_oracle",
    "spectral_error",
    "geometric_bound",
    "write_golden",
    "read_golden",
]

MAX_SPINS = 14
HERMITIAN_TOL = 1e-12

_AXES = ("X", "Y", "Z")
_TERM_RE = re.compile(r"^\s*([^*]+?)\s*(?:\*\s*(.*?))?\s*$")
_FACTOR_RE = re.compile(r"^([XYZ])(\d+)$")


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * P_{i1} P_{i2} ...`` with distinct spin indices."""

    coefficient: float
    string: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        coefficient = float(self.coefficient)
        if not math.isfinite(coefficient):
            raise ConfigurationError(f"non-finite Pauli coefficient {self.coefficient!r}")
        factors = tuple((int(i), str(a).upper()) for i, a in self.string)
        seen = set()
        for i, a in factors:
            if a not in _AXES:
                raise ConfigurationError(f"unknown Pauli axis {a!r}")
            if i < 0:
                raise ConfigurationError(f"negative spin index {i}")
            if i in seen:
                raise ConfigurationError(f"spin {i} appears twice in one Pauli string")
            seen.add(i)
        object.__setattr__(self, "coefficient", coefficient)
        object.__setattr__(self, "string", tuple(sorted(factors)))

    @property
    def locality(self) -> int:
        return len(self.string)

    def scaled(self, factor: float) -> "PauliTerm":
        return PauliTerm(self.coefficient * factor, self.string)

    def relabelled(self, mapping) -> "PauliTerm":
        return PauliTerm(self.coefficient, tuple((mapping[i], a) for i, a in self.string))

    def __str__(self):
        ops = " ".join(f"{a}{i}" for i, a in self.string)
        return f"{self.coefficient!r} * {ops}" if ops else f"{self.coefficient!r}"


def parse_pauli_term(text: str) -> PauliTerm:
    """Parse ``"coeff * X3 Z7"`` (a bare number is a multiple of the identity)."""
    match = _TERM_RE.match(text)
    if not match:
        raise ConfigurationError(f"cannot parse Pauli term {text!r}")
    coeff_text, ops_text = match.groups()
    try:
        coefficient = float(coeff_text)
    except ValueError:
        raise ConfigurationError(f"bad coefficient {coeff_text!r} in Pauli term {text!r}")
    factors = []
    for token in (ops_text or "").split():
        fm = _FACTOR_RE.match(token.upper())
        if not fm:
            raise ConfigurationError(f"bad Pauli factor {token!r} in {text!r}")
        factors.append((int(fm.group(2)), fm.group(1)))
    return PauliTerm(coefficient, tuple(factors))


def _masks(term: PauliTerm, q: int):
    xmask = zmask = 0
    n_y = 0
    for i, a in term.string:
        if i >= q:
            raise ConfigurationError(f"spin index {i} out of range for {q} spins")
        bit = 1 << (q - 1 - i)  # spin 0 is the leftmost tensor factor
        if a in ("X", "Y"):
            xmask |= bit
        if a in ("Y", "Z"):
            zmask |= bit
        if a == "Y":
            n_y += 1
    return xmask, zmask, n_y


def _parity(values: np.ndarray) -> np.ndarray:
    values = values.copy()
    out = np.zeros_like(values)
    while values.any():
        out ^= values & 1
        values >>= 1
    return out


def build_operator(terms: Iterable[PauliTerm], q: int) -> np.ndarray:
    """Dense ``2**q`` matrix of a sum of Pauli strings.

    Returned real when no term contains ``Y``. Raises if the result is not
    Hermitian to ``1e-12``.
    """
    if q > MAX_SPINS:
        raise SizeGuardError(f"{q} spins exceeds the dense guard of {MAX_SPINS}")
    if q < 0:
        raise ConfigurationError("spin count must be nonnegative")
    terms = list(terms)
    dim = 1 << q
    cols = np.arange(dim, dtype=np.int64)
    complex_needed = any(a == "Y" for t in terms for _, a in t.string)
    out = np.zeros((dim, dim), dtype=complex if complex_needed else float)
    for term in terms:
        xmask, zmask, n_y = _masks(term, q)
        # Y = i X Z, so Y|c> = i (-1)^c |c^1>
        signs = 1.0 - 2.0 * _parity(cols & zmask)
        values = term.coefficient * (1j ** n_y) * signs
        if not complex_needed:
            values = values.real
        out[cols ^ xmask, cols] += values
    if out.size and np.max(np.abs(out - out.conj().T)) > HERMITIAN_TOL:
        raise ConfigurationError("operator is not Hermitian")
    return out


def operator_diagonal(terms: Iterable[PauliTerm], q: int) -> np.ndarray:
    """Diagonal of the operator in the computational basis, without building it."""
    dim = 1 << q
    cols = np.arange(dim, dtype=np.int64)
    diag = np.zeros(dim)
    for term in terms:
        xmask, zmask, _ = _masks(term, q)
        if xmask:
            continue
        diag += term.coefficient * (1.0 - 2.0 * _parity(cols & zmask))
    return diag


def _check_hermitian(a: np.ndarray, name: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"{name} must be a square matrix")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.max(np.abs(a), initial=0.0)):
        raise ConfigurationError(f"{name} is not Hermitian")


def _eigenbasis(h: np.ndarray):
    """Eigenvalues and eigenvectors, keeping the standard basis when ``h`` is diagonal.

    Keeping the product basis for a diagonal ``h`` makes the infinity norm
    refer to the same eigenbasis the transition counts are taken in.
    """
    off = h - np.diag(np.diag(h))
    if not off.size or np.max(np.abs(off)) <= HERMITIAN_TOL:
        return np.real(np.diag(h)).astype(float), None
    evals, evecs = np.linalg.eigh(h)
    return evals, evecs


@dataclass
class ExactNorms:
    inf_norm: float
    two_norm: float


class ExactSeries:
    """Self-energy terms ``T_r(z)`` of ``H + V`` computed exactly.

    Energies are shifted so that the ground energy of ``H`` is 0; states with
    shifted energy below ``cutoff`` span the low subspace.
    """

    def __init__(self, h: np.ndarray, v: np.ndarray, cutoff: float):
        h = np.asarray(h)
        v = np.asarray(v)
        _check_hermitian(h, "H")
        _check_hermitian(v, "V")
        if h.shape != v.shape:
            raise ConfigurationError(f"H {h.shape} and V {v.shape} differ in shape")
        evals, evecs = _eigenbasis(h)
        self.energies = evals - evals.min()
        self.cutoff = float(cutoff)
        if evecs is not None:
            v = evecs.conj().T @ v @ evecs
        self.low = np.flatnonzero(self.energies < self.cutoff)
        self.high = np.flatnonzero(self.energies >= self.cutoff)
        if self.low.size == 0:
            raise ConfigurationError("no states below the cutoff")
        self.v_lh = v[np.ix_(self.low, self.high)]
        self.v_hl = v[np.ix_(self.high, self.low)]
        self.v_hh = v[np.ix_(self.high, self.high)]
        self.v_ll = v[np.ix_(self.low, self.low)]
        self.gap = float(np.min(self.energies[self.energies > 1e-12 * max(1.0, self.energies.max())],
                                initial=1.0))

    def resolvent(self, z: float) -> np.ndarray:
        """Diagonal of ``G_{++}(z)``."""
        e = self.energies[self.high]
        dist = np.abs(z - e)
        if dist.size and dist.min() < 1e-9 * self.gap:
            k = int(np.argmin(dist))
            raise SingularResolventError(f"z = {z!r} is an eigenvalue {e[k]!r} of H_++",
                                         distance=float(dist[k]))
        return 1.0 / (z - e)

    def min_distance(self, z: float) -> float:
        e = self.energies[self.high]
        return float(np.min(np.abs(z - e))) if e.size else math.inf

    def terms(self, z: float, r_max: int):
        """Yield ``(r, T_r)`` for ``r = 1..r_max`` as matrices on the low subspace."""
        g = self.resolvent(z)
        yield 1, self.v_ll
        chain = g[:, None] * self.v_hl  # G V_{+-}
        for r in range(2, r_max + 1):
            yield r, self.v_lh @ chain
            chain = g[:, None] * (self.v_hh @ chain)

    def term(self, z: float, r: int) -> np.ndarray:
        for k, t in self.terms(z, r):
            if k == r:
                return t
        raise UnsupportedOrderError(f"order must be >= 1, got {r}")


def _norms(t: np.ndarray) -> ExactNorms:
    inf_norm = float(np.max(np.sum(np.abs(t), axis=1), initial=0.0))
    two_norm = float(np.linalg.norm(t, 2)) if t.size else 0.0
    return ExactNorms(inf_norm, two_norm)


def exact_term(h: np.ndarray, v: np.ndarray, cutoff: float, z: float, r: int) -> ExactNorms:
    """``||T_r||_inf`` (row sums in the eigenbasis of ``H``) and ``||T_r||_2``."""
    if r < 2:
        raise UnsupportedOrderError(f"order must be >= 2, got {r}")
    return _norms(ExactSeries(h, v, cutoff).term(z, r))


def exact_norms(series: ExactSeries, z: float, orders: Sequence[int]) -> dict[int, ExactNorms]:
    """Norms of several orders from one pass over the chain."""
    wanted = set(orders)
    if any(r < 2 for r in wanted):
        raise UnsupportedOrderError("orders must be >= 2")
    out = {}
    if not wanted:
        return out
    for r, t in series.terms(z, max(wanted)):
        if r in wanted:
            out[r] = _norms(t)
    return out


@dataclass
class SelfEnergyError:
    """Truncation error of the self-energy beyond order ``R``.

    ``value`` is ``||sum_{r=R+1}^{r_max} T_r||_2``; ``tail`` is the geometric
    bound on everything past ``r_max``.
    """

    value: float
    tail: float
    r_max: int
    term_norms: dict[int, float] = field(default_factory=dict)
    convergence_suspect: bool = False

    @property
    def total(self) -> float:
        return self.value + self.tail


def self_energy_error(h, v, cutoff: float, z: float, R: int, r_max: int = 40,
                      rel_stop: float = 1e-3) -> SelfEnergyError:
    if R < 1:
        raise UnsupportedOrderError(f"truncation order must be >= 1, got {R}")
    series = h if isinstance(h, ExactSeries) else ExactSeries(h, v, cutoff)
    running = None
    norms = {}
    last_norm = 0.0
    suspect = False
    used = R
    for r, t in series.terms(z, r_max):
        if r <= R:
            continue
        running = t.copy() if running is None else running + t
        last_norm = float(np.linalg.norm(t, 2)) if t.size else 0.0
        if norms and last_norm >= norms[r - 1] > 0:
            suspect = True
        norms[r] = last_norm
        used = r
        total_norm = float(np.linalg.norm(running, 2)) if running.size else 0.0
        if last_norm <= rel_stop * total_norm or total_norm == 0.0:
            break
    value = float(np.linalg.norm(running, 2)) if running is not None and running.size else 0.0

    vnorm = float(np.linalg.norm(series.v_hh, 2)) if series.v_hh.size else 0.0
    d = series.min_distance(z)
    q = vnorm / d if d > 0 else math.inf
    if last_norm == 0.0:
        tail = 0.0
    elif q < 1:
        tail = last_norm * q / (1 - q)
    else:
        tail = math.inf
        suspect = True
    if suspect:
        warnings.warn("self-energy terms are not decreasing; the series may not converge",
                      RuntimeWarning, stacklevel=2)
    return SelfEnergyError(value, tail, used, norms, suspect)


def _cluster_levels(evals: np.ndarray, rel_tol: float):
    scale = max(1.0, float(np.max(np.abs(evals))))
    tol = rel_tol * scale
    order = np.argsort(evals, kind="stable")
    groups: list[list[int]] = []
    for idx in order:
        if groups and evals[idx] - evals[groups[-1][-1]] <= tol:
            if evals[idx] - evals[groups[-1][0]] > tol:
                raise DegeneracyAmbiguousError(
                    f"eigenvalues {evals[groups[-1][0]]!r}..{evals[idx]!r} chain across the "
                    f"clustering tolerance {tol!r}"
                )
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    return groups


def derive_transition_model(hsub: np.ndarray, couplings: Sequence[np.ndarray],
                            full_diagonal: Optional[np.ndarray] = None,
                            rel_tol: float = 1e-9, zero_tol: float = 1e-12):
    """Read the spectrum, ``M``, ``lambda`` and ``omega`` off explicit operators.

    ``couplings[i]`` is the perturbation acting on subsystem ``i`` together
    with the bath degrees of freedom it touches, with the subsystem as the
    leading tensor factor. Counts and maxima are taken in the basis
    (subsystem eigenbasis) x (bath computational basis).

    ``full_diagonal``, when given, is the diagonal of the full perturbation
    in the product eigenbasis and defines ``omega`` directly; otherwise the
    per-subsystem diagonal maxima are summed.
    """
    hsub = np.asarray(hsub)
    dsub = hsub.shape[0]
    if dsub > 256:
        raise SizeGuardError(f"subsystem dimension {dsub} exceeds 256")
    _check_hermitian(hsub, "subsystem Hamiltonian")
    evals, evecs = _eigenbasis(hsub)
    groups = _cluster_levels(evals, rel_tol)
    level_of = np.empty(dsub, dtype=int)
    for k, grp in enumerate(groups):
        level_of[grp] = k
    energies = [float(np.mean(evals[g])) for g in groups]
    ell = len(groups)
    if ell < 2:
        raise ConfigurationError("subsystem Hamiltonian has a single level")
    spectrum = SubsystemSpectrum(tuple(energies), tuple(len(g) for g in groups))

    M = np.zeros((ell, ell), dtype=int)
    lambdas = []
    omega_parts = []
    for i, frag in enumerate(couplings):
        frag = np.asarray(frag)
        if frag.shape[0] % dsub:
            raise ConfigurationError(
                f"coupling {i} has dimension {frag.shape[0]}, not a multiple of {dsub}"
            )
        _check_hermitian(frag, f"coupling {i}")
        dbath = frag.shape[0] // dsub
        if evecs is not None:
            u = np.kron(evecs, np.eye(dbath))
            frag = u.conj().T @ frag @ u
        mag = np.abs(frag)
        diag = np.diag(mag).copy()
        np.fill_diagonal(mag, 0.0)
        lambdas.append(float(mag.max(initial=0.0)))
        omega_parts.append(float(diag.max(initial=0.0)))
        nonzero = mag > zero_tol
        row_level = np.repeat(level_of, dbath)
        for s in range(ell):
            rows = nonzero[row_level == s]
            for t in range(ell):
                if rows.size:
                    M[s, t] = max(M[s, t], int(rows[:, row_level == t].sum(axis=1).max()))
    if full_diagonal is not None:
        omega = float(np.max(np.abs(full_diagonal), initial=0.0))
    else:
        omega = math.fsum(omega_parts)
    neighbor_only = not any(M[s, t] for s in range(ell) for t in range(ell) if abs(s - t) > 1)
    transitions = TransitionModel(tuple(lambdas), omega,
                                  tuple(tuple(int(x) for x in row) for row in M), neighbor_only)
    return spectrum, transitions


def walk_sum_oracle(cfg: ModelConfig, r: int) -> float:
    """Sum the walk bound by enumerating walks on labelled configurations.

    Every walk starts at a low configuration, stays in the high subspace for
    its ``r - 1`` intermediate steps and lands in the low subspace. Steps
    moving subsystem ``i`` from level ``s`` to ``t`` weigh ``lambda_i M_st``,
    diagonal steps weigh ``omega``, and each intermediate configuration
    contributes ``1/|z - E|``. The maximum over starting configurations is
    returned.
    """
    m, ell = cfg.num_subsystems, cfg.num_levels
    if m > 3 or ell > 3 or r > 6:
        raise SizeGuardError(f"walk enumeration limited to m<=3, l<=3, r<=6 (got {m}, {ell}, {r})")
    if r < 2:
        raise UnsupportedOrderError(f"order must be >= 2, got {r}")
    levels = cfg.spectrum.levels
    M = cfg.transitions.M
    lam = cfg.transitions.lambdas
    omega = cfg.transitions.omega
    z, cutoff = cfg.z, cfg.cutoff

    def energy(c):
        return sum(levels[x] for x in c)

    def walk(c, step, weight):
        # weight already carries every lambda, M, omega and resolvent factor so far
        final = step == r
        total = 0.0
        for i, s in enumerate(c):
            for t in range(ell):
                if not M[s][t]:
                    continue
                nxt = c[:i] + (t,) + c[i + 1:]
                e = energy(nxt)
                w = weight * lam[i] * M[s][t]
                if final:
                    if e < cutoff:
                        total += w
                elif e >= cutoff:
                    total += walk(nxt, step + 1, w / abs(z - e))
        if omega > 0 and not final:
            # diagonal steps keep c in the high subspace (step >= 2 here)
            total += walk(c, step + 1, weight * omega / abs(z - energy(c)))
        return total

    best = 0.0
    for c in itertools.product(range(ell), repeat=m):
        e0 = energy(c)
        if e0 >= cutoff:
            continue
        total = 0.0
        for i, s in enumerate(c):
            for t in range(ell):
                if not M[s][t]:
                    continue
                nxt = c[:i] + (t,) + c[i + 1:]
                e = energy(nxt)
                if e >= cutoff:
                    total += walk(nxt, 2, lam[i] * M[s][t] / abs(z - e))
        best = max(best, total)
    return best


def spectral_error(htilde: np.ndarray, heff: np.ndarray, n_qubits: int,
                   multiplicity: int = 1) -> float:
    """Largest deviation between the low spectrum of ``htilde`` and that of ``heff``.

    The ``multiplicity * 2**n_qubits`` lowest eigenvalues of ``htilde`` are
    compared with the eigenvalues of ``heff``, each repeated
    ``multiplicity`` times (``heff`` tensored with a rank-``multiplicity``
    projector), after removing the mean of each list.
    """
    dim = 1 << n_qubits
    if heff.shape != (dim, dim):
        raise ConfigurationError(f"H_eff has shape {heff.shape}, expected {(dim, dim)}")
    count = dim * multiplicity
    if htilde.shape[0] < count:
        raise ConfigurationError(f"H~ has dimension {htilde.shape[0]} < {count}")
    low = np.linalg.eigvalsh(htilde)[:count]
    target = np.repeat(np.linalg.eigvalsh(heff), multiplicity)
    return float(np.max(np.abs((low - low.mean()) - (target - target.mean()))))


def geometric_bound(vnorm: float, d: float, r: int) -> float:
    """Crude bound ``||V||^r / d^(r-1)`` from submultiplicativity."""
    if not d > 0:
        raise ValueError(f"distance d must be positive, got {d}")
    return vnorm**r / d ** (r - 1)


GOLDEN_FIELDS = ("order", "z", "exact_inf", "exact_2")


def write_golden(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=GOLDEN_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k]
                             for k in GOLDEN_FIELDS})


def read_golden(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{"order": int(row["order"]), "z": float(row["z"]),
                 "exact_inf": float(row["exact_inf"]), "exact_2": float(row["exact_2"])}
                for row in csv.DictReader(fh)]
