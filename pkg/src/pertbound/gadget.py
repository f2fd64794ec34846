"""The 11-spin two-body gadget whose low-energy physics is the three-body
``H_eff = alpha1 X1 X2 X3 + alpha2 X2 Y4 Z5``.

Spin numbering: logical spins 1..5 are indices 0..4, the first ancilla
triangle (u1, u2, u3) is 5..7 and the second (v1, v2, v3) is 8..10.

Each ancilla triangle is ferromagnetic, ``-Delta/4 (ZZ + ZZ + ZZ)``: its
ground level is ``{|000>, |111>}`` and every single flip costs ``Delta``, so
the three-flip path contributes ``6 mu^3 / Delta^2 = alpha`` at third order.
``ferromagnetic=False`` flips the sign of the ancilla coupling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .model import ModelConfig
from .oracle import (
    ExactSeries,
    PauliTerm,
    build_operator,
    derive_transition_model,
    operator_diagonal,
    self_energy_error,
    spectral_error,
)

__all__ = [
    "GadgetSpec",
    "GadgetModel",
    "LeadingOrderReport",
    "build_gadget",
    "verify_leading_orders",
    "spectral_comparison",
    "NUM_SPINS",
    "LOGICAL",
    "ANCILLA_U",
    "ANCILLA_V",
]

NUM_SPINS = 11
LOGICAL = (0, 1, 2, 3, 4)
ANCILLA_U = (5, 6, 7)
ANCILLA_V = (8, 9, 10)

# Bath factor paired with each ancilla spin in the two couplings.
_COUPLING_U = ((0, "X"), (1, "X"), (2, "X"))
_COUPLING_V = ((3, "Y"), (1, "X"), (4, "Z"))


@dataclass(frozen=True)
class GadgetSpec:
    alpha1: float
    alpha2: float
    delta: float = 1.0
    ferromagnetic: bool = True

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "delta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not self.delta > 0:
            raise ConfigurationError(f"delta must be positive, got {self.delta}")

    @property
    def mu1(self) -> float:
        return float(np.cbrt(self.alpha1 * self.delta**2 / 6))

    @property
    def mu2(self) -> float:
        return float(np.cbrt(self.alpha2 * self.delta**2 / 6))

    @property
    def mu_ratio(self) -> float:
        """``max |mu_i| / Delta``; the construction relies on this being small."""
        return max(abs(self.mu1), abs(self.mu2)) / self.delta


def _triangle(spins, coupling):
    a, b, c = spins
    return [PauliTerm(coupling, ((a, "Z"), (b, "Z"))),
            PauliTerm(coupling, ((b, "Z"), (c, "Z"))),
            PauliTerm(coupling, ((a, "Z"), (c, "Z")))]


def _coupling(mu, ancillas, partners):
    return [PauliTerm(mu, ((anc, "X"), partner)) for anc, partner in zip(ancillas, partners)]


@dataclass
class GadgetModel:
    spec: GadgetSpec
    h_terms: list[PauliTerm]
    v_terms: list[PauliTerm]
    heff_terms: list[PauliTerm]
    config: ModelConfig
    num_spins: int = NUM_SPINS

    @property
    def htilde_terms(self) -> list[PauliTerm]:
        return self.h_terms + self.v_terms

    def operators(self):
        """Dense ``(H, V)`` on all 11 spins."""
        return build_operator(self.h_terms, self.num_spins), build_operator(self.v_terms, self.num_spins)

    def heff_operator(self) -> np.ndarray:
        return build_operator(self.heff_terms, len(LOGICAL))


def _local_fragment(coupling_terms, ancillas):
    """Re-index a coupling onto (ancilla triangle, touched bath spins) with the triangle first."""
    bath = sorted({i for t in coupling_terms for i, _ in t.string if i not in ancillas})
    mapping = {s: k for k, s in enumerate(ancillas)}
    mapping.update({s: len(ancillas) + k for k, s in enumerate(bath)})
    local = [t.relabelled(mapping) for t in coupling_terms]
    return build_operator(local, len(ancillas) + len(bath))


def build_gadget(spec: GadgetSpec) -> GadgetModel:
    if spec.mu_ratio > 0.1:
        warnings.warn(f"max|mu|/Delta = {spec.mu_ratio:.3g} is not small; "
                      "perturbation theory may not apply", RuntimeWarning, stacklevel=2)
    sign = -1.0 if spec.ferromagnetic else 1.0
    coupling = sign * spec.delta / 4
    h_terms = _triangle(ANCILLA_U, coupling) + _triangle(ANCILLA_V, coupling)
    v1 = _coupling(spec.mu1, ANCILLA_U, _COUPLING_U)
    v2 = _coupling(spec.mu2, ANCILLA_V, _COUPLING_V)
    heff_terms = [PauliTerm(spec.alpha1, ((0, "X"), (1, "X"), (2, "X"))),
                  PauliTerm(spec.alpha2, ((1, "X"), (3, "Y"), (4, "Z")))]

    hsub = build_operator(_triangle((0, 1, 2), coupling), 3)
    full_diag = operator_diagonal(v1 + v2, NUM_SPINS)
    spectrum, transitions = derive_transition_model(
        hsub,
        [_local_fragment(v1, ANCILLA_U), _local_fragment(v2, ANCILLA_V)],
        full_diagonal=full_diag,
    )
    config = ModelConfig(spectrum, transitions, cutoff=spec.delta / 2, z=0.0)
    return GadgetModel(spec, h_terms, v1 + v2, heff_terms, config)


@dataclass
class LeadingOrderReport:
    distance: float
    leakage: float
    tolerance: float
    shift: float
    heff_norm: float
    sector_dim: int
    z: float

    @property
    def passed(self) -> bool:
        return self.distance <= self.tolerance and self.leakage <= self.tolerance

    def lines(self) -> list[str]:
        verdict = "PASS" if self.passed else "FAIL"
        return [
            f"leading orders T1+T2+T3 vs H_eff (x) Pi at z={self.z!r}: {verdict}",
            f"  distance = {self.distance:.6e}  leakage = {self.leakage:.6e}  "
            f"tolerance = {self.tolerance:.6e}",
            f"  constant shift = {self.shift!r}  ||H_eff||_2 = {self.heff_norm!r}  "
            f"sector dimension = {self.sector_dim}",
        ]


def _low_restricted(series: ExactSeries, op: np.ndarray) -> np.ndarray:
    return op[np.ix_(series.low, series.low)]


def verify_leading_orders(spec: GadgetSpec, z: float = 0.0,
                          model: Optional[GadgetModel] = None) -> LeadingOrderReport:
    """Compare ``T1 + T2 + T3`` on the low subspace with ``H_eff (x) Pi`` plus a shift.

    ``Pi`` projects the ancillas onto the joint +1 eigenspace of
    ``X_u1 X_u2 X_u3`` and ``X_v1 X_v2 X_v3``, both exact symmetries of the
    gadget. The distance is the spectral norm of the mismatch inside that
    sector; leakage is the norm of the block coupling the sector to the rest
    of the low subspace.
    """
    model = build_gadget(spec) if model is None else model
    h, v = model.operators()
    series = ExactSeries(h, v, spec.delta / 2)
    total = sum(t for _, t in series.terms(z, 3))

    q = NUM_SPINS
    xu = build_operator([PauliTerm(1.0, tuple((i, "X") for i in ANCILLA_U))], q)
    xv = build_operator([PauliTerm(1.0, tuple((i, "X") for i in ANCILLA_V))], q)
    proj = _low_restricted(series, (np.eye(1 << q) + xu) @ (np.eye(1 << q) + xv) / 4)
    w, vecs = np.linalg.eigh(proj)
    inside = vecs[:, w > 0.5]
    outside = vecs[:, w <= 0.5]

    heff_full = build_operator(model.heff_terms, q)
    target = inside.conj().T @ _low_restricted(series, heff_full) @ inside
    block = inside.conj().T @ total @ inside
    dim = block.shape[0]
    shift = float(np.real(np.trace(block - target))) / dim if dim else 0.0
    mismatch = block - target - shift * np.eye(dim)
    distance = float(np.linalg.norm(mismatch, 2)) if dim else 0.0
    cross = outside.conj().T @ total @ inside
    leakage = float(np.linalg.norm(cross, 2)) if cross.size else 0.0
    heff_norm = float(np.linalg.norm(model.heff_operator(), 2))
    tolerance = 10 * spec.mu_ratio * heff_norm
    return LeadingOrderReport(distance, leakage, tolerance, shift, heff_norm, dim, z)


@dataclass
class SpectralComparison:
    spectral_error: float
    self_energy_error: float
    tail: float
    multiplicity: int
    r_max: int

    @property
    def bound(self) -> float:
        return self.self_energy_error + self.tail


def spectral_comparison(spec: GadgetSpec, z: float = 0.0, R: int = 3,
                        model: Optional[GadgetModel] = None) -> SpectralComparison:
    """Actual low-spectrum error of ``H_eff`` against the truncated self-energy error.

    The low subspace carries one copy of ``H_eff`` per ancilla logical state,
    so ``H_eff`` eigenvalues are compared with multiplicity
    ``dim(L_-) / 2**5``.
    """
    model = build_gadget(spec) if model is None else model
    h, v = model.operators()
    series = ExactSeries(h, v, spec.delta / 2)
    multiplicity = series.low.size // (1 << len(LOGICAL))
    actual = spectral_error(h + v, model.heff_operator(), len(LOGICAL), multiplicity)
    err = self_energy_error(series, None, spec.delta / 2, z, R)
    return SpectralComparison(actual, err.value, err.tail, multiplicity, err.r_max)
