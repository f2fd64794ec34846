import numpy as np
import pytest

from pertbound.errors import ConfigurationError
from pertbound.gadget import (
    ANCILLA_U,
    ANCILLA_V,
    LOGICAL,
    GadgetSpec,
    build_gadget,
    verify_leading_orders,
)


def test_mu_from_alpha():
    spec = GadgetSpec(2e-3, -1e-3, 2.0)
    assert 6 * spec.mu1**3 / spec.delta**2 == pytest.approx(2e-3, rel=1e-12)
    assert 6 * spec.mu2**3 / spec.delta**2 == pytest.approx(-1e-3, rel=1e-12)
    assert spec.mu2 < 0


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        GadgetSpec(1e-3, 1e-3, 0.0)
    with pytest.raises(ConfigurationError):
        GadgetSpec(float("nan"), 1e-3, 1.0)


def test_strong_coupling_warns():
    with pytest.warns(RuntimeWarning):
        build_gadget(GadgetSpec(1.0, 1.0, 1.0))


def test_layout(gadget):
    assert gadget.num_spins == 11
    touched = {i for t in gadget.htilde_terms for i, _ in t.string}
    assert touched == set(LOGICAL) | set(ANCILLA_U) | set(ANCILLA_V)
    # each ancilla couples through exactly one X to one logical partner
    for anc in ANCILLA_U + ANCILLA_V:
        couplings = [t for t in gadget.v_terms if (anc, "X") in t.string]
        assert len(couplings) == 1 and couplings[0].locality == 2
    h, v = gadget.operators()
    assert h.shape == (2048, 2048)
    assert np.allclose(np.diag(np.diag(h)), h)


def test_first_orders(gadget_series, gadget):
    t1, t2, t3 = (t for _, t in gadget_series.terms(0.0, 3))
    assert np.max(np.abs(t1)) == 0.0
    spec = gadget.spec
    # second order is a pure shift on the low subspace
    shift = -3 * (spec.mu1**2 + spec.mu2**2)
    np.testing.assert_allclose(t2, shift * np.eye(t2.shape[0]), atol=1e-15)
    assert np.linalg.norm(t3, 2) == pytest.approx(spec.alpha1 + spec.alpha2, rel=1e-12)


def test_verify_leading_orders(gadget):
    report = verify_leading_orders(gadget.spec, 0.0, gadget)
    assert report.passed
    assert report.sector_dim == 32
    assert report.distance < 1e-12
    assert report.lines()[0].endswith("PASS")


def test_antiferro_variant_has_literal_spectrum():
    model = build_gadget(GadgetSpec(1e-3, 1e-3, 1.0, ferromagnetic=False))
    sp, tm = model.config.spectrum, model.config.transitions
    assert sp.degeneracies == (6, 2)
    assert tm.M == ((2, 1), (3, 0))
    assert not verify_leading_orders(model.spec, 0.0, model).passed
