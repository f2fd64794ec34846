"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (collected again in the
terminal summary) and then asserts, so a failing criterion fails the run.
"""

import dataclasses
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from _models import random_model
from pertbound import automaton
from pertbound.config import PauliModel, RunConfig, emit_config
from pertbound.gadget import GadgetSpec, spectral_comparison, verify_leading_orders
from pertbound.model import ModelConfig, SubsystemSpectrum, TransitionModel
from pertbound.oracle import exact_norms, geometric_bound, walk_sum_oracle

Z_SWEEP = (0.0, 0.25, -0.25, 0.45, -0.45)
ORDERS = range(2, 7)
SOUNDNESS_RTOL = 1e-10


def run_value(cfg, r):
    return automaton.run(automaton.build(cfg), r, workers=1).value


def test_c1_soundness(gadget, gadget_series, record):
    start = time.perf_counter()
    violations = []
    for z in Z_SWEEP:
        a = automaton.build(dataclasses.replace(gadget.config, z=z))
        exact = exact_norms(gadget_series, z, ORDERS)
        for r in ORDERS:
            ca = automaton.run(a, r, workers=1).value
            if ca < exact[r].inf_norm * (1 - SOUNDNESS_RTOL):
                violations.append((r, z, ca, exact[r].inf_norm))
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 60
    record("C1 soundness", ok,
           f"{len(violations)} violations over {len(Z_SWEEP) * len(ORDERS)} rows in {elapsed:.1f}s")
    assert not violations
    assert elapsed < 60


def test_c2_oracle_equivalence(gadget, record):
    start = time.perf_counter()
    worst = 0.0
    checked = 0

    def compare(cfg, orders):
        nonlocal worst, checked
        a = automaton.build(cfg)
        for r in orders:
            ca = automaton.run(a, r, workers=1).value
            ref = walk_sum_oracle(cfg, r)
            err = abs(ca - ref) / ref if ref else abs(ca)
            worst = max(worst, err)
            checked += 1

    for z in Z_SWEEP:
        compare(dataclasses.replace(gadget.config, z=z), ORDERS)
    rng = np.random.default_rng(20240611)
    for _ in range(50):
        compare(random_model(rng), range(2, 6))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 120
    record("C2 oracle equivalence", ok,
           f"{checked} runs, worst relative deviation {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-12
    assert elapsed < 120


def test_c3_second_order_closed_form(record):
    rng = np.random.default_rng(3)
    expected = ["1 * M_01 M_10 * m_{(2)} / |(z-E_1)|"]
    traces = []
    values_ok = True
    for _ in range(10):
        cfg = random_model(rng, max_ell=2, omega_choices=(0.0, 0.2))
        res = automaton.run(automaton.build(cfg, trace=True), 2, workers=1)
        traces.append(res.trace)
        tm, e1 = cfg.transitions, cfg.spectrum.levels[1]
        closed = tm.M[0][1] * tm.M[1][0] / abs(cfg.z - e1) * sum(x * x for x in tm.lambdas)
        values_ok &= res.value == pytest.approx(closed, rel=1e-12)
    ok = all(t == expected for t in traces) and values_ok
    record("C3 second-order trace", ok, traces[0][0] if traces[0] else "no terms")
    assert ok


def test_c4_fourth_order_closed_form(record):
    rng = np.random.default_rng(4)
    expected = [
        "1 * M_01 M_10 omega^2 * m_{(2)} / |(z-E_1)^3|",
        "2 * M_01^2 M_10^2 * m_{(2,2)} / |(z-E_1)^2 (z-2E_1)|",
        "1 * M_01 M_10 M_12 M_21 * m_{(4)} / |(z-E_1)^2 (z-E_2)|",
    ]
    traces = []
    for m in (2, 3, 4):
        e1 = rng.uniform(0.6, 1.4)
        sp = SubsystemSpectrum((0.0, e1, e1 + rng.uniform(0.7, 1.5)))
        M = ((0, int(rng.integers(1, 4)), 0),
             (int(rng.integers(1, 4)), 0, int(rng.integers(1, 4))),
             (0, int(rng.integers(1, 4)), 0))
        tm = TransitionModel(tuple(rng.uniform(0.05, 0.3, m)), float(rng.uniform(0.01, 0.1)), M)
        cfg = ModelConfig(sp, tm, z=float(rng.uniform(-0.5, 0.4)))
        traces.append(automaton.run(automaton.build(cfg, trace=True), 4, workers=1).trace)
    ok = all(t == expected for t in traces)
    record("C4 fourth-order trace", ok, f"{len(traces[0])} terms, coefficients "
           + ",".join(line.split(" ", 1)[0] for line in traces[0]))
    assert ok


def test_c5_geometric_domination(gadget, gadget_series, record):
    _, v = gadget.operators()
    vnorm = float(np.linalg.norm(v, 2))
    exact_ok = ca_ok = True
    for z in Z_SWEEP:
        a = automaton.build(dataclasses.replace(gadget.config, z=z))
        exact = exact_norms(gadget_series, z, ORDERS)
        for r in ORDERS:
            geo = geometric_bound(vnorm, a.min_distance, r)
            exact_ok &= geo >= exact[r].two_norm
            if r >= 3:
                ca_ok &= automaton.run(a, r, workers=1).value < geo
    ok = exact_ok and ca_ok
    record("C5 geometric domination", ok,
           f"geometric >= exact_2: {exact_ok}; ca < geometric for r>=3: {ca_ok}")
    assert ok


def test_c6_spectral_error_ordering(gadget, record):
    cmp = spectral_comparison(gadget.spec, z=0.0, R=3, model=gadget)
    ok = cmp.spectral_error <= cmp.bound + 1e-10
    record("C6 spectral-error ordering", ok,
           f"actual {cmp.spectral_error:.3e} <= {cmp.self_energy_error:.3e} + tail {cmp.tail:.1e}")
    assert ok


def test_c7_gadget_identity(gadget, record):
    report = verify_leading_orders(gadget.spec, 0.0, gadget)
    spec = gadget.spec
    mu_ok = all(abs(6 * mu**3 / spec.delta**2 - alpha) <= 1e-12 * abs(alpha)
                for mu, alpha in ((spec.mu1, spec.alpha1), (spec.mu2, spec.alpha2)))
    ok = report.passed and mu_ok
    record("C7 gadget identity", ok,
           f"distance {report.distance:.2e} <= tolerance {report.tolerance:.2e}, mu formula {mu_ok}")
    assert ok


def test_c8_symmetry_and_monotonicity(record):
    rng = np.random.default_rng(8)
    failures = []
    for k in range(100):
        cfg = random_model(rng)
        r = int(rng.integers(2, 6))
        tm = cfg.transitions
        base = run_value(cfg, r)

        def variant(**changes):
            return run_value(dataclasses.replace(cfg, transitions=dataclasses.replace(tm, **changes)), r)

        perm = tuple(rng.permutation(tm.lambdas))
        if variant(lambdas=perm) != pytest.approx(base, rel=1e-12):
            failures.append((k, "permutation"))
        i = int(rng.integers(len(tm.lambdas)))
        if variant(lambdas=tuple(x * 1.5 + 0.01 if j == i else x for j, x in enumerate(tm.lambdas))) < base:
            failures.append((k, "lambda"))
        if variant(omega=tm.omega + 0.05) < base:
            failures.append((k, "omega"))
        s = int(rng.integers(len(tm.M)))
        t = int(rng.integers(max(0, s - 1), min(len(tm.M), s + 2)))
        M = [list(row) for row in tm.M]
        M[s][t] += 1
        if variant(M=tuple(map(tuple, M))) < base:
            failures.append((k, "M"))
    ok = not failures
    record("C8 symmetry and monotonicity", ok, f"100 configs, failures: {failures or 'none'}")
    assert ok


def test_c9_determinism(gadget, tmp_path, record):
    pauli = PauliModel(gadget.num_spins, tuple(gadget.h_terms), tuple(gadget.v_terms))
    path = tmp_path / "gadget.toml"
    path.write_text(emit_config(gadget.config, pauli, orders=list(range(2, 9)),
                                z_values=Z_SWEEP))
    outputs = []
    for threads in ("1", "4", "1", "4"):
        env = dict(os.environ, PB_THREADS=threads)
        proc = subprocess.run([sys.executable, "-m", "pertbound.cli", "bound", "--config", str(path),
                               "--eta", "1e-4", "--no-timing"],
                              capture_output=True, env=env, check=True)
        outputs.append(proc.stdout)
    ok = len(set(outputs)) == 1 and outputs[0].count(b"\n") == 1 + 7 * len(Z_SWEEP)
    record("C9 determinism", ok, f"{len(outputs)} runs, {len(set(outputs))} distinct outputs")
    assert ok
