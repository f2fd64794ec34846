"""Command-line front end.

Subcommands::

    pertbound bound   --config model.toml --orders 2..8 --z 0,0.25 [--trace] [--eta 1e-6]
    pertbound compare --config model.toml --orders 2..6 --z 0
    pertbound gadget  --alpha1 1e-3 --alpha2 1e-3 --delta 1 [--out gadget.toml]

Exit codes: 0 success, 1 soundness violation, 2 usage/config error,
3 numeric guard (singular resolvent or size guard).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import automaton
from .config import PauliModel, RunConfig, emit_config, load_config, parse_orders, parse_z_list
from .errors import ConfigurationError, PertboundError, SingularResolventError, SizeGuardError
from .gadget import GadgetSpec, build_gadget, verify_leading_orders
from .oracle import MAX_SPINS, ExactSeries, build_operator, exact_norms, geometric_bound

EXIT_OK = 0
EXIT_UNSOUND = 1
EXIT_USAGE = 2
EXIT_GUARD = 3

BOUND_HEADER = ("order", "z", "ca_bound", "tail_bound", "tuples_total", "wall_ms")
COMPARE_HEADER = ("order", "z", "ca_bound", "exact_inf", "exact_2", "geometric", "ratio_ca_exact")

# Relative slack when checking ca_bound >= exact_inf (floating-point summation order).
SOUNDNESS_RTOL = 1e-10


def fmt(x) -> str:
    """Shortest round-trip decimal for floats; ``str`` for everything else."""
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _warn(msg: str) -> None:
    print(f"pertbound: {msg}", file=sys.stderr)


def _writer(buf):
    return csv.writer(buf, lineterminator="\n")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "orders", None) is not None:
        cfg.orders = parse_orders(args.orders)
        RunConfig.__post_init__(cfg)
    if getattr(args, "z", None) is not None:
        cfg.z_values = parse_z_list(args.z)
    if getattr(args, "trace", False):
        cfg.trace = True
    if getattr(args, "eta", None) is not None:
        cfg.eta = args.eta
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    return cfg


def cmd_bound(cfg: RunConfig, timing: bool = True, workers: Optional[int] = None):
    """Return ``(csv_text, trace_text, exit_code)`` for a bound run."""
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(BOUND_HEADER)
    trace_out = []
    code = EXIT_OK
    rows = {}
    for z in cfg.z_values:
        model = dataclasses.replace(cfg.model, z=z)
        try:
            a = automaton.build(model, trace=cfg.trace)
        except SingularResolventError as exc:
            _warn(f"skipping z={z!r}: {exc}")
            code = EXIT_GUARD
            continue
        below_eta = cfg.eta is None
        for r in sorted(cfg.orders):
            start = time.perf_counter()
            res = automaton.run(a, r, workers=workers)
            elapsed = (time.perf_counter() - start) * 1e3
            if not below_eta and res.value < cfg.eta:
                below_eta = True
            tail = automaton.tail_bound(a, r, res.value) if below_eta else None
            rows[(r, z)] = (r, z, res.value, tail, res.tuples_total,
                            round(elapsed, 3) if timing else None)
            if res.trace is not None:
                trace_out.append(f"# order={r} z={z!r} bound={res.value!r}")
                trace_out.extend(res.trace)
    for r in sorted(cfg.orders):
        for z in cfg.z_values:
            if (r, z) in rows:
                w.writerow([fmt(x) for x in rows[(r, z)]])
    trace_text = "\n".join(trace_out) + "\n" if trace_out else ""
    return buf.getvalue(), trace_text, code


def cmd_compare(cfg: RunConfig, workers: Optional[int] = None):
    """Return ``(csv_text, exit_code)`` comparing automaton bounds with exact norms."""
    if cfg.pauli is None:
        raise ConfigurationError("compare needs [pauli.H] and [pauli.V] sections")
    if cfg.pauli.spins > MAX_SPINS:
        raise SizeGuardError(
            f"{cfg.pauli.spins} spins exceeds the exact-oracle guard of {MAX_SPINS}; "
            "use the 'bound' subcommand instead"
        )
    h = build_operator(cfg.pauli.h_terms, cfg.pauli.spins)
    v = build_operator(cfg.pauli.v_terms, cfg.pauli.spins)
    series = ExactSeries(h, v, cfg.model.cutoff)
    vnorm = float(np.linalg.norm(v, 2))
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(COMPARE_HEADER)
    code = EXIT_OK
    rows = {}
    for z in cfg.z_values:
        model = dataclasses.replace(cfg.model, z=z)
        try:
            a = automaton.build(model)
            norms = exact_norms(series, z, cfg.orders)
        except SingularResolventError as exc:
            _warn(f"skipping z={z!r}: {exc}")
            code = max(code, EXIT_GUARD)
            continue
        for r in sorted(cfg.orders):
            ca = automaton.run(a, r, workers=workers).value
            exact = norms[r]
            geo = geometric_bound(vnorm, a.min_distance, r) if a.min_distance < math.inf else 0.0
            ratio = ca / exact.inf_norm if exact.inf_norm > 0 else None
            if ca < exact.inf_norm * (1 - SOUNDNESS_RTOL):
                _warn(f"SOUNDNESS VIOLATION at order {r}, z={z!r}: "
                      f"ca_bound={ca!r} < exact_inf={exact.inf_norm!r}")
                code = EXIT_UNSOUND
            rows[(r, z)] = (r, z, ca, exact.inf_norm, exact.two_norm, geo, ratio)
    for r in sorted(cfg.orders):
        for z in cfg.z_values:
            if (r, z) in rows:
                w.writerow([fmt(x) for x in rows[(r, z)]])
    return buf.getvalue(), code


def cmd_gadget(alpha1: float, alpha2: float, delta: float, ferromagnetic: bool = True,
               verify: bool = True):
    """Return ``(config_text, report_lines)`` for the gadget with the given couplings."""
    spec = GadgetSpec(alpha1, alpha2, delta, ferromagnetic)
    model = build_gadget(spec)
    cfg = model.config
    pauli = PauliModel(model.num_spins, tuple(model.h_terms), tuple(model.v_terms))
    text = emit_config(cfg, pauli, orders=list(range(2, 9)), z_values=[0.0])
    tm = cfg.transitions
    report = [
        f"mu1 = {spec.mu1!r}",
        f"mu2 = {spec.mu2!r}",
        f"max|mu|/Delta = {spec.mu_ratio!r}",
        f"spectrum levels = {list(cfg.spectrum.levels)} degeneracies = {list(cfg.spectrum.degeneracies)}",
        f"M = {[list(row) for row in tm.M]}",
        f"lambda = {list(tm.lambdas)}",
        f"omega = {tm.omega!r}",
    ]
    if verify:
        report += verify_leading_orders(spec, 0.0, model).lines()
    return text, report


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _finite(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return value


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pertbound", description="Symmetric-polynomial bounds on perturbative terms.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_flags(p):
        p.add_argument("--config", required=True, help="model configuration (TOML)")
        p.add_argument("--orders", help="orders, e.g. 2..8 or 2,3,5")
        p.add_argument("--z", help="comma-separated z values")
        p.add_argument("--out", help="CSV output path (default stdout)")

    p_bound = sub.add_parser("bound", help="automaton bounds on ||T_r||_inf")
    run_flags(p_bound)
    p_bound.add_argument("--trace", action="store_true", help="write symbolic terms to <out>.trace")
    p_bound.add_argument("--eta", type=_positive, help="threshold below which tail bounds are reported")
    p_bound.add_argument("--no-timing", action="store_true",
                         help="leave wall_ms empty so output is reproducible byte for byte")

    p_cmp = sub.add_parser("compare", help="automaton bounds against exact norms")
    run_flags(p_cmp)

    p_gad = sub.add_parser("gadget", help="build the 11-spin three-body gadget")
    p_gad.add_argument("--alpha1", type=_finite, required=True)
    p_gad.add_argument("--alpha2", type=_finite, required=True)
    p_gad.add_argument("--delta", type=_positive, required=True)
    p_gad.add_argument("--antiferro", action="store_true",
                       help="use +Delta/4 ancilla couplings instead of the ferromagnetic default")
    p_gad.add_argument("--no-verify", action="store_true", help="skip the leading-order check")
    p_gad.add_argument("--out", help="write the configuration here (default stdout)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "gadget":
            text, report = cmd_gadget(args.alpha1, args.alpha2, args.delta,
                                      not args.antiferro, not args.no_verify)
            if args.out:
                _emit(text, args.out)
                print("\n".join(report))
            else:
                sys.stdout.write(text + "\n".join("# " + line for line in report) + "\n")
            return EXIT_OK

        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "bound":
            text, trace, code = cmd_bound(cfg, timing=not args.no_timing)
            _emit(text, cfg.out)
            if trace:
                if cfg.out:
                    Path(str(cfg.out) + ".trace").write_text(trace, encoding="utf-8", newline="\n")
                else:
                    sys.stderr.write(trace)
            return code
        text, code = cmd_compare(cfg)
        _emit(text, cfg.out)
        return code
    except (SingularResolventError, SizeGuardError) as exc:
        _warn(str(exc))
        return EXIT_GUARD
    except (ConfigurationError, PertboundError) as exc:
        _warn(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
