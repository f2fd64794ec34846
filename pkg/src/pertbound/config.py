"""Structured text configuration (TOML).

Example::

    [spectrum]
    levels = [0.0, 1.0]
    degeneracies = [2, 6]     # optional
    cutoff = 0.5              # optional, defaults to E_1 / 2

    [transitions]
    lambdas = [0.055, 0.055]
    omega = 0.0
    M = [[0, 3], [1, 2]]
    neighbor_only = true

    [pauli]
    spins = 11

    [pauli.H]
    terms = ["-0.25 * Z5 Z6", "-0.25 * Z6 Z7"]

    [pauli.V]
    terms = ["0.055 * X0 X5"]

    [run]
    orders = [2, 3, 4]        # or "2..8"
    z = [0.0]
    trace = false
    eta = 1e-6
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError
from .model import ModelConfig, SubsystemSpectrum, TransitionModel
from .oracle import PauliTerm, parse_pauli_term

__all__ = ["PauliModel", "RunConfig", "parse_config", "load_config", "emit_config",
           "parse_orders", "parse_z_list"]


@dataclass(frozen=True)
class PauliModel:
    spins: int
    h_terms: tuple[PauliTerm, ...]
    v_terms: tuple[PauliTerm, ...]


@dataclass
class RunConfig:
    model: ModelConfig
    pauli: Optional[PauliModel] = None
    orders: list[int] = field(default_factory=list)
    z_values: list[float] = field(default_factory=lambda: [0.0])
    trace: bool = False
    eta: Optional[float] = None
    out: Optional[str] = None

    def __post_init__(self):
        bad = [r for r in self.orders if r < 2]
        if bad:
            raise ConfigurationError(f"orders must all be >= 2, got {bad}")


_RANGE_RE = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*$")


def parse_orders(value) -> list[int]:
    """Accept ``"2..8"``, ``"2,3,5"``, a list of ints, or an empty string/list."""
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return []
        match = _RANGE_RE.match(text)
        if match:
            lo, hi = int(match.group(1)), int(match.group(2))
            if hi < lo:
                raise ConfigurationError(f"empty order range {text!r}")
            return list(range(lo, hi + 1))
        try:
            return [int(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise ConfigurationError(f"cannot parse orders {value!r}")
    if isinstance(value, Sequence):
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
            raise ConfigurationError(f"orders must be integers, got {value!r}")
        return list(value)
    raise ConfigurationError(f"cannot parse orders {value!r}")


def parse_z_list(value) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, str):
        try:
            return [float(x) for x in value.split(",") if x.strip()]
        except ValueError:
            raise ConfigurationError(f"cannot parse z list {value!r}")
    if isinstance(value, Sequence):
        try:
            return [float(x) for x in value]
        except (TypeError, ValueError):
            raise ConfigurationError(f"cannot parse z list {value!r}")
    raise ConfigurationError(f"cannot parse z list {value!r}")


def _require(table: dict, section: str, key: str):
    if key not in table:
        raise ConfigurationError(f"[{section}] is missing required field {key!r}")
    return table[key]


def _field(section: str, key: str, fn, value):
    try:
        return fn(value)
    except ConfigurationError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"[{section}] {key}: invalid value {value!r} ({exc})") from exc


def _check_keys(table: dict, section: str, allowed: set) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigurationError(f"[{section}] has unknown field(s) {', '.join(unknown)}")


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from exc
    _check_keys(data, "top level", {"spectrum", "transitions", "pauli", "run"})

    spec_t = _require(data, "top level", "spectrum")
    _check_keys(spec_t, "spectrum", {"levels", "degeneracies", "cutoff"})
    levels = _field("spectrum", "levels", lambda v: tuple(float(x) for x in v),
                    _require(spec_t, "spectrum", "levels"))
    degs = spec_t.get("degeneracies")
    spectrum = _field("spectrum", "levels",
                      lambda v: SubsystemSpectrum(v, tuple(degs) if degs is not None else None),
                      levels)

    tr_t = _require(data, "top level", "transitions")
    _check_keys(tr_t, "transitions", {"lambdas", "omega", "M", "neighbor_only"})
    lambdas = _field("transitions", "lambdas", lambda v: tuple(float(x) for x in v),
                     _require(tr_t, "transitions", "lambdas"))
    omega = _field("transitions", "omega", float, tr_t.get("omega", 0.0))
    M = _require(tr_t, "transitions", "M")
    neighbor_only = tr_t.get("neighbor_only", True)
    if not isinstance(neighbor_only, bool):
        raise ConfigurationError("[transitions] neighbor_only: expected true or false")
    transitions = _field("transitions", "M",
                         lambda v: TransitionModel(lambdas, omega, tuple(tuple(r) for r in v),
                                                   neighbor_only), M)
    cutoff = spec_t.get("cutoff")
    if cutoff is not None:
        cutoff = _field("spectrum", "cutoff", float, cutoff)

    run_t = data.get("run", {})
    _check_keys(run_t, "run", {"orders", "z", "trace", "eta", "out"})
    orders = _field("run", "orders", parse_orders, run_t.get("orders", []))
    z_values = _field("run", "z", parse_z_list, run_t.get("z", [0.0]))
    trace = run_t.get("trace", False)
    if not isinstance(trace, bool):
        raise ConfigurationError("[run] trace: expected true or false")
    eta = run_t.get("eta")
    if eta is not None:
        eta = _field("run", "eta", float, eta)

    model = _field("spectrum", "cutoff",
                   lambda c: ModelConfig(spectrum, transitions, c, z_values[0] if z_values else 0.0),
                   cutoff)

    pauli = None
    if "pauli" in data:
        p_t = data["pauli"]
        _check_keys(p_t, "pauli", {"spins", "H", "V"})
        spins = _field("pauli", "spins", int, _require(p_t, "pauli", "spins"))
        parsed = {}
        for name in ("H", "V"):
            sub = p_t.get(name, {})
            _check_keys(sub, f"pauli.{name}", {"terms"})
            terms = []
            for k, line in enumerate(sub.get("terms", [])):
                term = _field(f"pauli.{name}", f"terms[{k}]", parse_pauli_term, line)
                if any(i >= spins for i, _ in term.string):
                    raise ConfigurationError(
                        f"[pauli.{name}] terms[{k}]: spin index out of range for {spins} spins"
                    )
                terms.append(term)
            parsed[name] = tuple(terms)
        pauli = PauliModel(spins, parsed["H"], parsed["V"])

    return RunConfig(model, pauli, orders, z_values, trace, eta, run_t.get("out"))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        return parse_config(text)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise ConfigurationError(f"cannot serialise non-finite value {x!r}")
    return repr(float(x))


def _list(values, fmt=_num) -> str:
    return "[" + ", ".join(fmt(v) for v in values) + "]"


def emit_config(model: ModelConfig, pauli: Optional[PauliModel] = None,
                orders: Sequence[int] = (), z_values: Sequence[float] = (0.0,)) -> str:
    """Serialise a model (and optional Pauli realisation) so it parses back identically."""
    sp, tm = model.spectrum, model.transitions
    lines = ["[spectrum]", f"levels = {_list(sp.levels)}"]
    if sp.degeneracies is not None:
        lines.append(f"degeneracies = {_list(sp.degeneracies, str)}")
    lines += [f"cutoff = {_num(model.cutoff)}", "",
              "[transitions]",
              f"lambdas = {_list(tm.lambdas)}",
              f"omega = {_num(tm.omega)}",
              "M = [" + ", ".join(_list(row, str) for row in tm.M) + "]",
              f"neighbor_only = {'true' if tm.neighbor_only else 'false'}", ""]
    if pauli is not None:
        lines += ["[pauli]", f"spins = {pauli.spins}", ""]
        for name, terms in (("H", pauli.h_terms), ("V", pauli.v_terms)):
            lines.append(f"[pauli.{name}]")
            lines.append("terms = [")
            lines += [f'    "{t}",' for t in terms]
            lines += ["]", ""]
    lines += ["[run]", f"orders = {_list(orders, str)}", f"z = {_list(z_values)}", ""]
    return "\n".join(lines)
