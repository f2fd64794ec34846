import csv
import io
import subprocess
import sys

import pytest

from pertbound import cli
from pertbound.config import emit_config, load_config, parse_config, parse_orders, parse_z_list
from pertbound.errors import ConfigurationError

TWO_LEVEL = """
[spectrum]
levels = [0.0, 1.0]

[transitions]
lambdas = [0.05, 0.05]
omega = 0.0
M = [[0, 1], [1, 0]]

[pauli]
spins = 2

[pauli.H]
terms = ["-0.5 * Z0", "-0.5 * Z1"]

[pauli.V]
terms = ["0.05 * X0", "0.05 * X1"]

[run]
orders = "2..5"
z = [0.0, -0.3]
"""


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def write(tmp_path, text, name="model.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_orders_and_z():
    assert parse_orders("2..5") == [2, 3, 4, 5]
    assert parse_orders("2, 4") == [2, 4]
    assert parse_orders("") == []
    assert parse_orders([3, 2]) == [3, 2]
    with pytest.raises(ConfigurationError):
        parse_orders("5..2")
    with pytest.raises(ConfigurationError):
        parse_orders("two")
    assert parse_z_list("0,-0.25") == [0.0, -0.25]
    assert parse_z_list(0.5) == [0.5]


def test_parse_config_fields():
    cfg = parse_config(TWO_LEVEL)
    assert cfg.orders == [2, 3, 4, 5]
    assert cfg.z_values == [0.0, -0.3]
    assert cfg.model.cutoff == 0.5
    assert cfg.pauli.spins == 2 and len(cfg.pauli.v_terms) == 2


@pytest.mark.parametrize("broken, fragment", [
    (TWO_LEVEL.replace("omega = 0.0", "omega = 0.0\nextra = 1"), "[transitions] has unknown field(s) extra"),
    (TWO_LEVEL.replace("levels = [0.0, 1.0]", ""), "missing required field 'levels'"),
    (TWO_LEVEL.replace("M = [[0, 1], [1, 0]]", "M = [[0, 1], [1]]"), "[transitions] M"),
    (TWO_LEVEL.replace('"2..5"', '"1..5"'), "orders must all be >= 2"),
    (TWO_LEVEL.replace('"0.05 * X1"', '"0.05 * X9"'), "out of range"),
    (TWO_LEVEL.replace("[run]", "[run"), "syntax error"),
])
def test_parse_config_diagnostics(broken, fragment):
    with pytest.raises(ConfigurationError) as info:
        parse_config(broken)
    assert fragment in str(info.value)


def test_gadget_config_round_trip(gadget):
    from pertbound.config import PauliModel
    pauli = PauliModel(11, tuple(gadget.h_terms), tuple(gadget.v_terms))
    text = emit_config(gadget.config, pauli, orders=[2, 3], z_values=[0.0, 0.25])
    cfg = parse_config(text)
    assert cfg.model == gadget.config
    assert cfg.pauli == pauli
    assert cfg.orders == [2, 3] and cfg.z_values == [0.0, 0.25]


def test_cmd_bound_rows_and_order():
    cfg = parse_config(TWO_LEVEL)
    text, trace, code = cli.cmd_bound(cfg, timing=False, workers=1)
    assert code == 0 and trace == ""
    assert text.splitlines()[0] == ",".join(cli.BOUND_HEADER)
    out = rows(text)
    assert [(int(r["order"]), float(r["z"])) for r in out] == [
        (r, z) for r in (2, 3, 4, 5) for z in (0.0, -0.3)]
    assert all(r["wall_ms"] == "" for r in out)


def test_cmd_bound_empty_orders():
    cfg = parse_config(TWO_LEVEL.replace('"2..5"', "[]"))
    text, _, code = cli.cmd_bound(cfg)
    assert text == ",".join(cli.BOUND_HEADER) + "\n" and code == 0


def test_cmd_bound_gadget_decreasing(gadget):
    from pertbound.config import RunConfig
    cfg = RunConfig(gadget.config, orders=list(range(2, 9)), z_values=[0.0], eta=1e-3)
    out = rows(cli.cmd_bound(cfg, workers=1)[0])
    values = [float(r["ca_bound"]) for r in out]
    assert len(out) == 7
    assert all(b < a for a, b in zip(values, values[1:]))
    # tails appear from the first order whose bound drops below eta
    first = next(i for i, v in enumerate(values) if v < 1e-3)
    assert [r["tail_bound"] != "" for r in out] == [i >= first for i in range(7)]


def test_cmd_bound_singular_z_skips_row(capsys):
    cfg = parse_config(TWO_LEVEL.replace("z = [0.0, -0.3]", "z = [1.0, 0.0]"))
    text, _, code = cli.cmd_bound(cfg, timing=False)
    assert code == cli.EXIT_GUARD
    assert {float(r["z"]) for r in rows(text)} == {0.0}
    assert "skipping z=1.0" in capsys.readouterr().err


def test_cmd_compare_sound():
    text, code = cli.cmd_compare(parse_config(TWO_LEVEL), workers=1)
    assert code == 0
    assert text.splitlines()[0] == ",".join(cli.COMPARE_HEADER)
    for r in rows(text):
        assert float(r["ca_bound"]) >= float(r["exact_inf"]) * (1 - cli.SOUNDNESS_RTOL)
        if float(r["exact_inf"]) > 0:
            assert float(r["ratio_ca_exact"]) >= 1 - 1e-12
        else:
            assert r["ratio_ca_exact"] == ""


def test_cmd_compare_zero_perturbation():
    text, code = cli.cmd_compare(parse_config(TWO_LEVEL.replace('"0.05 * X0", "0.05 * X1"', "")
                                              .replace("lambdas = [0.05, 0.05]", "lambdas = [0.0, 0.0]")))
    assert code == 0
    for r in rows(text):
        assert float(r["ca_bound"]) == float(r["exact_inf"]) == float(r["exact_2"]) == float(r["geometric"]) == 0
        assert r["ratio_ca_exact"] == ""


def test_cmd_compare_flags_unsound_model(capsys):
    # lambdas understate the real couplings, so the "bound" is too small
    cfg = parse_config(TWO_LEVEL.replace("lambdas = [0.05, 0.05]", "lambdas = [0.01, 0.01]"))
    _, code = cli.cmd_compare(cfg)
    assert code == cli.EXIT_UNSOUND
    assert "SOUNDNESS VIOLATION" in capsys.readouterr().err


def test_cmd_compare_requires_pauli():
    cfg = parse_config(TWO_LEVEL.split("[pauli]")[0] + "[run]\norders = [2]\n")
    with pytest.raises(ConfigurationError):
        cli.cmd_compare(cfg)


def test_main_bound_with_trace(tmp_path):
    path = write(tmp_path, TWO_LEVEL)
    out = tmp_path / "b.csv"
    code = cli.main(["bound", "--config", path, "--orders", "4", "--z", "0", "--trace",
                     "--out", str(out), "--no-timing"])
    assert code == 0
    assert len(rows(out.read_text())) == 1
    trace = (tmp_path / "b.csv.trace").read_text().splitlines()
    assert trace[0].startswith("# order=4 z=0.0")
    assert "2 * M_01^2 M_10^2 * m_{(2,2)} / |(z-E_1)^2 (z-2E_1)|" in trace


def test_main_exit_codes(tmp_path, capsys):
    path = write(tmp_path, TWO_LEVEL)
    assert cli.main(["compare", "--config", path]) == 0
    assert cli.main(["bound", "--config", path, "--z", "1.0"]) == cli.EXIT_GUARD
    assert cli.main(["bound", "--config", str(tmp_path / "missing.toml")]) == cli.EXIT_USAGE
    bad = write(tmp_path, TWO_LEVEL.replace("omega", "omga"), "bad.toml")
    assert cli.main(["bound", "--config", bad]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["gadget", "--alpha1", "1e-3", "--alpha2", "1e-3", "--delta", "0"])
    assert info.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["bound"])
    assert info.value.code == cli.EXIT_USAGE
    capsys.readouterr()


def test_main_size_guard(tmp_path):
    big = TWO_LEVEL.replace("spins = 2", "spins = 20")
    assert cli.main(["compare", "--config", write(tmp_path, big)]) == cli.EXIT_GUARD


def test_gadget_command_unit_mu(capsys):
    with pytest.warns(RuntimeWarning):
        code = cli.main(["gadget", "--alpha1", "6", "--alpha2", "6", "--delta", "1", "--no-verify"])
    assert code == 0
    out = capsys.readouterr().out
    assert "# mu1 = 1.0" in out and "# mu2 = 1.0" in out


def test_gadget_command_writes_parsable_config(tmp_path, capsys, gadget):
    out = tmp_path / "gadget.toml"
    assert cli.main(["gadget", "--alpha1", "1e-3", "--alpha2", "1e-3", "--delta", "1",
                     "--out", str(out)]) == 0
    report = capsys.readouterr().out
    assert "PASS" in report and "M = [[0, 3], [1, 2]]" in report
    cfg = load_config(out)
    assert cfg.model == gadget.config
    assert cfg.pauli.spins == 11


def test_console_script_runs(tmp_path):
    path = write(tmp_path, TWO_LEVEL)
    proc = subprocess.run([sys.executable, "-m", "pertbound.cli", "bound", "--config", path,
                           "--no-timing"], capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[0] == ",".join(cli.BOUND_HEADER)
