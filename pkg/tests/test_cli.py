import subprocess
import sys

import numpy as np
import pytest

from xxzdm.cli import config_text, parse_config, run
from xxzdm.sweep import DEFAULTS, ConfigError


def data_lines(text):
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def embedded_config(text):
    lines = text.splitlines()
    start = next(i for i, ln in enumerate(lines) if ln.startswith("# config")) + 1
    out = []
    for ln in lines[start:]:
        if not ln.startswith("#"):
            break
        out.append(ln[2:])
    return "\n".join(out)


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg.values == DEFAULTS
    assert cfg.axes == [] and cfg.method == "closed_form"


def test_parse_sections_and_comments():
    text = """
    # comment
    [model]
    J = 2   # trailing
    kT = 0.5
    [sweep]
    axis = kT 0.05 5 31 log
    axis = t values 0 1 2
    observables = c_n, eof
    method = both
    workers = 3
    [output]
    tol = 1e-10
    """
    cfg = parse_config(text)
    assert cfg.values["J"] == 2.0 and cfg.values["kT"] == 0.5
    assert [a.name for a in cfg.axes] == ["kT", "t"]
    assert cfg.observables == ("c_n", "eof")
    assert (cfg.method, cfg.workers, cfg.tol) == ("both", 3, 1e-10)


def test_override_precedence():
    cfg = parse_config("[model]\nJ = 3\n", ["J=12"])
    assert cfg.values["J"] == 12.0


@pytest.mark.parametrize(
    "text, overrides, match",
    [
        ("", ["gamma=-1"], "invariant gamma > 0 violated"),
        ("", ["kT=0"], "kT > 0"),
        ("", ["tol=1"], "tol"),
        ("[model]\nJ = 1\nbeta = 2\n", [], "line 3: unknown key 'beta'; valid keys: t, kT, J"),
        ("[model]\nJ = abc\n", [], "line 2"),
        ("[weird]\n", [], "unknown section"),
        ("[model]\naxis = J 0 1 3\n", [], "belongs in \\[sweep\\]"),
        ("[sweep]\naxis = J 0 1\n", [], "axis must read"),
        ("[sweep]\nmethod = euler\n", [], "method"),
        ("[sweep]\nobservables = c_n, entropy\n", [], "entropy"),
        ("J 1\n", [], "expected 'key = value'"),
        ("", ["J"], "expected key=value"),
    ],
)
def test_config_errors(text, overrides, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text, overrides)


def test_config_text_round_trip():
    cfg = parse_config("[sweep]\naxis = J 0.5 10 20\naxis = t values 0 5\nmethod = ode\n", ["Dz=0.3", "tol=1e-8"])
    again = parse_config(config_text(cfg.values, cfg.sweep_config()))
    assert again.values == cfg.values
    assert again.sweep_config() == cfg.sweep_config()


def test_cli_bad_parameter_exit_1(capsys):
    assert run(["observe", "gamma=-1"]) == 1
    assert "invariant gamma > 0 violated" in capsys.readouterr().err


def test_cli_unknown_key_exit_1(capsys):
    assert run(["observe", "--set", "foo=1"]) == 1
    assert "valid keys" in capsys.readouterr().err


def test_cli_missing_config_exit_1(tmp_path, capsys):
    assert run(["observe", "-c", str(tmp_path / "nope.cfg")]) == 1


def test_cli_observe_infinite_temperature(capsys):
    assert run(["observe", "--kT", "1e9"]) == 0
    out = capsys.readouterr().out
    header, row = data_lines(out)
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["concurrence"]) == 0.0 and float(rec["eof"]) == 0.0
    assert rec["status"] == "ok"


def test_cli_figure_fig2_columns(tmp_path):
    path = tmp_path / "fig2.csv"
    assert run(["figure", "fig2", "-o", str(path)]) == 0
    lines = data_lines(path.read_text())
    assert lines[0].startswith("kT,J,c_n,clipped")
    assert len(lines) == 1 + 31 * 20


def test_cli_outputs_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "axis=kT 0.1 2 4 log", "axis=t 0 10 3", "method=both"]
    assert run(args + ["-o", str(a)]) == 0
    assert run(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_header_reproduces_dataset(tmp_path):
    first = tmp_path / "first.csv"
    assert run(["figure", "fig3a", "axis=t values 0 5", "--Jz", "0.25", "-o", str(first)]) == 0
    cfg_path = tmp_path / "replay.cfg"
    cfg_path.write_text(embedded_config(first.read_text()))
    second = tmp_path / "second.csv"
    assert run(["sweep", "-c", str(cfg_path), "-o", str(second)]) == 0
    assert data_lines(first.read_text()) == data_lines(second.read_text())


def test_cli_evolve(capsys):
    assert run(["evolve", "t=5", "points=6", "--method", "ode"]) == 0
    lines = data_lines(capsys.readouterr().out)
    cols = lines[0].split(",")
    assert len(cols) == 1 + 32 + 3 and cols[1] == "rho11_re"
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    assert rows.shape == (6, 36)
    np.testing.assert_allclose(rows[:, 0], np.linspace(0, 5, 6))
    assert np.all(rows[:, -3] <= 1e-9) and np.all(rows[:, -1] >= -1e-9)


def test_cli_evolve_methods_agree(capsys):
    run(["evolve", "t=10", "points=3", "method=ode"])
    a = data_lines(capsys.readouterr().out)[1:]
    run(["evolve", "t=10", "points=3"])
    b = data_lines(capsys.readouterr().out)[1:]
    A = np.array([[float(x) for x in ln.split(",")[1:33]] for ln in a])
    B = np.array([[float(x) for x in ln.split(",")[1:33]] for ln in b])
    assert np.max(np.abs(A - B)) <= 1e-6


def test_cli_partial_failure_exit_3(capsys):
    assert run(["sweep", "axis=gamma values 1 -1"]) == 3
    captured = capsys.readouterr()
    assert "1 grid point(s) failed" in captured.err
    assert "gamma > 0" in data_lines(captured.out)[-1]


def test_cli_sweep_without_axis_exit_1(capsys):
    assert run(["sweep"]) == 1


def test_cli_figure_unknown_axis_exit_1(capsys):
    assert run(["figure", "fig2", "axis=Dz 0 1 3"]) == 1


def test_cli_numeric_failure_exit_2(capsys, monkeypatch):
    from xxzdm import dynamics

    monkeypatch.setattr(dynamics, "MAX_STEPS", 3)
    assert run(["observe", "t=100", "method=ode"]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_selfcheck_subprocess():
    proc = subprocess.run([sys.executable, "-m", "xxzdm.cli", "selfcheck"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "FAIL" not in proc.stdout


def test_cli_argparse_error_exit_1(capsys):
    assert run(["observe", "--bogus"]) == 1
    assert run(["figure", "fig99"]) == 1
