import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from hull_lab.cli import main
from hull_lab.config import ExperimentConfig, parse_config
from hull_lab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SQUARE = """\
kind = "hull-check"

[domain]
box = [0.0, 1.0, 0.0, 1.0]
nx = 21
ny = 21

[fields]
f = "(x, y)"
"""


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def load_report(path):
    rep = json.loads(Path(path).read_text())
    rep.pop("timing")
    return rep


def test_run_passes(tmp_path):
    cfg = write(tmp_path, SQUARE)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
    rep = load_report(tmp_path / "out" / "report.json")
    assert rep["passed"] and rep["kind"] == "hull-check"


def test_run_failing_verdict(tmp_path):
    # the identity admits no certificate, which is a failed verdict rather than an error
    cfg = CONFIGS / "identity_certificate.toml"
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "out")]) == 1
    rep = load_report(tmp_path / "out" / "report.json")
    assert not rep["passed"]


def test_bad_expression_location(tmp_path, capsys):
    cfg = write(tmp_path, SQUARE.replace('"(x, y)"', '"(x, y +)"'))
    assert main(["run", str(cfg), "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:9:" in err and "error" in err


def test_toml_syntax_location(tmp_path, capsys):
    cfg = write(tmp_path, SQUARE.replace("nx = 21", "nx = = 21"))
    assert main(["run", str(cfg), "--out-dir", str(tmp_path)]) == 2
    assert f"{cfg}:5:" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    SQUARE.replace('kind = "hull-check"', 'kind = "nope"'),
    SQUARE.replace("nx = 21", "nx = 2"),
    SQUARE.replace("[fields]", "[fields]\nstray = 1\n[other]"),
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_masked_ma_rejected():
    text = (CONFIGS / "ma_quadratic.toml").read_text().replace("ny = 101", 'ny = 101\nmask = "x^2 + y^2 < 1"')
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line is not None


def test_reports_deterministic(tmp_path):
    cfg = str(CONFIGS / "disk_certificate.toml")
    for d in ("a", "b"):
        main(["run", cfg, "--out-dir", str(tmp_path / d), "--sequential"])
    assert load_report(tmp_path / "a" / "report.json") == load_report(tmp_path / "b" / "report.json")


def test_grid_scale(tmp_path):
    cfg = write(tmp_path, SQUARE)
    assert main(["run", str(cfg), "--grid-scale", "2", "--out-dir", str(tmp_path)]) == 0
    rep = load_report(tmp_path / "report.json")
    assert rep["config"]["domain"]["nx"] == 42
    assert main(["run", str(cfg), "--grid-scale", "0"]) == 2


def test_many_configs_parallel(tmp_path):
    a = write(tmp_path, SQUARE, "one.toml")
    b = write(tmp_path, SQUARE.replace("nx = 21", "nx = 31"), "two.toml")
    assert main(["run", str(a), str(b), "--out-dir", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "one" / "report.json").exists()
    assert (tmp_path / "out" / "two" / "report.json").exists()


def test_remark1_command(tmp_path):
    assert main(["remark1", "--out-dir", str(tmp_path)]) == 0
    assert load_report(tmp_path / "report.json")["passed"]


def test_suite_zero_tolerance_fails(tmp_path):
    assert main(["suite", "--only", "1", "10", "--tol-scale", "0", "--out-dir", str(tmp_path)]) == 1
    data = json.loads((tmp_path / "suite.json").read_text())
    assert [c["number"] for c in data["criteria"]] == [1, 10]


name = st.text("abcdefgh_", min_size=1, max_size=8)


@settings(max_examples=30, deadline=None)
@given(name, st.integers(3, 300), st.integers(3, 300),
       st.floats(1e-12, 1.0), st.lists(st.floats(0.01, 100), min_size=1, max_size=5))
def test_config_round_trip(nm, nx, ny, tol, lams):
    cfg = ExperimentConfig(kind="lambda-sweep", name=nm,
                           domain={"box": [-1.0, 1.0, -1.0, 1.0], "nx": nx, "ny": ny},
                           fields={"f": "(1 - x^2 - y^2, 0)", "g": "(x, y)"},
                           tolerances={"tol_det": tol}, lam={"values": lams})
    assert parse_config(cfg.to_toml()) == cfg
