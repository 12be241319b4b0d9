import json
import textwrap

import pytest

from morrey_lab import acceptance
from morrey_lab.cli import main
from morrey_lab.config import load_config, parse_config_text
from morrey_lab.errors import ConfigError

NORM_ZERO = """
[experiment]
kind = norm
seed = 11
output = out

[domain]
lower = -1 -1
upper = 1 1
nodes = 17

[phi]
family = power
beta = -1
p = 2
n = 2

[problem]
f = 0
"""

POISSON = """
[experiment]
kind = solve
seed = 3
output = out

[domain]
lower = -1
upper = 1
nodes = 65

[problem]
equation = poisson
V = 1
"""


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


def _manifest(path):
    return json.loads((path.parent / "out" / "manifest.json").read_text())


def test_norm_of_zero(tmp_path):
    path = _write(tmp_path, NORM_ZERO)
    assert main(["run", str(path)]) == 0
    man = _manifest(path)
    assert man["summary"]["norm"] == 0.0
    assert man["seed"] == 11 and man["config"]["experiment"]["seed"] == "11"


def test_poisson_center_value(tmp_path):
    path = _write(tmp_path, POISSON)
    assert main(["run", str(path)]) == 0
    assert _manifest(path)["summary"]["center_value"] == pytest.approx(0.5, abs=1e-10)


def test_manifest_files_exist_and_parse(tmp_path):
    path = _write(tmp_path, POISSON)
    main(["run", str(path)])
    man = _manifest(path)
    out = path.parent / "out"
    for name in man["files"]:
        assert (out / name).exists()
        if name.endswith(".json"):
            json.loads((out / name).read_text())
    assert all(c["file"] in man["files"] for c in man["checks"])


def test_missing_phi_block(tmp_path, capsys):
    text = NORM_ZERO.replace("[phi]", "[unused]")
    assert main(["run", str(_write(tmp_path, text))]) == 2
    assert "[phi]" in capsys.readouterr().err


def test_malformed_line_reports_line_number(tmp_path, capsys):
    path = _write(tmp_path, "[experiment]\nkind = norm\nnot a key value line\n")
    assert main(["run", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_bad_field_reports_location(tmp_path, capsys):
    path = _write(tmp_path, POISSON.replace("nodes = 65", "nodes = many"))
    assert main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "[domain] nodes" in err and "exp.cfg:" in err


def test_unknown_name_in_expression(tmp_path):
    path = _write(tmp_path, POISSON.replace("V = 1", "V = __import__('os')"))
    assert main(["run", str(path)]) == 2


def test_missing_csv_input(tmp_path):
    path = _write(tmp_path, POISSON.replace("V = 1", "V_csv = nowhere.csv"))
    assert main(["run", str(path)]) == 2


def test_csv_input_round_trip(tmp_path):
    path = _write(tmp_path, POISSON)
    main(["run", str(path)])
    text = POISSON.replace("V = 1", "V_csv = out/solution.csv").replace("output = out", "output = out2")
    second = _write(tmp_path, text, "second.cfg")
    assert main(["run", str(second)]) == 0


def test_hypothesis_violation_exit_code(tmp_path):
    text = """
    [experiment]
    kind = inequality
    output = out
    [domain]
    lower = -1 -1
    upper = 1 1
    nodes = 17
    [phi]
    beta = -0.5
    p = 1
    n = 2
    [problem]
    f = exp(-r*r)
    [inequality]
    name = hedberg
    """
    assert main(["run", str(_write(tmp_path, text))]) == 2


def test_check_failure_exit_code_and_witness(tmp_path):
    text = """
    [experiment]
    kind = inequality
    output = out
    [domain]
    lower = -1
    upper = 1
    nodes = 513
    [problem]
    p = 2
    V = 1
    g = 1
    x0 = 0
    [inequality]
    name = caccioppoli
    radii = 0.1 0.2 0.3
    """
    path = _write(tmp_path, text)
    assert main(["run", str(path)]) == 1
    man = _manifest(path)
    assert man["pass"] is False
    assert man["checks"][0]["witness"] is not None


def test_sucp_run_writes_profiles(tmp_path):
    text = """
    [experiment]
    kind = sucp
    seed = 5
    output = out
    [domain]
    lower = -1
    upper = 1
    nodes = 129
    [problem]
    p = 3
    V = 1 + x*x
    g = 1
    """
    path = _write(tmp_path, text)
    assert main(["run", str(path)]) == 0
    out = path.parent / "out"
    assert (out / "profile_0.csv").read_text().startswith("r,mass,ratio\n")
    assert json.loads((out / "sucp.json").read_text())["seed"] == 5


def test_run_determinism(tmp_path):
    text = """
    [experiment]
    kind = inequality
    seed = 17
    output = out
    [domain]
    lower = -1 -1
    upper = 1 1
    nodes = 17
    [phi]
    beta = -2
    p = 1
    n = 2
    [sweep]
    stride = 2
    r_min = 0.25
    [inequality]
    name = hedberg
    [battery]
    size = 3
    """
    path = _write(tmp_path, text)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", str(path), "--out", str(out)]) == 0
        outs.append(out)
    assert acceptance.compare_runs(*outs) == []


def test_suite_rejects_empty_battery():
    assert main(["suite", "--battery-size", "0"]) == 2


def test_suite_mutation_fails_hedberg(capsys):
    assert main(["suite", "--only", "7", "--mutate", "riesz-self-cell"]) == 1
    assert "[FAIL] criterion  7" in capsys.readouterr().out
    from morrey_lab import operators

    assert operators.SELF_CELL_SCALE == 1.0


def test_describe(capsys, tmp_path):
    assert main(["describe"]) == 0
    assert "[domain]" in capsys.readouterr().out
    assert main(["describe", str(_write(tmp_path, NORM_ZERO))]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "norm"


def test_thread_cap(monkeypatch):
    from morrey_lab.cli import thread_cap

    monkeypatch.setenv("MORREY_LAB_THREADS", "1")
    assert thread_cap(8) == 1


def test_config_parsing_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_text("[experiment]\nkind = plot\n")
    with pytest.raises(ConfigError):
        parse_config_text("kind = norm\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")
    bad = tmp_path / "latin1.cfg"
    bad.write_bytes("[experiment]\nkind = norm\n# \xe9\n".encode("latin-1"))
    with pytest.raises(ConfigError):
        load_config(bad)
