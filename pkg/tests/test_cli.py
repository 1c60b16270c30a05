import json
import subprocess
import sys
from pathlib import Path

import pytest

from hypimcf.cli import ScenarioError, main, parse_scenario

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "demos" / "scenarios"

INEQ = """\
[scenario]
name = ineq
n = 3
pipeline = inequalities
resolution = 129
t_max = 1.0

[surface]
kind = perturbed
r0 = 1.0
amplitude = 0.1
k = 2
"""

SMALL_FLOW = """\
[scenario]
name = small-flow
n = 3
pipeline = all
resolution = 65
t_max = 0.2

[surface]
kind = sphere
r0 = 1.0

[flow]
dt = 0.01

[weak]
epsilon_schedule = 0.2, 0.1
mesh_m = 32
mesh_j = 8
levels = 0.1
"""


def write(tmp_path, text, name="s.scenario"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", write(tmp_path, INEQ)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["n"] == 3 and data["surface"]["kind"] == "perturbed"


def test_malformed_demo_is_usage_error(capsys):
    assert main(["validate", str(SCEN / "malformed.scenario")]) == 2
    err = capsys.readouterr().err
    assert "malformed.scenario:" in err and "3 <= n <= 7" in err


@pytest.mark.parametrize(
    "edit, needle",
    [
        (("n = 3", "n = 2"), "3 <= n <= 7"),
        (("resolution = 129", "resolution = 32"), "resolution must be >= 64"),
        (("pipeline = inequalities", "pipeline = dance"), "pipeline must be one of"),
        (("k = 2", "k = 2\ncolour = red"), "unknown key 'colour'"),
        (("r0 = 1.0", "r0 = one"), "r0"),
        (("t_max = 1.0\n", "t_max = 1.0\n[extras]\n"), "unknown section"),
    ],
)
def test_usage_errors_carry_line_numbers(tmp_path, edit, needle):
    text = INEQ.replace(*edit)
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text, "x.scenario")
    msg = str(exc.value)
    assert needle in msg and msg.startswith("x.scenario:")


def test_missing_required_key():
    with pytest.raises(ScenarioError, match="missing required key 'name'"):
        parse_scenario(INEQ.replace("name = ineq\n", ""), "x.scenario")


def test_even_resolution_allowed():
    assert parse_scenario(INEQ.replace("129", "128")).resolution == 128


def test_missing_file(capsys):
    assert main(["run", "/nonexistent.scenario"]) == 2


def test_run_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, INEQ), "--output", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["schema"] == 1
    assert summary["checks"]["hk_deficit"]["passed"]
    assert (out / "trace.csv").read_text().startswith("t,area,")
    assert (out / "certificates.txt").is_file()
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert main(["report", str(tmp_path / "nowhere")]) == 2


def test_all_pipeline_and_determinism(tmp_path):
    path = write(tmp_path, SMALL_FLOW)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", path, "--output", str(a), "--quiet"]) == 0
    assert main(["run", path, "--output", str(b), "--quiet"]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert Path("summary.json") in files and Path("trace.csv") in files
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_random_surface_uses_seed(tmp_path):
    text = INEQ.replace("kind = perturbed\nr0 = 1.0\namplitude = 0.1\nk = 2",
                        "kind = random\nr0 = 1.0\namplitude = 0.05\nmodes = 4")
    path = write(tmp_path, text)
    outs = []
    for seed, name in ((1, "a"), (1, "b"), (2, "c")):
        main(["run", path, "--seed", str(seed), "--output", str(tmp_path / name), "--quiet"])
        outs.append((tmp_path / name / "trace.csv").read_bytes())
    assert outs[0] == outs[1] and outs[0] != outs[2]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hypimcf", "validate", "--quiet",
                           str(SCEN / "sphere-exact.scenario")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
