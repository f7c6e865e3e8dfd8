import json

import pytest

from ppdgd import dump_problem
from ppdgd.casestudy import build_case
from ppdgd.cli import main


@pytest.fixture(scope="module")
def case_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("case") / "case.json"
    dump_problem(build_case(), path)
    return str(path)


@pytest.fixture
def toy_file(tmp_path, one_dim_problem):
    path = tmp_path / "toy.json"
    dump_problem(one_dim_problem, path)
    return str(path)


def parse_constants(out):
    vals = {}
    for line in out.splitlines():
        if "=" in line and not line.startswith("check"):
            key, _, raw = line.partition("=")
            vals[key.strip()] = float(raw)
    return vals


def test_validate_case_prints_rate_constants(case_file, capsys):
    assert main(["validate", case_file]) == 0
    out = capsys.readouterr().out
    vals = parse_constants(out)
    assert vals["gamma"] == pytest.approx(0.00339, abs=1e-5)
    assert vals["kappa1"] == pytest.approx(0.01357, abs=1e-5)
    assert vals["beta"] == 1.0
    assert vals["alpha_m"] == 8.0
    assert out.count(": pass") == 5


def test_validate_identity_toy(toy_file, capsys):
    assert main(["validate", toy_file]) == 0
    vals = parse_constants(capsys.readouterr().out)
    assert vals["gamma"] == pytest.approx(2.0)


def test_validate_rank_deficient_exits_3(tmp_path, capsys):
    doc = {
        "n": 2, "m": 1, "p": 2,
        "H": {"diag": [1.0, 1.0]}, "c": [0.0, 0.0],
        "A": [[1.0, 0.0], [2.0, 0.0]],
        "B": [[1.0], [0.0]],
        "C": [0.0, 0.0],
        "h": [{"breakpoints": [], "pieces": [{"p": 0.5, "q": 0.0, "r": 0.0}]}],
        "X": {"kind": "free"},
        "Omega": {"kind": "box", "lo": [-1.0], "hi": [1.0]},
    }
    path = tmp_path / "rankdef.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", str(path)]) == 3
    assert "RankDeficient" in capsys.readouterr().err


def test_validate_malformed_json_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{oops")
    assert main(["validate", str(path)]) == 2
    assert "parse error" in capsys.readouterr().err


def test_validate_infeasible_boxes_exit_3(tmp_path, capsys):
    # x + y over [0,1]x[0,1] can never reach C = 5
    doc = {
        "n": 1, "m": 1, "p": 1,
        "H": {"diag": [1.0]}, "c": [0.0],
        "A": [[1.0]], "B": [[1.0]], "C": [5.0],
        "h": [{"breakpoints": [], "pieces": [{"p": 0.5, "q": 0.0, "r": 0.0}]}],
        "X": {"kind": "box", "lo": [0.0], "hi": [1.0]},
        "Omega": {"kind": "box", "lo": [0.0], "hi": [1.0]},
    }
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", str(path)]) == 3
    assert "check feasible: fail" in capsys.readouterr().out


def test_run_toy_converges(toy_file, tmp_path, capsys):
    out = tmp_path / "runout"
    assert main(["run", toy_file, "--out", str(out), "--t-end", "20"]) == 0
    text = capsys.readouterr().out
    assert "terminated_by = stop_tol" in text
    assert (out / "trajectory.csv").exists()
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,y_1,lambda_1,drift_norm"


def test_run_initial_point_outside_omega_exits_4(tmp_path, capsys):
    # Omega = [1, 2] does not contain the default start y(0) = 0
    doc = {
        "n": 1, "m": 1, "p": 1,
        "H": {"diag": [1.0]}, "c": [0.0],
        "A": [[1.0]], "B": [[1.0]], "C": [1.5],
        "h": [{"breakpoints": [], "pieces": [{"p": 0.5, "q": 0.0, "r": 0.0}]}],
        "X": {"kind": "free"},
        "Omega": {"kind": "box", "lo": [1.0], "hi": [2.0]},
    }
    path = tmp_path / "shifted.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path), "--out", str(tmp_path)]) == 4
    assert "InitialPointOutsideOmega" in capsys.readouterr().err


def test_run_seed_draws_start_inside_omega(tmp_path, capsys):
    # same shifted-box problem; with a seed the start is drawn inside Omega
    doc = {
        "n": 1, "m": 1, "p": 1,
        "H": {"diag": [1.0]}, "c": [0.0],
        "A": [[1.0]], "B": [[1.0]], "C": [1.5],
        "h": [{"breakpoints": [], "pieces": [{"p": 0.5, "q": 0.0, "r": 0.0}]}],
        "X": {"kind": "free"},
        "Omega": {"kind": "box", "lo": [1.0], "hi": [2.0]},
    }
    path = tmp_path / "shifted.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path), "--out", str(tmp_path), "--seed", "3"]) == 0


def test_run_deterministic_output(toy_file, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["run", toy_file, "--out", str(out), "--seed", "11",
                     "--t-end", "5"]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()


def test_certify_case_exits_0(case_file, tmp_path, capsys):
    out = tmp_path / "cert"
    code = main(["certify", case_file, "--out", str(out), "--t-end", "15",
                 "--record-every", "50"])
    assert code == 0
    text = capsys.readouterr().out
    assert "envelope_ok = True" in text
    assert "invariance_ok = True" in text
    report = json.loads((out / "report.json").read_text())
    assert report["envelope_ok"] is True
    assert (out / "envelope.csv").exists()


def test_certify_rk4_method_flag(toy_file, tmp_path):
    assert main(["certify", toy_file, "--out", str(tmp_path), "--method", "rk4",
                 "--t-end", "10"]) == 0


def test_casestudy_sweep_files(tmp_path, capsys):
    out = tmp_path / "cs"
    code = main(["casestudy", "--tau", "1", "--tau", "2", "--out", str(out),
                 "--t-end", "12", "--record-every", "200"])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert {"problem.json", "trajectory_tau1.csv", "envelope_tau1.csv",
            "report_tau1.json", "trajectory_tau2.csv", "envelope_tau2.csv",
            "report_tau2.json"} <= names
    text = capsys.readouterr().out
    assert "tau = 1" in text and "tau = 2" in text
    # integration flags reach the sweep: 12 / (1e-3 * 200) strided samples + final
    rows = (out / "trajectory_tau1.csv").read_text().splitlines()
    assert len(rows) - 1 == 61
    assert rows[-1].startswith("12,") or rows[-1].startswith("12.0")
