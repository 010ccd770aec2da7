import json
import subprocess
import sys

import pytest

from pothull.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


TWO_BY_TWO = {"rho": {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]},
              "mu": {"points": [[2.0], [3.0]], "weights": [0.5, 0.5]},
              "cost": {"kind": "quadratic"}}
LATTICE = {"rho": {"points": [[0.0], [0.5], [1.0]], "weights": [1 / 3, 1 / 3, 1 / 3]},
           "mu": {"points": [[0.0], [1.0]], "weights": [2 / 3, 1 / 3]},
           "cost": {"kind": "bilinear"}}
CONNECTED = {"rho": {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]},
             "mu": {"points": [[0.0]], "weights": [1.0]},
             "cost": {"kind": "quadratic"}}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_two_by_two(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", write(tmp_path / "i.json", TWO_BY_TWO))
    data = json.loads(out)
    assert code == 0
    assert data["value"] == pytest.approx(4.0, abs=1e-12)
    assert data["report"]["verdict"] == "optimal"
    assert sorted(map(tuple, data["usable_edges"])) == [(0, 0), (1, 1)]


def test_solve_single_atom(tmp_path, capsys):
    one = {"rho": {"points": [[0.5]], "weights": [1.0]}, "mu": {"points": [[0.5]], "weights": [1.0]},
           "cost": {"kind": "quadratic"}}
    code, out, _ = run(capsys, "solve", write(tmp_path / "i.json", one))
    assert code == 0 and json.loads(out)["plan"] == [[0, 0, 1.0]]


def test_schema_errors_exit_two(tmp_path, capsys):
    bad = json.loads(json.dumps(TWO_BY_TWO))
    bad["rho"]["weights"] = [0.5, 0.4]
    code, _, err = run(capsys, "solve", write(tmp_path / "i.json", bad))
    assert code == 2 and "rho.weights" in err
    code, _, _ = run(capsys, "solve", str(tmp_path / "missing.json"))
    assert code == 2
    with pytest.raises(SystemExit) as info:
        main(["solve", write(tmp_path / "j.json", TWO_BY_TWO), "--tol", "-1"])
    assert info.value.code == 2
    code, _, _ = run(capsys, "solve", write(tmp_path / "k.json", TWO_BY_TWO), "--format", "csv")
    assert code == 2


def test_certificate_values(tmp_path, capsys):
    code, out, _ = run(capsys, "certificate", write(tmp_path / "l.json", LATTICE))
    data = json.loads(out)
    assert code == 0
    assert data["diam_linf_exact"] == pytest.approx(0.25, abs=1e-15)
    assert data["connected"] is False
    code, out, _ = run(capsys, "certificate", write(tmp_path / "c.json", CONNECTED))
    data = json.loads(out)
    assert data["diam_linf_exact"] == 0.0 and data["connected"] is True


def test_certificate_anchor_invariance_and_plan_reuse(tmp_path, capsys):
    inst = write(tmp_path / "l.json", LATTICE)
    exact = set()
    for anchor in range(3):
        _, out, _ = run(capsys, "certificate", inst, "--anchor", str(anchor))
        exact.add(json.loads(out)["diam_linf_exact"])
    assert len(exact) == 1
    plan = tmp_path / "plan.json"
    assert run(capsys, "solve", inst, "--out", str(plan))[0] == 0
    _, fresh, _ = run(capsys, "certificate", inst)
    _, reused, _ = run(capsys, "certificate", inst, "--plan", str(plan))
    a, b = json.loads(fresh), json.loads(reused)
    for x, y in zip(sum(a["lambda"], []), sum(b["lambda"], [])):
        assert abs(x - y) <= 1e-12


def test_member_exit_codes(tmp_path, capsys):
    inst = write(tmp_path / "l.json", LATTICE)
    code, out, _ = run(capsys, "member", inst, "[0, 0, 0.5]", "--brenier")
    assert code == 0 and json.loads(out)["member"] is True
    code, out, _ = run(capsys, "member", inst, "[0, 0, 1]", "--brenier")
    data = json.loads(out)
    assert code == 1 and data["worst_violation"] == pytest.approx(0.5)
    assert run(capsys, "member", inst, "[0, 1]")[0] == 2


def test_experiment_command(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", {"scenario": "sharpness_grid", "sizes": [2, 4], "cost": "bilinear"})
    code, out, _ = run(capsys, "experiment", cfg, "--format", "csv")
    assert code == 0 and len(out.strip().splitlines()) == 3
    mc = write(tmp_path / "m.json", {"scenario": "empirical_mc", "sizes": [1], "trials": 3})
    code, out, _ = run(capsys, "experiment", mc, "--format", "csv")
    lines = out.strip().splitlines()
    col = lines[0].split(",").index("exact")
    assert code == 0 and all(float(r.split(",")[col]) == 0.0 for r in lines[1:])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "experiment", mc, "--out", str(a), "--seed", "8")
    run(capsys, "experiment", mc, "--out", str(b), "--seed", "8")
    assert a.read_bytes() == b.read_bytes()


def test_hausdorff_command(tmp_path, capsys):
    pts = write(tmp_path / "p.json", [[0.0, 0.0], [1.0, 1.0]])
    code, out, _ = run(capsys, "hausdorff", pts, "--box", "0,0", "1,1")
    assert code == 0 and json.loads(out)["hausdorff"] == pytest.approx(1.0)
    other = write(tmp_path / "o.json", [[0.0, 0.0]])
    _, out, _ = run(capsys, "hausdorff", pts, "--other", other)
    assert json.loads(out)["hausdorff"] == pytest.approx(2**0.5)


def test_module_entry_point(tmp_path):
    inst = write(tmp_path / "i.json", TWO_BY_TWO)
    proc = subprocess.run([sys.executable, "-m", "pothull", "solve", inst], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(4.0)
