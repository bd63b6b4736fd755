import json
import subprocess
import sys

import numpy as np
import pytest

from qsatlab.cli import main
from qsatlab.hypergraph import Hypergraph, cycle_graph
from qsatlab.instance import QsatInstance


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_then_solve(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    code, out, _ = run(["gen", "--n", "8", "--k", "2", "--alpha", "0.5", "--seed", "3", "--out", str(inst)], capsys)
    assert code == 0 and "seed=3" in out
    code, out, _ = run(["solve", "--in", str(inst), "--energy"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["config"]["input"] == str(inst)
    assert d["kernel"]["D"] >= 0 and (d["kernel"]["D"] > 0) == (d["energy"]["E0"] < 1e-8)


def test_gen_is_seed_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        run(["gen", "--n", "10", "--k", "3", "--alpha", "0.4", "--r", "2", "--seed", "9", "--out", str(p)], capsys)
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["config"]["seed"] == 9


def test_gen_records_drawn_seed(capsys):
    code, out, _ = run(["gen", "--n", "4", "--alpha", "0.5"], capsys)
    assert code == 0 and isinstance(json.loads(out)["config"]["seed"], int)


def test_bounds_table(capsys):
    code, out, _ = run(["bounds", "--k", "2,3", "--r", "1"], capsys)
    assert code == 0
    for s in ("0.5000", "0.1667", "0.8100", "2.4094", "5.1909"):
        assert s in out


def test_bounds_csv(tmp_path, capsys):
    path = tmp_path / "b.csv"
    run(["bounds", "--k", "3", "--r", "1,2,3", "--csv", str(path)], capsys)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ") and len(lines) == 5
    assert lines[2].startswith("3,1,")


def test_graph_and_product_state(tmp_path, capsys):
    inst = tmp_path / "tree.json"
    run(["gen", "--n", "30", "--k", "3", "--alpha", "0.2", "--seed", "1", "--out", str(inst)], capsys)
    code, out, _ = run(["graph", "--in", str(inst)], capsys)
    assert code == 0 and json.loads(out)["n"] == 30
    code, out, _ = run(["product-state", "--in", str(inst)], capsys)
    d = json.loads(out)
    assert code == 0 and d["satisfies"] and d["residual"] < 1e-10


def test_scan_csv_and_thread_determinism(tmp_path, capsys):
    outs = []
    for t in ("1", "4"):
        p = tmp_path / f"scan{t}.csv"
        code, _, _ = run(
            ["scan", "--k", "2", "--n", "8", "--alpha", "0.2:0.75:0.05", "--trials", "5", "--seed", "1", "--threads", t, "--out", str(p)],
            capsys,
        )
        assert code == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0].startswith("# config: ") and len(lines) == 2 + 12


def test_census_and_geometrize(capsys):
    code, out, _ = run(["census", "--n", "30", "--alpha", "0.8", "--L", "4", "--d", "2", "--trials", "50", "--seed", "0"], capsys)
    assert code == 0 and "z" in json.loads(out)
    code, out, _ = run(["geometrize", "--n", "8", "--alpha", "0.5", "--trials", "10", "--seed", "2", "--classical"], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and rep["modal_frequency"] == 10 and rep["classical_D"] >= rep["modal_D"]


def test_energy_figure_eight(capsys):
    code, out, _ = run(["energy", "--figure-eight", "4,6", "--trials", "4", "--seed", "0"], capsys)
    assert code == 0 and all(m > 0 for m in json.loads(out)["mean_E0"])


def test_usage_and_validation_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["scan", "--n", "5"])
    assert exc.value.code == 1
    assert run(["solve", "--in", str(tmp_path / "missing.json")], capsys)[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["solve", "--in", str(bad)], capsys)
    assert code == 1 and "line 1" in err
    assert run(["gen", "--n", "4", "--alpha", "5", "--seed", "0"], capsys)[0] == 1


def test_degenerate_loop_exit_code(tmp_path, capsys):
    # singlet projectors make every loop transfer proportional to the identity
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    inst = QsatInstance(cycle_graph(3), 1, np.tile(singlet, (3, 1, 1)))
    path = tmp_path / "singlet.json"
    path.write_text(inst.to_json())
    code, _, err = run(["product-state", "--in", str(path)], capsys)
    assert code == 2 and "degenera" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qsatlab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "qsatlab" in res.stdout
