import csv
import io
import math

import numpy as np
import pytest

from qsatlab.ensemble import (
    CSV_COLUMNS,
    ScanRow,
    bootstrap_crossing,
    census,
    crossing_point,
    crossing_slope,
    energy_density_envelope,
    figure_eight_energy_scaling,
    fit_transition,
    geometrization_trial,
    parse_grid,
    promise_gap_stats,
    run_indexed,
    scan,
    scan_csv,
)
from qsatlab.hypergraph import chain_hypergraph, figure_eight_graph, random_tree, sample_hypergraph
from qsatlab.rng import make_rng

from oracles import dense_kernel_dim
from qsatlab.instance import build_instance


def test_parse_grid():
    assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert parse_grid("0.5,1,2") == [0.5, 1.0, 2.0]
    assert len(parse_grid("0.2:1.5:0.05")) == 27
    with pytest.raises(ValueError):
        parse_grid("0:1:0")


def test_run_indexed_preserves_order():
    assert run_indexed(lambda x: x * x, list(range(50)), threads=4) == [x * x for x in range(50)]


def test_scan_rows_and_csv():
    rows = scan(2, 1, [0.2, 0.6], 8, 10, seed=3)
    assert [r.alpha for r in rows] == [0.2, 0.6]
    assert all(r.trials == 10 and len(r.sat_flags) == 10 for r in rows)
    assert all(r.graph_agreement == 1.0 for r in rows)
    text = scan_csv(rows, {"seed": 3})
    lines = text.splitlines()
    assert lines[0].startswith("# config: ")
    table = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    assert table[0] == CSV_COLUMNS and len(table) == 3


def test_scan_quantum_skipped_beyond_cap():
    rows = scan(3, 1, [0.5], 30, 3, seed=0, quantum_cap=16)
    assert rows[0].p_sat is None and rows[0].mean_D is None and rows[0].p_empty_core is not None


def test_scan_thread_independent():
    a = scan_csv(scan(3, 1, [0.4, 0.8], 8, 8, seed=5, threads=1))
    b = scan_csv(scan(3, 1, [0.4, 0.8], 8, 8, seed=5, threads=4))
    assert a == b


def test_scan_against_dense_oracle():
    # the per-trial streams are reproducible: rebuild trial instances and compare
    rows = scan(2, 1, [0.7], 7, 6, seed=11, energy=False)
    from qsatlab.ensemble import FRAMES, GRAPH
    from qsatlab.rng import derive_seed

    flags = []
    for t in range(6):
        g = sample_hypergraph(7, 2, 0.7, "poisson", derive_seed(11, 0, t, GRAPH))
        inst = build_instance(g, 1, derive_seed(11, 0, t, FRAMES))
        flags.append(dense_kernel_dim(inst)[0] > 0)
    assert rows[0].sat_flags == flags


def test_crossing_helpers():
    assert crossing_point([0, 1, 2], [1.0, 0.6, 0.2]) == pytest.approx(1.25)
    assert crossing_slope([0, 1, 2], [1.0, 0.6, 0.2]) == pytest.approx(0.4)
    assert crossing_point([0, 1], [1.0, 0.9]) is None


def _synthetic_rows(c, w, alphas, trials, seed):
    rng = make_rng(seed)
    rows = []
    for a in alphas:
        p = 1 / (1 + math.exp((a - c) / w))
        flags = list(rng.random(trials) < p)
        rows.append(ScanRow(2, 1, a, 10, trials, seed, 0.0, None, 0.0, p_sat=float(np.mean(flags)), sat_flags=flags))
    return rows


def test_fit_transition_recovers_parameters():
    rows = _synthetic_rows(0.8, 0.1, parse_grid("0.2:1.5:0.05"), 800, 1)
    fit = fit_transition(rows)
    assert abs(fit.center - 0.8) < 0.01 and abs(fit.width - 0.1) < 0.01
    assert fit.slope == pytest.approx(1 / (4 * fit.width))
    point, err = bootstrap_crossing(rows, 100)
    assert abs(point - 0.8) < 0.03 and 0 < err < 0.02


def test_fit_transition_needs_flags():
    rows = _synthetic_rows(0.8, 0.1, [0.5, 1.0], 10, 0)
    rows[0].sat_flags = []
    with pytest.raises(ValueError):
        fit_transition(rows)


def test_census_trivial_and_small():
    row = census(40, 0.1, 6, 2, 200, seed=1)
    assert row.mean < 0.05 and row.predicted < 0.01
    row = census(60, 1.0, 4, 2, 400, seed=2)
    assert abs(row.z) < 4


def test_geometrization_tree_and_figure_eight():
    tree = random_tree(6, make_rng(0))
    rep = geometrization_trial(tree, 1, 50, seed=0)
    assert rep.concentrated and rep.modal_D == 7 and rep.min_margin > 10
    rep = geometrization_trial(figure_eight_graph(6), 1, 20, seed=1, classical_clauses=["01"] * 7)
    assert rep.concentrated and rep.modal_D == 0
    assert rep.classical_D >= rep.modal_D
    assert rep.to_dict()["counts"] == {"0": 20}


def test_energy_scaling_report():
    rep = figure_eight_energy_scaling([4, 6], trials=6, seed=0)
    assert len(rep.mean_E0) == 2 and all(m > 0 for m in rep.mean_E0)
    assert rep.excluded == [0, 0]


def test_promise_gap_chain_probe():
    # rank-3 projectors on an open chain of four triples leave no zero-energy state
    rows = promise_gap_stats(3, 3, 0.0, [9], trials=5, seed=0, graph_factory=lambda n, s: chain_hypergraph(3, 4))
    assert rows[0].n == 9 and rows[0].frac_zero == 0 and rows[0].min_E0 > 1e-8
    assert rows[0].epsilon == pytest.approx(1 / 9)
    # rank 2 on the same chain is satisfiable
    rows = promise_gap_stats(3, 2, 0.0, [9], trials=5, seed=0, graph_factory=lambda n, s: chain_hypergraph(3, 4))
    assert rows[0].frac_zero == 1


def test_energy_density_envelope():
    rows = scan(2, 1, [0.3, 0.7, 1.0, 1.3], 8, 12, seed=4)
    env = energy_density_envelope(rows)
    assert env.alpha_gc == 0.5 and env.rows_above == 3
    for row in rows[1:]:
        assert row.mean_E0 / row.n <= env.c_min * (row.alpha - 0.5) ** 2 * (1 + 1e-12)
    assert 0 < env.c_fit <= env.c_min
    with pytest.raises(ValueError):
        energy_density_envelope(scan(2, 1, [0.3], 6, 3, seed=0))
