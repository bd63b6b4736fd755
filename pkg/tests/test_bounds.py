import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsatlab.bounds import (
    CountingQuery,
    alpha_weak_bound,
    count_satisfying,
    edge_probability,
    expected_subgraph_count,
    figure_eight_automorphisms,
    figure_eight_entropy,
    log_expected_figure_eights,
    log_expected_subgraph_count,
    most_frustrated_classical,
    unsat_certificate_k2,
    weak_dim_bound,
)
from qsatlab.errors import ArityError, CapExceededError, NoCertificateError, ValidationError
from qsatlab.hypergraph import (
    Hypergraph,
    count_figure_eights,
    cycle_graph,
    figure_eight_graph,
    sample_hypergraph,
)
from qsatlab.instance import build_instance, classical_diagonal_instance
from qsatlab.kernel import kernel_dimension

from oracles import brute_force_sat_count

# reference values computed independently with mpmath at 30 digits
ALPHA_WB = {(2, 1): 2.409420839653209, (3, 1): 5.190893069684432, (3, 3): 1.4747698473569487}


# ---------------------------------------------------------------- weak bound


@pytest.mark.parametrize("kr,value", ALPHA_WB.items())
def test_alpha_weak_bound_reference(kr, value):
    assert alpha_weak_bound(*kr) == pytest.approx(value, rel=1e-14)


def test_alpha_weak_bound_edge_cases():
    assert alpha_weak_bound(3, 8) == 0.0
    assert alpha_weak_bound(3, 4) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        alpha_weak_bound(2, 5)


def test_weak_dim_bound():
    assert weak_dim_bound(2, 1, 2, 1) == pytest.approx(1.584962500721156)
    assert weak_dim_bound(10, 0, 3) == 10
    assert weak_dim_bound(5, 1, 2, 4) == -math.inf
    assert weak_dim_bound(5, 0, 2, 4) == 5


def test_log2_dimension_below_bound_on_random_instances():
    for s in range(60):
        k, r = (2, 1 + s % 3) if s % 2 else (3, 1 + s % 5)
        n = 6 + s % 4
        inst = build_instance(sample_hypergraph(n, k, 0.6, seed=s), r, s)
        rep = kernel_dimension(inst)
        bound = weak_dim_bound(n, inst.m, k, r)
        assert rep.D == 0 or math.log2(rep.D) <= bound + 1e-12


# ---------------------------------------------------------------- subgraph counts


def test_single_edge_expectation_is_alpha_n():
    for n, alpha in ((10, 0.3), (1000, 1.7), (10**6, 0.5)):
        p = edge_probability(n, 2, alpha)
        assert expected_subgraph_count(CountingQuery(n, p, 2, 1, 2)) == pytest.approx(alpha * n, rel=1e-9)


def test_triangle_on_five_nodes():
    # brute-force average triangle count over all 2^10 graphs on 5 nodes
    pairs = list(itertools.combinations(range(5), 2))
    total = 0
    for mask in range(1 << len(pairs)):
        es = {pairs[i] for i in range(len(pairs)) if mask >> i & 1}
        total += sum({(a, b), (a, c), (b, c)} <= es for a, b, c in itertools.combinations(range(5), 3))
    assert total / 1024 == 1.25
    assert expected_subgraph_count(CountingQuery(5, 0.5, 3, 3, 6)) == pytest.approx(1.25, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(10, 10**7), st.floats(1e-6, 1.0), st.integers(1, 50), st.integers(2, 60))
def test_k_fold_descriptor_matches_direct_form(n, p, K, L):
    if K * L > n:
        return
    a = log_expected_subgraph_count(CountingQuery.figure_eights(n, p, K, L))
    b = log_expected_figure_eights(n, p, K, L)
    # both sum terms of size log n!; agreement to a few ulps of the largest term
    scale = math.lgamma(n + 1) + K * (L + 1) * abs(math.log(p)) + math.lgamma(K + 1) + 1.0
    assert abs(a - b) <= 8 * np.finfo(float).eps * scale


def test_large_n_no_overflow():
    v = log_expected_figure_eights(10**6, 2e-6, 1000, 100)
    assert math.isfinite(v)


def test_counting_query_validation():
    with pytest.raises(ValidationError):
        CountingQuery(5, 0.5, 6, 3, 1)
    with pytest.raises(ValidationError):
        CountingQuery(5, 0.0, 3, 3, 6)
    with pytest.raises(ValidationError):
        CountingQuery.figure_eights(10, 0.1, 3, 4)


def test_figure_eight_automorphisms():
    assert figure_eight_automorphisms(6, 2) == 2
    assert figure_eight_automorphisms(6, 3) == 4
    assert figure_eight_automorphisms(4, 2) == 4


def _mc_check(n, alpha, counter, query, trials, seed0):
    counts = np.array([counter(sample_hypergraph(n, 2, alpha, seed=seed0 + s)) for s in range(trials)], dtype=float)
    pred = expected_subgraph_count(query)
    se = counts.std(ddof=1) / math.sqrt(trials)
    return abs(counts.mean() - pred) < 3 * se + 1e-12, counts.mean(), pred


def _triangles(g):
    G = nx.Graph(list(g.edges))
    return sum(nx.triangles(G).values()) // 3


@pytest.mark.slow
@pytest.mark.parametrize("n", [50, 100, 200])
def test_monte_carlo_counts_match_first_moment(n):
    alpha = 1.0
    p = edge_probability(n, 2, alpha)
    checks = [
        (lambda g: g.m, CountingQuery(n, p, 2, 1, 2)),
        (_triangles, CountingQuery(n, p, 3, 3, 6)),
        (lambda g: count_figure_eights(g, 4, 2), CountingQuery(n, p, 4, 5, 4)),
        (lambda g: count_figure_eights(g, 6, 2), CountingQuery(n, p, 6, 7, 2)),
    ]
    for i, (counter, q) in enumerate(checks):
        ok, mean, pred = _mc_check(n, alpha, counter, q, 1500, 10**6 * i + n)
        assert ok, (i, mean, pred)


# ---------------------------------------------------------------- entropy


def test_entropy_reference_value():
    # 1e3 figure eights of size 1e2 among 1e6 qubits at alpha = 0.75
    assert figure_eight_entropy(1e6, 0.75, 1e3, 1e2) == pytest.approx(10535.562901418246, rel=1e-12)


def test_entropy_at_giant_threshold_negative():
    for K, L in ((1, 10), (10, 20), (100, 5)):
        assert figure_eight_entropy(1e6, 0.5, K, L) < 0


def test_entropy_grows_with_n_above_half():
    # K = n^0.9, L = n^0.05: the KL log 2a term wins only once L >> log n
    vals = [figure_eight_entropy(10.0**e, 0.75, 10.0 ** (0.9 * e), 10.0 ** (0.05 * e)) for e in (60, 70, 80, 90)]
    assert all(b > a > 0 for a, b in zip(vals, vals[1:]))
    assert figure_eight_entropy(1e30, 0.75, 1e27, 10.0**1.5) < 0


def test_entropy_preconditions():
    with pytest.raises(ValidationError):
        figure_eight_entropy(100, 0.0, 1, 5)
    with pytest.raises(ValidationError):
        figure_eight_entropy(100, 0.7, 3, 5)


# ---------------------------------------------------------------- classical frustration


def test_count_satisfying_vs_brute_force():
    for s in range(20):
        g = sample_hypergraph(6, 2 + s % 2, 0.8, seed=s)
        rng = np.random.default_rng(s)
        clauses = [format(int(c), f"0{g.k}b") for c in rng.integers(0, 2**g.k, g.m)]
        assert count_satisfying(g, clauses) == brute_force_sat_count(g.n, g.edges, clauses)


def test_single_edge_frustration():
    res = most_frustrated_classical(Hypergraph(2, 2, ((0, 1),)))
    assert res.min_count == 3 and len(res.clauses) == 1


def test_figure_eight_is_never_classically_unsat():
    # exhaustive: the cycle-plus-chord always keeps a satisfying assignment
    res = most_frustrated_classical(figure_eight_graph(4, 2))
    assert res.min_count == 1
    assert count_satisfying(figure_eight_graph(4, 2), res.clauses) == 1


def test_frustration_cap():
    with pytest.raises(CapExceededError):
        most_frustrated_classical(sample_hypergraph(12, 2, 1.5, seed=0))


def test_quantum_dimension_below_classical_minimum():
    strict = 0
    tested = 0
    for s in range(400):
        g = sample_hypergraph(5 + s % 2, 2, 0.6 + 0.4 * (s % 3) / 2, seed=s)
        if g.m > 6:
            continue
        tested += 1
        cmin = most_frustrated_classical(g).min_count
        d = kernel_dimension(build_instance(g, 1, s)).D
        assert d <= cmin
        strict += d < cmin
    assert tested >= 200 and strict > 0


# ---------------------------------------------------------------- certificates


def _butterfly():
    return Hypergraph(5, 2, ((0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)))


def _k4():
    return Hypergraph(4, 2, tuple(itertools.combinations(range(4), 2)))


def test_certificate_two_linked_cycles():
    cert = unsat_certificate_k2(_butterfly())
    assert cert.verified and cert.construction == "two-linked-cycles"
    g = _butterfly()
    assert brute_force_sat_count(g.n, g.edges, cert.clauses) == 0
    assert kernel_dimension(classical_diagonal_instance(g, cert.clauses)).D == 0


def test_certificate_loop_with_two_bonds():
    cert = unsat_certificate_k2(_k4())
    assert cert.verified and cert.construction == "loop-with-two-bonds"
    assert brute_force_sat_count(4, _k4().edges, cert.clauses) == 0


def test_theta_graphs_have_no_certificate():
    theta = Hypergraph(7, 2, ((0, 1), (1, 6), (0, 2), (2, 6), (0, 3), (3, 4), (4, 5), (5, 6)))
    for g in (figure_eight_graph(4, 2), figure_eight_graph(8), theta):
        with pytest.raises(NoCertificateError, match="theta"):
            unsat_certificate_k2(g)
        assert most_frustrated_classical(g).min_count > 0 if g.m <= 6 else True


def test_certificate_preconditions():
    with pytest.raises(NoCertificateError):
        unsat_certificate_k2(cycle_graph(5))
    with pytest.raises(ArityError):
        unsat_certificate_k2(Hypergraph(3, 3, ((0, 1, 2),)))


def test_large_component_certificate_unverified():
    # two triangles joined by a path: 21 qubits, just beyond the default check limit
    edges = [(0, 1), (1, 2), (0, 2)] + [(i, i + 1) for i in range(2, 18)] + [(18, 19), (19, 20), (18, 20)]
    g = Hypergraph(21, 2, tuple(edges))
    cert = unsat_certificate_k2(g)
    assert cert.verified is None and "construction" in cert.note
    assert unsat_certificate_k2(g, verify_limit=21).verified


def test_certificates_on_random_dense_components():
    done = 0
    for s in range(40):
        g = sample_hypergraph(12, 2, 1.3, seed=s)
        try:
            cert = unsat_certificate_k2(g)
        except NoCertificateError:
            continue
        assert cert.verified
        done += 1
    assert done >= 30
