"""Closed-form bounds, subgraph-count expectations and classical frustration.

Counting formulas work in log space via ``math.lgamma`` so that n ~ 10^6
never overflows.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ArityError, CapExceededError, NoCertificateError, ValidationError
from .hypergraph import Hypergraph, _adjacency, connected_components, cyclomatic_excess, hypercore

FRUSTRATION_CAP = 10**8


def alpha_weak_bound(k: int, r: int = 1) -> float:
    """Density above which D <= 2^N (1 - r/2^k)^M forces D -> 0."""
    q = 2**k
    if not 1 <= r <= q:
        raise ValidationError(f"rank must lie in [1, {q}]")
    if r == q:
        return 0.0
    return -1.0 / math.log2(1.0 - r / q)


def weak_dim_bound(n: int, m: int, k: int, r: int = 1) -> float:
    """log2 of the weak upper bound 2^n (1 - r/2^k)^m on the kernel dimension."""
    q = 2**k
    if r == q:
        return -math.inf if m > 0 else float(n)
    return n + m * math.log2(1.0 - r / q)


def edge_probability(n: int, k: int, alpha: float) -> float:
    """Inclusion probability giving alpha*n expected edges."""
    return alpha * n / math.comb(n, k)


@dataclass(frozen=True)
class CountingQuery:
    n: int
    p: float
    vertices: int
    edges: int
    automorphisms: int

    def __post_init__(self):
        if self.vertices > self.n:
            raise ValidationError("subgraph has more vertices than the graph")
        if min(self.n, self.vertices, self.automorphisms) <= 0 or self.edges < 0 or not 0 < self.p <= 1:
            raise ValidationError("counting query parameters must be positive (0 < p <= 1)")

    @classmethod
    def figure_eights(cls, n: int, p: float, K: int, L: int, automorphisms_each: int = 2) -> "CountingQuery":
        """K disjoint copies of an L-node cycle-plus-chord."""
        if K * L > n:
            raise ValidationError("K*L must not exceed n")
        return cls(n, p, K * L, K * (L + 1), math.factorial(K) * automorphisms_each**K)


def log_expected_subgraph_count(q: CountingQuery) -> float:
    """log E#(A in G(n,p)) = log[n! / ((n-|A|)! |Aut A|) p^e(A)]."""
    return (
        math.lgamma(q.n + 1)
        - math.lgamma(q.n - q.vertices + 1)
        - math.log(q.automorphisms)
        + q.edges * math.log(q.p)
    )


def expected_subgraph_count(q: CountingQuery) -> float:
    return math.exp(log_expected_subgraph_count(q))


def log_expected_figure_eights(n: int, p: float, K: int, L: int) -> float:
    """Direct form for K disjoint figure eights: n! p^{K(L+1)} / ((n-KL)! K! 2^K)."""
    if K * L > n:
        raise ValidationError("K*L must not exceed n")
    return (
        math.lgamma(n + 1)
        + K * (L + 1) * math.log(p)
        - math.lgamma(n - K * L + 1)
        - math.lgamma(K + 1)
        - K * math.log(2.0)
    )


def figure_eight_automorphisms(L: int, d: int) -> int:
    """|Aut| of an L-cycle with a chord at cycle distance d (4 if the chord
    splits the cycle evenly, else 2)."""
    return 4 if 2 * d == L else 2


def figure_eight_entropy(n: float, alpha: float, K: float, L: float) -> float:
    """Asymptotic log-count of K disjoint size-L figure eights (KL << n)."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if K * L > n / 10:
        raise ValidationError("figure-eight entropy needs K*L <= n/10")
    kl = K * L
    return kl * (math.log(2 * alpha) - kl / n) + K * (math.log(alpha) + 1 - math.log(K) - math.log(n))


def _assignment_bits(n: int) -> np.ndarray:
    x = np.arange(2**n, dtype=np.int64)
    return ((x[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.int8)


def _local_index(bits: np.ndarray, edge: tuple[int, ...]) -> np.ndarray:
    k = len(edge)
    idx = np.zeros(bits.shape[0], dtype=np.int64)
    for j, q in enumerate(edge):
        idx |= bits[:, q].astype(np.int64) << (k - 1 - j)
    return idx


def count_satisfying(g: Hypergraph, clauses, qubits: list[int] | None = None) -> int:
    """Number of assignments avoiding every forbidden k-bit string.

    With ``qubits`` only the edges inside that qubit set are checked and the
    count is over those qubits.
    """
    qubits = list(range(g.n)) if qubits is None else list(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    if len(qubits) > 24:
        raise CapExceededError("exhaustive satisfying-assignment count is limited to 24 variables")
    bits = _assignment_bits(len(qubits))
    ok = np.ones(bits.shape[0], dtype=bool)
    for e, c in zip(g.edges, clauses):
        if all(q in pos for q in e):
            c = int(c, 2) if isinstance(c, str) else int(c)
            ok &= _local_index(bits, tuple(pos[q] for q in e)) != c
    return int(ok.sum())


@dataclass(frozen=True)
class FrustrationResult:
    min_count: int
    clauses: list[str]
    evaluated: int


def most_frustrated_classical(g: Hypergraph, cap: int = FRUSTRATION_CAP) -> FrustrationResult:
    """Minimum number of satisfying assignments over every choice of one
    forbidden configuration per edge (exhaustive; stops early at zero)."""
    work = (2**g.k) ** g.m * 2**g.n
    if work > cap:
        raise CapExceededError(
            f"exhaustive frustration search needs {work:.3g} evaluations (cap {cap:.3g}); "
            "for k=2 UNSAT evidence use unsat_certificate_k2"
        )
    q = 2**g.k
    bits = _assignment_bits(g.n)
    local = [_local_index(bits, e) for e in g.edges]
    best = [bits.shape[0] + 1, []]
    choice = [0] * g.m
    evaluated = [0]

    def search(i: int, alive: np.ndarray, count: int):
        if i == g.m:
            if count < best[0]:
                best[0], best[1] = count, list(choice)
            return
        # most damaging clause first so a zero count, if any, turns up early
        hits = np.bincount(local[i][alive], minlength=q)
        for c in np.argsort(-hits, kind="stable"):
            evaluated[0] += 1
            choice[i] = int(c)
            nxt = alive & (local[i] != c)
            search(i + 1, nxt, count - int(hits[c]))
            if best[0] == 0:
                return

    search(0, np.ones(bits.shape[0], dtype=bool), bits.shape[0])
    fmt = f"0{g.k}b"
    return FrustrationResult(int(best[0]), [format(c, fmt) for c in best[1]], evaluated[0])


@dataclass(frozen=True)
class UnsatCertificate:
    clauses: list[str]  # one forbidden bit string per edge of the graph, edge order
    component: list[int]
    construction: str
    verified: bool | None  # None when the component is too large to enumerate
    note: str = ""


def _forbid(edge: tuple[int, int], u: int, lu: int, v: int, lv: int) -> str:
    """Clause encoding the implication (x_u = lu) => (x_v = lv)."""
    want = {u: lu, v: 1 - lv}
    return f"{want[edge[0]]}{want[edge[1]]}"


def _shortest_path(adj, sources: set[int], targets: set[int], banned: set[frozenset] = frozenset()) -> list[int] | None:
    prev: dict[int, int | None] = {s: None for s in sources}
    queue = deque(sorted(sources))
    while queue:
        u = queue.popleft()
        if u in targets:
            path = [u]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for w in sorted(adj[u]):
            if w not in prev and frozenset((u, w)) not in banned:
                prev[w] = u
                queue.append(w)
    return None


def _cycle_through(adj, u: int, v: int, banned: set[frozenset]) -> list[int] | None:
    path = _shortest_path(adj, {u}, {v}, banned | {frozenset((u, v))})
    return path  # closes with the edge v-u


def _find_cycle(adj, banned: set[frozenset]) -> list[int] | None:
    for u in sorted(adj):
        for v in sorted(adj[u]):
            if u < v and frozenset((u, v)) not in banned:
                c = _cycle_through(adj, u, v, banned)
                if c is not None:
                    return c
    return None


def _cycle_edges(cyc: list[int]) -> set[frozenset]:
    return {frozenset((cyc[i], cyc[(i + 1) % len(cyc)])) for i in range(len(cyc))}


def _all_cycles(adj, limit: int = 20000) -> list[list[int]]:
    out: list[list[int]] = []
    for s in sorted(adj):
        stack = [(s, [s])]
        while stack:
            u, path = stack.pop()
            for w in adj[u]:
                if w == s and len(path) >= 3 and path[1] < path[-1]:
                    out.append(path)
                    if len(out) >= limit:
                        return out
                elif w > s and w not in path:
                    stack.append((w, path + [w]))
    return out


def _tree_paths(adj, forest_edges: set[frozenset], terminals: set[int]) -> list[list[int]]:
    """Paths inside the forest joining two distinct terminals."""
    fadj: dict[int, list[int]] = {}
    for e in forest_edges:
        a, b = tuple(e)
        fadj.setdefault(a, []).append(b)
        fadj.setdefault(b, []).append(a)
    out = []
    terms = sorted(t for t in terminals if t in fadj)
    for a, b in combinations(terms, 2):
        prev = {a: None}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for w in fadj[u]:
                if w not in prev:
                    prev[w] = u
                    queue.append(w)
        if b in prev:
            path = [b]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            out.append(path[::-1])
    return out


def _path_edges(path: list[int]) -> set[frozenset]:
    return {frozenset((path[i], path[i + 1])) for i in range(len(path) - 1)}


def unsat_certificate_k2(g: Hypergraph, component: int | None = None, verify_limit: int = 20) -> UnsatCertificate:
    """Classical clause choice with no satisfying assignment.

    Two constructions are tried on the component's 2-core:

    * two edge-disjoint cycles joined by a path: the first cycle forces its
      base qubit to 1, the path carries that to the second cycle, which
      forces its base qubit to 0;
    * a cycle whose clauses force all its qubits equal, plus two further
      edge-disjoint paths between cycle qubits that forbid all-0 and all-1.

    A component whose 2-core is a single theta (cycle plus one chord path)
    admits neither, and in fact no clause choice makes it UNSAT, so it is
    refused with ``NoCertificateError``.
    """
    if g.k != 2:
        raise ArityError("unsat_certificate_k2 needs k=2")
    comps = connected_components(g)
    excess = cyclomatic_excess(g, comps)
    if component is None:
        cands = [i for i, x in enumerate(excess) if x >= 2]
        if not cands:
            raise NoCertificateError("no component has cyclomatic excess >= 2")
        component = cands[0]
    if excess[component] < 2:
        raise NoCertificateError(f"component {component} has cyclomatic excess {excess[component]} < 2")

    core = hypercore(g.subgraph(comps.edges[component]))
    adj = _adjacency(core.core)
    found = _two_linked_cycles(adj) or _loop_with_two_bonds(adj)
    if found is None:
        raise NoCertificateError(
            "the component's 2-core is a theta graph: every classical clause choice leaves a satisfying assignment"
        )
    kind, implications = found
    index = {e: i for i, e in enumerate(g.edges)}
    clauses = ["00"] * g.m
    for (u, lu), (v, lv) in implications:
        e = (min(u, v), max(u, v))
        clauses[index[e]] = _forbid(e, u, lu, v, lv)
    qubits = comps.qubits[component]
    verified = None
    if len(qubits) <= verify_limit:
        verified = count_satisfying(g, clauses, qubits) == 0
    note = "" if verified is not None else "too large for exhaustive check; UNSAT by construction"
    return UnsatCertificate(clauses, qubits, kind, verified, note)


def _chain(path: list[int], first: int, rest: int) -> list:
    """Implications x_p0=first => x_p1=rest => ... => x_pend=rest."""
    out = []
    lit = first
    for a, b in zip(path, path[1:]):
        out.append(((a, lit), (b, rest)))
        lit = rest
    return out


def _loop_flip(cycle: list[int], base_value: int) -> list:
    """Around a cycle from its first node: x=base => ... => x_first = 1-base."""
    out = []
    n = len(cycle)
    for i in range(n):
        a, b = cycle[i], cycle[(i + 1) % n]
        out.append(((a, base_value), (b, base_value if i < n - 1 else 1 - base_value)))
    return out


def _rotate(cycle: list[int], start: int) -> list[int]:
    i = cycle.index(start)
    return cycle[i:] + cycle[:i]


def _two_linked_cycles(adj) -> tuple[str, list] | None:
    first_cycles = []
    for u in sorted(adj):
        for v in sorted(adj[u]):
            if u < v:
                c = _cycle_through(adj, u, v, set())
                if c is not None:
                    first_cycles.append(c)
    small = sum(len(x) for x in adj.values()) // 2 <= 40
    if small:
        first_cycles += _all_cycles(adj)
    seen = set()
    for c1 in first_cycles:
        key = frozenset(_cycle_edges(c1))
        if key in seen:
            continue
        seen.add(key)
        banned = _cycle_edges(c1)
        c2 = _find_cycle(adj, banned)
        if c2 is None:
            continue
        path = _shortest_path(adj, set(c1), set(c2))
        a, b = path[0], path[-1]
        imps = _loop_flip(_rotate(c1, a), 0)  # a=0 => a=1
        imps += _chain(path, 1, 1)  # a=1 => b=1
        imps += _loop_flip(_rotate(c2, b), 1)  # b=1 => b=0
        return "two-linked-cycles", imps
    return None


def _loop_with_two_bonds(adj) -> tuple[str, list] | None:
    all_edges = {frozenset((u, v)) for u in adj for v in adj[u]}
    for cyc in _all_cycles(adj):
        cedges = _cycle_edges(cyc)
        paths = _tree_paths(adj, all_edges - cedges, set(cyc))
        for p1, p2 in combinations(paths, 2):
            if _path_edges(p1) & _path_edges(p2):
                continue
            imps = []
            n = len(cyc)
            for i in range(n):
                imps.append(((cyc[i], 0), (cyc[(i + 1) % n], 0)))  # forces all equal
            imps += _chain(p1, 0, 1)  # kills all-0
            imps += _chain(p2, 1, 0)  # kills all-1
            return "loop-with-two-bonds", imps
    return None
