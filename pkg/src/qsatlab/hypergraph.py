"""Random k-uniform hypergraphs and their classical structure.

Qubits are labelled ``0..n-1``; an edge is a strictly increasing k-tuple.
Everything here is a pure function of its inputs (and seed).
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import ArityError, CapacityError, ValidationError
from .rng import make_rng

# alpha_hc(k) for k >= 3 has no closed form; only the k=3 value is tabulated.
_ALPHA_HC = {2: 0.5, 3: 0.81}

MAX_FIGURE_EIGHT_LOOP = 12


@dataclass(frozen=True)
class Hypergraph:
    n: int
    k: int
    edges: tuple[tuple[int, ...], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be positive, got {self.n}")
        if self.k < 2:
            raise ArityError(f"edge arity k must be >= 2, got {self.k}")
        canon = []
        for pos, e in enumerate(self.edges):
            t = tuple(sorted(int(q) for q in e))
            if len(t) != self.k:
                raise ValidationError(f"edge {pos} has {len(t)} qubits, expected k={self.k}")
            if len(set(t)) != self.k:
                raise ValidationError(f"edge {pos} repeats a qubit: {list(e)}")
            if t[0] < 0 or t[-1] >= self.n:
                raise ValidationError(f"edge {pos} has a qubit outside [0, {self.n})")
            canon.append(t)
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a == b:
                raise ValidationError(f"duplicate edge {list(a)}")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def alpha(self) -> float:
        return self.m / self.n

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for e in self.edges:
            deg[list(e)] += 1
        return deg

    def subgraph(self, edge_indices: Iterable[int]) -> "Hypergraph":
        """Same qubit set, a subset of the edges."""
        return Hypergraph(self.n, self.k, tuple(self.edges[i] for i in edge_indices), self.seed)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "seed": self.seed, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "Hypergraph":
        for key in ("n", "k", "edges"):
            if key not in d:
                raise ValidationError(f"graph file: missing field {key!r}")
        try:
            return cls(int(d["n"]), int(d["k"]), tuple(tuple(e) for e in d["edges"]), int(d.get("seed", 0)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"graph file: malformed fields ({exc})") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Hypergraph":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"graph file: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d)


def sample_hypergraph(n: int, k: int, alpha: float, mode: str = "poisson", seed: int = 0) -> Hypergraph:
    """Random k-uniform hypergraph with alpha*n expected edges.

    ``poisson`` mode includes each k-tuple independently with probability
    p = alpha*n / C(n, k), realised as a Binomial edge count followed by
    that many distinct uniform tuples. ``fixed_m`` uses M = round(alpha*n).
    """
    if k < 2:
        raise ArityError(f"k must be >= 2, got {k}")
    if n < k:
        raise ValidationError(f"need n >= k, got n={n}, k={k}")
    if alpha < 0:
        raise ValidationError(f"alpha must be non-negative, got {alpha}")
    total = math.comb(n, k)
    target = alpha * n
    if target > total:
        raise CapacityError(f"alpha*n = {target:g} exceeds the {total} available {k}-tuples on {n} qubits")
    rng = make_rng(seed)
    if mode == "poisson":
        if total < 2**62:
            m = int(rng.binomial(total, target / total)) if target > 0 else 0
        else:
            m = int(rng.poisson(target))
    elif mode == "fixed_m":
        m = int(math.floor(target + 0.5))
        if m > total:
            raise CapacityError(f"M = {m} exceeds the {total} available tuples")
    else:
        raise ValidationError(f"unknown sampling mode {mode!r}")
    return Hypergraph(n, k, _distinct_tuples(rng, n, k, m, total), seed)


def _distinct_tuples(rng: np.random.Generator, n: int, k: int, m: int, total: int) -> tuple:
    if m == 0:
        return ()
    if 2 * m > total:
        # dense regime: pick directly among all tuples
        from itertools import combinations

        pool = list(combinations(range(n), k))
        pick = rng.choice(len(pool), size=m, replace=False)
        return tuple(pool[i] for i in sorted(pick))
    chosen: dict[tuple, None] = {}
    while len(chosen) < m:
        need = m - len(chosen)
        batch = rng.integers(0, n, size=(2 * need + 8, k))
        batch.sort(axis=1)
        ok = np.all(np.diff(batch, axis=1) > 0, axis=1)
        for row in batch[ok]:
            t = tuple(int(x) for x in row)
            if t not in chosen:
                chosen[t] = None
                if len(chosen) == m:
                    break
    return tuple(chosen)


@dataclass(frozen=True)
class Components:
    labels: np.ndarray  # component id per qubit
    qubits: list[list[int]]
    edges: list[list[int]]  # edge indices per component

    @property
    def count(self) -> int:
        return len(self.qubits)

    @property
    def sizes(self) -> list[int]:
        return [len(q) for q in self.qubits]


def connected_components(g: Hypergraph) -> Components:
    """Partition qubits (and edges) into connected components.

    Component ids are ordered by smallest member qubit.
    """
    rows, cols = [], []
    for e in g.edges:
        rows.extend(e[:-1])
        cols.extend(e[1:])
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
    _, raw = _cc(adj, directed=False)
    # relabel by first appearance so ids are canonical
    remap: dict[int, int] = {}
    labels = np.empty(g.n, dtype=np.int64)
    for q in range(g.n):
        labels[q] = remap.setdefault(int(raw[q]), len(remap))
    qubits: list[list[int]] = [[] for _ in remap]
    for q in range(g.n):
        qubits[labels[q]].append(q)
    edges: list[list[int]] = [[] for _ in remap]
    for i, e in enumerate(g.edges):
        edges[labels[e[0]]].append(i)
    return Components(labels, qubits, edges)


@dataclass(frozen=True)
class Hypercore:
    core: Hypergraph
    core_edges: tuple[int, ...]  # indices into the original edge list
    removed: tuple[int, ...]  # indices, in removal order
    leaves: tuple[int, ...]  # the degree-1 qubit that licensed each removal

    @property
    def empty(self) -> bool:
        return not self.core_edges

    @property
    def qubits(self) -> list[int]:
        return sorted({q for e in self.core.edges for q in e})


def hypercore(g: Hypergraph, rng: np.random.Generator | None = None) -> Hypercore:
    """Strip edges that contain a degree-1 qubit until none remain.

    Without ``rng`` leaves are processed FIFO from the lowest qubit index;
    with ``rng`` the next leaf is drawn at random (the core is the same
    either way, only the removal sequence differs).
    """
    incident: list[list[int]] = [[] for _ in range(g.n)]
    for i, e in enumerate(g.edges):
        for q in e:
            incident[q].append(i)
    deg = np.array([len(x) for x in incident], dtype=np.int64)
    alive = np.ones(g.m, dtype=bool)
    removed: list[int] = []
    leaves: list[int] = []

    pending = [q for q in range(g.n) if deg[q] == 1]
    fifo = deque(pending)
    while True:
        if rng is None:
            if not fifo:
                break
            q = fifo.popleft()
        else:
            if not pending:
                break
            j = int(rng.integers(len(pending)))
            pending[j], pending[-1] = pending[-1], pending[j]
            q = pending.pop()
        if deg[q] != 1:
            continue
        e = next(i for i in incident[q] if alive[i])
        alive[e] = False
        removed.append(e)
        leaves.append(q)
        for v in g.edges[e]:
            deg[v] -= 1
            if deg[v] == 1:
                if rng is None:
                    fifo.append(v)
                else:
                    pending.append(v)
    core_edges = tuple(int(i) for i in np.flatnonzero(alive))
    return Hypercore(g.subgraph(core_edges), core_edges, tuple(removed), tuple(leaves))


def cyclomatic_excess(g: Hypergraph, comps: Components | None = None) -> list[int]:
    """edges - nodes + 1 for each connected component (k=2 only)."""
    if g.k != 2:
        raise ArityError("cyclomatic excess is only defined for k=2 graphs")
    comps = comps or connected_components(g)
    return [len(e) - len(q) + 1 for q, e in zip(comps.qubits, comps.edges)]


@dataclass(frozen=True)
class GraphStats:
    component_count: int
    component_sizes: list[int]
    hypercore_qubits: int
    hypercore_edges: int
    excess: list[int] | None
    giant_fraction: float

    @property
    def max_excess(self) -> int | None:
        return max(self.excess) if self.excess is not None else None


def graph_stats(g: Hypergraph) -> GraphStats:
    comps = connected_components(g)
    core = hypercore(g)
    return GraphStats(
        component_count=comps.count,
        component_sizes=comps.sizes,
        hypercore_qubits=len(core.qubits),
        hypercore_edges=len(core.core_edges),
        excess=cyclomatic_excess(g, comps) if g.k == 2 else None,
        giant_fraction=max(comps.sizes) / g.n,
    )


def classify_satisfiability_k2(g: Hypergraph) -> str:
    """Generic 2-QSAT verdict: SAT iff no component has two independent cycles."""
    if g.k != 2:
        raise ArityError(f"classify_satisfiability_k2 needs k=2, got k={g.k}")
    return "SAT" if max(cyclomatic_excess(g), default=0) <= 1 else "UNSAT"


def _adjacency(g: Hypergraph, edge_indices: Iterable[int] | None = None) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    idx = range(g.m) if edge_indices is None else edge_indices
    for i in idx:
        a, b = g.edges[i]
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def simple_cycles(adj: dict[int, set[int]], length: int) -> list[tuple[int, ...]]:
    """All simple cycles of exactly ``length`` nodes, each listed once.

    A cycle is reported starting from its smallest node, in the direction
    whose second node is smaller than its last.
    """
    out: list[tuple[int, ...]] = []
    for s in sorted(adj):
        path = [s]
        on_path = {s}

        def extend():
            u = path[-1]
            if len(path) == length:
                if s in adj[u] and path[1] < path[-1]:
                    out.append(tuple(path))
                return
            for w in adj[u]:
                if w > s and w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    extend()
                    path.pop()
                    on_path.discard(w)

        extend()
    return out


def count_figure_eights(g: Hypergraph, L: int, d: int, max_loop: int = MAX_FIGURE_EIGHT_LOOP) -> int:
    """Number of subgraphs that are an L-cycle plus one chord joining two
    cycle nodes at cycle distance d. Each subgraph is counted once."""
    if g.k != 2:
        raise ArityError("figure-eight census needs k=2")
    if L % 2 or L < 4:
        raise ValidationError(f"loop length must be even and >= 4, got {L}")
    if not 2 <= d <= L // 2:
        raise ValidationError(f"chord separation must lie in [2, {L // 2}], got {d}")
    if L > max_loop:
        raise ValidationError(f"exact figure-eight counting is capped at L <= {max_loop}")
    core = hypercore(g)
    adj = _adjacency(g, core.core_edges)
    starts = L // 2 if 2 * d == L else L
    total = 0
    for cyc in simple_cycles(adj, L):
        for i in range(starts):
            if cyc[(i + d) % L] in adj[cyc[i]]:
                total += 1
    return total


def thresholds(k: int) -> dict[str, float | None]:
    """Giant-component and hypercore densities; alpha_hc is None when unknown."""
    if k < 2:
        raise ArityError(f"k must be >= 2, got {k}")
    return {"alpha_gc": 1.0 / (k * (k - 1)), "alpha_hc": _ALPHA_HC.get(k)}


def graph_from_edges(n: int, edges: Sequence[Sequence[int]], seed: int = 0) -> Hypergraph:
    """Convenience constructor inferring k from the first edge."""
    if not edges:
        raise ValidationError("cannot infer k from an empty edge list")
    return Hypergraph(n, len(edges[0]), tuple(tuple(e) for e in edges), seed)


def cycle_graph(n: int) -> Hypergraph:
    return Hypergraph(n, 2, tuple((i, (i + 1) % n) for i in range(n)))


def figure_eight_graph(L: int, d: int | None = None) -> Hypergraph:
    """L-cycle 0..L-1 plus the chord (0, d); d defaults to max(2, L/2 - 1)."""
    d = max(2, L // 2 - 1) if d is None else d
    if not 2 <= d <= L // 2:
        raise ValidationError(f"chord separation must lie in [2, {L // 2}]")
    return Hypergraph(L, 2, cycle_graph(L).edges + ((0, d),))


def chain_hypergraph(k: int, length: int) -> Hypergraph:
    """Open chain of ``length`` k-edges, consecutive edges sharing one qubit."""
    step = k - 1
    edges = tuple(tuple(range(i * step, i * step + k)) for i in range(length))
    return Hypergraph(length * step + 1, k, edges)


def random_tree(n: int, rng: np.random.Generator) -> Hypergraph:
    """Uniform random recursive tree on n qubits (k=2)."""
    edges = tuple((int(rng.integers(i)), i) for i in range(1, n))
    return Hypergraph(n, 2, edges)
