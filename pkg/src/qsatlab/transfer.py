"""Zero-energy product states built from transfer matrices.

For a rank-1 clause on qubits (a, b) forbidding |phi>, the 2x2 matrix
T = eps phi^dagger maps any state of a to a state of b such that the pair
avoids phi. Chaining T along a tree, around a single loop, or (for k > 2)
through the generalised k-1 -> 1 contraction along the leaf-stripping
order yields satisfying product states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArityError,
    DegenerateLoopError,
    DegenerateTransferError,
    RankError,
    SingularTransferError,
    ValidationError,
)
from .hypergraph import connected_components, hypercore
from .instance import ProductState, QsatInstance
from .kernel import verify_state

SINGULAR_TOL = 1e-8
DEGENERATE_LOOP_TOL = 1e-8
CONTRACTION_TOL = 1e-10
CORE_RESIDUAL_TOL = 1e-10

EPS = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class TransferMatrix2:
    matrix: np.ndarray
    source: int
    target: int
    edge: int | None

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    @property
    def singular(self) -> bool:
        return abs(self.det) < SINGULAR_TOL


def bravyi_matrix(phi: np.ndarray) -> np.ndarray:
    """T = eps phi^dagger: rows (phi01*, phi11*) and (-phi00*, -phi10*)."""
    p = np.asarray(phi, dtype=np.complex128).reshape(2, 2)
    return EPS @ p.conj().T


def bravyi_transfer(phi: np.ndarray, source: int = 0, target: int = 1, edge: int | None = None) -> TransferMatrix2:
    return TransferMatrix2(bravyi_matrix(phi), source, target, edge)


def edge_transfer(inst: QsatInstance, edge_index: int, from_qubit: int) -> TransferMatrix2:
    """Transfer matrix across a k=2 edge, oriented away from ``from_qubit``."""
    if inst.k != 2:
        raise ArityError("two-qubit transfer matrices need k=2")
    if inst.r != 1:
        raise RankError("transfer matrices need rank-1 projectors")
    a, b = inst.edges[edge_index]
    phi = inst.phis[edge_index, 0].reshape(2, 2)
    if from_qubit == a:
        return bravyi_transfer(phi, a, b, edge_index)
    if from_qubit == b:
        return bravyi_transfer(phi.T, b, a, edge_index)
    raise ValidationError(f"qubit {from_qubit} is not on edge {edge_index}")


def generalized_transfer(phi: np.ndarray, fixed_states, position: int | None = None) -> np.ndarray:
    """State of one free qubit that, together with the k-1 fixed states,
    forms a product state orthogonal to |phi>.

    ``fixed_states`` are listed in edge-tuple order with the free slot at
    ``position`` (default: last) omitted. Returns a unit 2-vector.
    """
    phi = np.asarray(phi, dtype=np.complex128)
    k = int(round(np.log2(phi.size)))
    if 2**k != phi.size or k < 2:
        raise ValidationError("phi must have 2**k components with k >= 2")
    fixed = [np.asarray(s, dtype=np.complex128) for s in fixed_states]
    if len(fixed) != k - 1:
        raise ValidationError(f"need k-1 = {k - 1} fixed states, got {len(fixed)}")
    position = k - 1 if position is None else position
    t = phi.conj().reshape((2,) * k)
    # contract the fixed slots from the last axis down so indices stay valid
    slots = [j for j in range(k) if j != position]
    for j, s in reversed(list(zip(slots, fixed))):
        t = np.tensordot(t, s, axes=([j], [0]))
    v = t.reshape(2)
    norm = np.linalg.norm(v)
    if norm < CONTRACTION_TOL:
        raise DegenerateTransferError("the fixed states already annihilate the clause (zero contraction)")
    out = EPS @ v
    return out / np.linalg.norm(out)


@dataclass(frozen=True)
class TransferBasis:
    root: int
    qubits: list[int]  # component qubits
    up: dict[int, np.ndarray]
    down: dict[int, np.ndarray]
    tree: list[tuple[int, int, int]]  # (parent, child, edge index)

    def product_state(self, which: str, n: int) -> ProductState:
        """All-up or all-down on the component, |0> elsewhere."""
        src = self.up if which == "up" else self.down
        f = np.zeros((n, 2), dtype=np.complex128)
        f[:, 0] = 1.0
        for q, v in src.items():
            f[q] = v
        return ProductState(f)

    def min_pair_det(self) -> float:
        return min(abs(np.linalg.det(np.stack([self.up[q], self.down[q]]))) for q in self.qubits)


def _component_of(inst: QsatInstance, qubit: int):
    comps = connected_components(inst.graph)
    c = int(comps.labels[qubit])
    return comps.qubits[c], comps.edges[c]


def _transfer_along(inst: QsatInstance, root: int, up0, down0, edges: list[int]) -> TransferBasis:
    nbrs: dict[int, list[tuple[int, int]]] = {}
    for ei in edges:
        a, b = inst.edges[ei]
        nbrs.setdefault(a, []).append((b, ei))
        nbrs.setdefault(b, []).append((a, ei))
    up = {root: up0}
    down = {root: down0}
    tree = []
    queue = deque([root])
    while queue:
        p = queue.popleft()
        for c, ei in sorted(nbrs.get(p, [])):
            if c in up:
                continue
            t = edge_transfer(inst, ei, p)
            if t.singular:
                raise SingularTransferError(f"edge {ei} {inst.edges[ei]} has a singular transfer matrix", ei)
            u, d = t.matrix @ up[p], t.matrix @ down[p]
            up[c] = u / np.linalg.norm(u)
            down[c] = d / np.linalg.norm(d)
            tree.append((p, c, ei))
            queue.append(c)
    return TransferBasis(root, sorted(up), up, down, tree)


def build_transfer_basis(inst: QsatInstance, root: int = 0, root_basis=None) -> TransferBasis:
    """Propagate a basis pair from ``root`` through its (tree) component."""
    if inst.k != 2:
        raise ArityError("transfer bases need k=2")
    qubits, edges = _component_of(inst, root)
    if len(edges) != len(qubits) - 1:
        raise ValidationError(f"component of qubit {root} is not a tree ({len(edges)} edges, {len(qubits)} qubits)")
    if root_basis is None:
        up0, down0 = np.array([1, 0], dtype=np.complex128), np.array([0, 1], dtype=np.complex128)
    else:
        up0, down0 = (np.asarray(v, dtype=np.complex128) for v in root_basis)
        up0, down0 = up0 / np.linalg.norm(up0), down0 / np.linalg.norm(down0)
        if abs(np.linalg.det(np.stack([up0, down0]))) < 1e-10:
            raise ValidationError("root basis vectors must be linearly independent")
    return _transfer_along(inst, root, up0, down0, edges)


@dataclass(frozen=True)
class LoopBasis:
    lambda_up: complex
    lambda_down: complex
    loop_matrix: np.ndarray
    cycle: list[int]
    basis: TransferBasis


def _loop_cycle(inst: QsatInstance, edges: list[int], base: int) -> list[tuple[int, int]]:
    """Cycle of the single-loop component as (qubit, edge-to-next) from base."""
    core = hypercore(inst.graph.subgraph(edges))
    ring = [edges[i] for i in core.core_edges]
    nbrs: dict[int, list[tuple[int, int]]] = {}
    for ei in ring:
        a, b = inst.edges[ei]
        nbrs.setdefault(a, []).append((b, ei))
        nbrs.setdefault(b, []).append((a, ei))
    if base not in nbrs:
        raise ValidationError(f"qubit {base} is not on the loop")
    walk = []
    prev_edge = None
    q = base
    while True:
        nxt, ei = min(x for x in nbrs[q] if x[1] != prev_edge)
        walk.append((q, ei))
        prev_edge, q = ei, nxt
        if q == base:
            return walk


def loop_eigenbasis(inst: QsatInstance, base: int) -> LoopBasis:
    """Eigenbasis of the loop transfer product at ``base``, transferred to the
    whole single-loop component (all-up and all-down both satisfy it)."""
    if inst.k != 2:
        raise ArityError("loop transfer needs k=2")
    qubits, edges = _component_of(inst, base)
    if len(edges) != len(qubits):
        raise ValidationError(f"component of qubit {base} is not single-loop ({len(edges)} edges, {len(qubits)} qubits)")
    walk = _loop_cycle(inst, edges, base)
    p = np.eye(2, dtype=np.complex128)
    for q, ei in walk:
        t = edge_transfer(inst, ei, q)
        if t.singular:
            raise SingularTransferError(f"edge {ei} {inst.edges[ei]} has a singular transfer matrix", ei)
        p = t.matrix @ p
    vals, vecs = np.linalg.eig(p)
    if abs(vals[0] - vals[1]) <= DEGENERATE_LOOP_TOL * max(abs(vals[0]), abs(vals[1]), 1e-300):
        raise DegenerateLoopError(f"loop eigenvalues coincide ({vals[0]:.6g}, {vals[1]:.6g})")
    order = sorted(range(2), key=lambda i: (-abs(vals[i]), np.angle(vals[i])))
    lam = [complex(vals[i]) for i in order]
    vec = [vecs[:, i] / np.linalg.norm(vecs[:, i]) for i in order]
    closing = walk[-1][1]
    tree_edges = [ei for ei in edges if ei != closing]
    basis = _transfer_along(inst, base, vec[0], vec[1], tree_edges)
    return LoopBasis(lam[0], lam[1], p, [q for q, _ in walk], basis)


def lift_product_state(inst: QsatInstance, core_state: ProductState | None = None) -> ProductState:
    """Satisfying product state obtained by re-adding stripped leaf edges.

    Edges come back in reverse stripping order; the leaf qubit that licensed
    each removal is solved with the k-1 -> 1 transfer, other not-yet-set
    qubits of that edge are fixed to |0>.
    """
    if inst.r != 1:
        raise RankError("product-state lifting needs rank-1 projectors")
    hc = hypercore(inst.graph)
    f = np.zeros((inst.n, 2), dtype=np.complex128)
    f[:, 0] = 1.0
    assigned: set[int] = set()
    if not hc.empty:
        if core_state is None:
            raise ValidationError("hypercore is non-empty; a satisfying core product state is required")
        if core_state.n != inst.n:
            raise ValidationError(f"core state has {core_state.n} qubits, instance has {inst.n}")
        res = verify_state(inst.restrict(hc.core_edges), core_state)
        if res >= CORE_RESIDUAL_TOL:
            raise ValidationError(f"core state does not satisfy the hypercore (residual {res:.3g})")
        for q in hc.qubits:
            f[q] = core_state.factors[q]
            assigned.add(q)
    for ei, leaf in zip(reversed(hc.removed), reversed(hc.leaves)):
        e = inst.edges[ei]
        for q in e:
            if q not in assigned and q != leaf:
                assigned.add(q)  # stays |0>
        pos = e.index(leaf)
        fixed = [f[q] for q in e if q != leaf]
        try:
            f[leaf] = generalized_transfer(inst.phis[ei, 0], fixed, pos)
        except DegenerateTransferError as exc:
            raise DegenerateTransferError(f"edge {ei} {e}: {exc}", ei) from None
        assigned.add(leaf)
    return ProductState(f)


def _angles_to_factors(x: np.ndarray) -> np.ndarray:
    theta, phase = x[0::2], x[1::2]
    return np.stack([np.cos(theta), np.exp(1j * phase) * np.sin(theta)], axis=1)


def core_product_state(
    inst: QsatInstance, restarts: int = 20, seed: int = 0, tol: float = CORE_RESIDUAL_TOL
) -> ProductState | None:
    """Satisfying product state on the hypercore by nonlinear least squares.

    Each core qubit is parametrised as (cos t, e^{ip} sin t); the residuals
    are the overlaps <phi_e|psi_a ... psi_k>. Returns a full-length product
    state (|0> off the core) whose core residual is below ``tol``, or None
    when no restart converges.
    """
    from scipy.optimize import least_squares

    from .rng import make_rng

    if inst.r != 1:
        raise RankError("product states need rank-1 projectors")
    hc = hypercore(inst.graph)
    f = np.zeros((inst.n, 2), dtype=np.complex128)
    f[:, 0] = 1.0
    if hc.empty:
        return ProductState(f)
    core = inst.restrict(hc.core_edges)
    qubits = hc.qubits
    pos = {q: i for i, q in enumerate(qubits)}
    slots = np.array([[pos[q] for q in e] for e in core.edges])
    phis = core.phis[:, 0].conj().reshape((core.m,) + (2,) * inst.k)

    def overlaps(x):
        v = _angles_to_factors(x)
        t = phis
        for j in range(inst.k - 1, -1, -1):
            t = np.einsum("m...a,ma->m...", t, v[slots[:, j]])
        return t

    def resid(x):
        t = overlaps(x)
        return np.concatenate([t.real, t.imag])

    rng = make_rng(seed, 0xC0DE)
    method = "lm" if core.m >= len(qubits) else "trf"
    for _ in range(restarts):
        x0 = np.column_stack([rng.uniform(0, np.pi / 2, len(qubits)), rng.uniform(0, 2 * np.pi, len(qubits))]).ravel()
        sol = least_squares(resid, x0, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        f[qubits] = _angles_to_factors(sol.x)
        state = ProductState(f)
        if verify_state(core, state) < tol:
            return state
    return None
