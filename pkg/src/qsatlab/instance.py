"""QSAT instances: a hypergraph plus one rank-r projector frame per edge.

State convention: a state on n qubits is a length-2**n complex vector whose
index bits are the qubit values with qubit 0 most significant. A frame
vector on edge (q1 < ... < qk) is indexed the same way, q1 most
significant, so for k=2 the components are (phi_00, phi_01, phi_10, phi_11).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RankError, ValidationError
from .hypergraph import Hypergraph
from .rng import make_rng

log = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-12
FILE_ORTHONORMAL_TOL = 1e-10
_DEGENERATE_DRAW = 1e-8


@dataclass(frozen=True)
class ProjectorFrame:
    edge_index: int
    vectors: np.ndarray  # shape (r, 2**k), rows orthonormal

    @property
    def rank(self) -> int:
        return self.vectors.shape[0]

    def projector(self) -> np.ndarray:
        return self.vectors.T @ self.vectors.conj()


def orthonormality_residual(vectors: np.ndarray) -> float:
    gram = vectors.conj() @ vectors.T
    return float(np.max(np.abs(gram - np.eye(len(vectors)))))


def sample_frame(k: int, r: int, rng: np.random.Generator, edge_index: int = 0) -> ProjectorFrame:
    """Haar-random orthonormal r-frame in C^(2^k) (Gaussian + QR)."""
    dim = 2**k
    if not 1 <= r <= dim:
        raise RankError(f"rank r must lie in [1, {dim}] for k={k}, got {r}")
    while True:
        z = (rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))) / np.sqrt(2.0)
        q, rr = np.linalg.qr(z)
        diag = np.diagonal(rr)
        if np.min(np.abs(diag)) > _DEGENERATE_DRAW:
            break
        log.warning("re-drawing numerically rank-deficient Gaussian frame (edge %d)", edge_index)
    q = q * (diag / np.abs(diag))
    return ProjectorFrame(edge_index, np.ascontiguousarray(q.T))


@dataclass(frozen=True)
class QsatInstance:
    graph: Hypergraph
    r: int
    phis: np.ndarray  # shape (M, r, 2**k)
    seed: int = 0

    def __post_init__(self):
        dim = 2**self.graph.k
        if not 1 <= self.r <= dim:
            raise RankError(f"rank r must lie in [1, {dim}], got {self.r}")
        phis = np.asarray(self.phis, dtype=np.complex128).reshape(self.graph.m, self.r, dim)
        phis.setflags(write=False)
        object.__setattr__(self, "phis", phis)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def k(self) -> int:
        return self.graph.k

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def edges(self):
        return self.graph.edges

    def frame(self, i: int) -> ProjectorFrame:
        return ProjectorFrame(i, self.phis[i])

    def restrict(self, edge_indices: Sequence[int]) -> "QsatInstance":
        idx = list(edge_indices)
        return QsatInstance(self.graph.subgraph(idx), self.r, self.phis[idx], self.seed)

    def to_dict(self) -> dict:
        frames = [
            [[[float(a.real), float(a.imag)] for a in vec] for vec in frame]
            for frame in self.phis
        ]
        return {
            "n": self.n,
            "k": self.k,
            "r": self.r,
            "seed": self.seed,
            "graph_seed": self.graph.seed,
            "edges": [list(e) for e in self.edges],
            "frames": frames,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QsatInstance":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"instance file: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "QsatInstance":
        for key in ("n", "k", "r", "edges", "frames"):
            if key not in d:
                raise ValidationError(f"instance file: missing field {key!r}")
        n, k, r = d["n"], d["k"], d["r"]
        for key, val in (("n", n), ("k", k), ("r", r)):
            if not isinstance(val, int) or isinstance(val, bool):
                raise ValidationError(f"instance file: field {key!r} must be an integer")
        edges = d["edges"]
        frames = d["frames"]
        if not isinstance(edges, list) or not isinstance(frames, list):
            raise ValidationError("instance file: 'edges' and 'frames' must be lists")
        if len(frames) != len(edges):
            raise ValidationError(f"instance file: {len(edges)} edges but {len(frames)} frames")
        # keep file order for the frame lookup, then canonicalise
        for i, e in enumerate(edges):
            if not isinstance(e, list) or e != sorted(e):
                raise ValidationError(f"instance file: edges[{i}] must be a sorted list of qubit indices")
        seen = set()
        for i, e in enumerate(edges):
            if tuple(e) in seen:
                raise ValidationError(f"instance file: edges[{i}] duplicates an earlier edge {e}")
            seen.add(tuple(e))
        g = Hypergraph(n, k, tuple(tuple(e) for e in edges), int(d.get("graph_seed", d.get("seed", 0))))
        dim = 2**k
        arr = np.empty((len(edges), r, dim), dtype=np.complex128)
        for i, frame in enumerate(frames):
            if not isinstance(frame, list) or len(frame) != r:
                raise ValidationError(f"instance file: frames[{i}] must hold r={r} vectors")
            for a, vec in enumerate(frame):
                if not isinstance(vec, list) or len(vec) != dim:
                    raise ValidationError(f"instance file: frames[{i}][{a}] must hold {dim} amplitudes")
                for j, amp in enumerate(vec):
                    if (
                        not isinstance(amp, list)
                        or len(amp) != 2
                        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in amp)
                    ):
                        raise ValidationError(f"instance file: frames[{i}][{a}][{j}] must be [re, im]")
                    arr[i, a, j] = complex(amp[0], amp[1])
            if not np.all(np.isfinite(arr[i])):
                raise ValidationError(f"instance file: frames[{i}] has non-finite amplitudes")
            res = orthonormality_residual(arr[i])
            if res > FILE_ORTHONORMAL_TOL:
                raise ValidationError(f"instance file: frames[{i}] is not orthonormal (residual {res:.3g})")
        order = sorted(range(len(edges)), key=lambda i: tuple(edges[i]))
        return cls(g, r, arr[order], int(d.get("seed", 0)))


def build_instance(g: Hypergraph, r: int = 1, seed: int = 0) -> QsatInstance:
    """Independent Haar frame on every edge; edge i draws from stream (seed, i)."""
    dim = 2**g.k
    if not 1 <= r <= dim:
        raise RankError(f"rank r must lie in [1, {dim}] for k={g.k}, got {r}")
    phis = np.empty((g.m, r, dim), dtype=np.complex128)
    for i in range(g.m):
        phis[i] = sample_frame(g.k, r, make_rng(seed, i), edge_index=i).vectors
    return QsatInstance(g, r, phis, seed)


def classical_diagonal_instance(g: Hypergraph, clauses: Sequence[str | int]) -> QsatInstance:
    """Rank-1 instance whose frame on each edge is the forbidden basis state.

    A clause is a k-character bit string in edge-tuple order, or the
    corresponding integer index.
    """
    if len(clauses) != g.m:
        raise ValidationError(f"need one clause per edge: {g.m} edges, {len(clauses)} clauses")
    dim = 2**g.k
    phis = np.zeros((g.m, 1, dim), dtype=np.complex128)
    for i, c in enumerate(clauses):
        if isinstance(c, str):
            if len(c) != g.k or set(c) - {"0", "1"}:
                raise ValidationError(f"clause {i} must be a {g.k}-bit string, got {c!r}")
            idx = int(c, 2)
        else:
            idx = int(c)
            if not 0 <= idx < dim:
                raise ValidationError(f"clause {i} index {idx} outside [0, {dim})")
        phis[i, 0, idx] = 1.0
    return QsatInstance(g, 1, phis, 0)


def _check_state(inst: QsatInstance, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape[0] != 2**inst.n:
        raise ValidationError(f"state has {psi.shape[0]} amplitudes, instance needs 2**{inst.n}")
    return psi


def apply_projector(inst: QsatInstance, i: int, psi: np.ndarray) -> np.ndarray:
    """Pi_i applied to a state (or to the columns of a (2**n, b) block)."""
    psi = _check_state(inst, psi)
    return _apply_edges(inst, psi, [i])


def apply_h(inst: QsatInstance, psi: np.ndarray) -> np.ndarray:
    """H|psi> = sum of edge projectors, without forming H."""
    psi = _check_state(inst, psi)
    return _apply_edges(inst, psi, range(inst.m))


def _apply_edges(inst: QsatInstance, psi: np.ndarray, which) -> np.ndarray:
    n, k = inst.n, inst.k
    batch = psi.shape[1:]
    x = psi.reshape((2,) * n + (-1,))
    out = np.zeros_like(x)
    front = list(range(k))
    for i in which:
        e = list(inst.edges[i])
        f = inst.phis[i]  # (r, 2**k)
        y = np.moveaxis(x, e, front)
        flat = y.reshape(2**k, -1)
        z = (f.T @ (f.conj() @ flat)).reshape(y.shape)
        out += np.moveaxis(z, front, e)
    return out.reshape((2**n,) + batch)


def dense_hamiltonian(inst: QsatInstance) -> np.ndarray:
    """Explicit 2**n x 2**n matrix (small n only)."""
    if inst.n > 12:
        raise ValidationError("dense Hamiltonian limited to n <= 12")
    return apply_h(inst, np.eye(2**inst.n, dtype=np.complex128))


def expectation(inst: QsatInstance, psi: np.ndarray) -> float:
    psi = _check_state(inst, psi)
    return float(np.vdot(psi, apply_h(inst, psi)).real)


@dataclass(frozen=True)
class ProductState:
    factors: np.ndarray  # shape (n, 2), each row unit norm

    def __post_init__(self):
        f = np.array(self.factors, dtype=np.complex128).reshape(-1, 2)
        norms = np.linalg.norm(f, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(f)):
            raise ValidationError("product state factors must be finite and nonzero")
        # leave unit factors untouched so serialisation round-trips exactly
        scale = np.where(np.abs(norms - 1.0) > 4 * np.finfo(float).eps, norms, 1.0)
        f = f / scale[:, None]
        f.setflags(write=False)
        object.__setattr__(self, "factors", f)

    @property
    def n(self) -> int:
        return len(self.factors)

    @classmethod
    def computational_zero(cls, n: int) -> "ProductState":
        f = np.zeros((n, 2), dtype=np.complex128)
        f[:, 0] = 1.0
        return cls(f)

    def amplitudes(self) -> np.ndarray:
        out = np.ones(1, dtype=np.complex128)
        for v in self.factors:
            out = np.kron(out, v)
        return out

    def to_list(self) -> list:
        return [[[float(a.real), float(a.imag)] for a in v] for v in self.factors]

    @classmethod
    def from_list(cls, data) -> "ProductState":
        try:
            arr = np.array([[complex(a[0], a[1]) for a in v] for v in data], dtype=np.complex128)
        except (TypeError, IndexError, ValueError) as exc:
            raise ValidationError(f"product state: expected [[re, im], [re, im]] per qubit ({exc})") from None
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError("product state: each qubit needs exactly two amplitudes")
        return cls(arr)
