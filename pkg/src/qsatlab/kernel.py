"""Exact kernel dimension and ground-state energy of QSAT Hamiltonians.

The kernel is tracked incrementally as projectors are added one at a time.
Qubits that no projector has touched yet contribute a free factor of 2 each,
and clusters of touched qubits that are not yet linked by any projector are
kept as separate tensor factors, so the dense bases stay small until the
constraint graph actually connects them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import CapExceededError, ValidationError
from .instance import ProductState, QsatInstance, apply_h, dense_hamiltonian
from .rng import make_rng

log = logging.getLogger(__name__)

KERNEL_CAP = 16
ENERGY_CAP = 20
MAX_BASIS_ENTRIES = 2**26
LOW_MARGIN = 10.0
DENSE_ENERGY_MAX_N = 9


@dataclass
class KernelReport:
    n: int
    D: int
    trajectory: list[int]
    tol_factor: float
    margin: float  # min over steps of (smallest nonzero sv) / (largest zero sv or threshold)
    step_margins: list[float]
    order: list[int]
    flagged_steps: list[int] = field(default_factory=list)
    basis: np.ndarray | None = None

    @property
    def low_margin(self) -> bool:
        return bool(self.flagged_steps)

    def to_dict(self, include_basis: bool = False) -> dict:
        def fin(x: float):
            return None if math.isinf(x) else float(x)

        d = {
            "n": self.n,
            "D": self.D,
            "trajectory": self.trajectory,
            "tol_factor": self.tol_factor,
            "margin": fin(self.margin),
            "step_margins": [fin(x) for x in self.step_margins],
            "order": self.order,
            "flagged_steps": self.flagged_steps,
        }
        if include_basis and self.basis is not None:
            d["basis"] = [[[float(a.real), float(a.imag)] for a in col] for col in self.basis.T]
        return d


def null_space_step(a: np.ndarray, tol_factor: float = 100.0) -> tuple[np.ndarray, float]:
    """Orthonormal basis of ker(a) (as columns) and the singular-value margin.

    Singular values at or below tol_factor * s_max * eps * max(a.shape)
    count as zero.
    """
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=a.dtype), math.inf
    full = rows < cols
    try:
        _, s, vh = sla.svd(a, full_matrices=full, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        _, s, vh = sla.svd(a, full_matrices=full, lapack_driver="gesvd", check_finite=False)
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        return np.eye(cols, dtype=a.dtype), math.inf
    thresh = tol_factor * smax * np.finfo(float).eps * max(rows, cols)
    rank = int(np.sum(s > thresh))
    zeros = s[rank:]
    denom = max(float(zeros.max()) if len(zeros) else 0.0, thresh)
    margin = float(s[rank - 1] / denom)
    return vh[rank:].conj().T, margin


class _Cluster:
    __slots__ = ("qubits", "basis")

    def __init__(self, qubits: list[int], basis: np.ndarray):
        self.qubits = qubits
        self.basis = basis


def _identity_on(nq: int) -> np.ndarray:
    return np.eye(2**nq, dtype=np.complex128)


def kernel_dimension(
    inst: QsatInstance,
    tol_factor: float = 100.0,
    order: Sequence[int] | None = None,
    cap: int = KERNEL_CAP,
    return_basis: bool = False,
) -> KernelReport:
    """dim ker(H), adding projectors in ``order`` (default: edge order).

    For each projector the current kernel basis is contracted against the
    frame vectors on the projector's qubits; the null space of that
    constraint matrix (by SVD) gives the surviving combinations.
    """
    if inst.n > cap:
        raise CapExceededError(f"kernel_dimension is capped at n <= {cap} (got n={inst.n})")
    order = list(range(inst.m)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(inst.m)):
        raise ValidationError("order must be a permutation of the edge indices")

    k, r = inst.k, inst.r
    owner: dict[int, _Cluster] = {}
    untouched = inst.n
    clusters: list[_Cluster] = []
    traj = [2**inst.n]
    margins: list[float] = []
    flagged: list[int] = []
    dead = False

    for step, ei in enumerate(order):
        if dead:
            traj.append(0)
            margins.append(math.inf)
            continue
        e = inst.edges[ei]
        touching: list[_Cluster] = []
        for q in e:
            c = owner.get(q)
            if c is not None and all(c is not t for t in touching):
                touching.append(c)
        fresh = [q for q in e if q not in owner]

        if touching:
            qubits = list(touching[0].qubits)
            basis = touching[0].basis
            for c in touching[1:]:
                qubits += c.qubits
                basis = _kron_checked(basis, c.basis)
        else:
            qubits, basis = [], np.ones((1, 1), dtype=np.complex128)
        if fresh:
            qubits += fresh
            basis = _kron_checked(basis, _identity_on(len(fresh)))
        untouched -= len(fresh)

        nq = len(qubits)
        d_in = basis.shape[1]
        pos = [qubits.index(q) for q in e]
        t = basis.reshape((2,) * nq + (d_in,))
        t = np.moveaxis(t, pos, list(range(k))).reshape(2**k, -1)
        a = (inst.phis[ei].conj() @ t).reshape(r * 2 ** (nq - k), d_in)
        c, margin = null_space_step(a, tol_factor)
        margins.append(margin)
        if margin < LOW_MARGIN:
            flagged.append(step)
            log.warning("low singular-value margin %.3g at step %d (edge %d)", margin, step, ei)
        merged = _Cluster(qubits, basis @ c)

        clusters = [cl for cl in clusters if all(cl is not t for t in touching)]
        clusters.append(merged)
        for q in qubits:
            owner[q] = merged

        dims = [cl.basis.shape[1] for cl in clusters]
        if 0 in dims:
            dead = True
            traj.append(0)
        else:
            traj.append(math.prod(dims) * 2**untouched)

    basis = None
    if return_basis:
        basis = _global_basis(inst.n, clusters, owner, dead)
    return KernelReport(
        n=inst.n,
        D=traj[-1],
        trajectory=traj,
        tol_factor=tol_factor,
        margin=min(margins, default=math.inf),
        step_margins=margins,
        order=order,
        flagged_steps=flagged,
        basis=basis,
    )


def _kron_checked(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    size = a.shape[0] * b.shape[0] * a.shape[1] * b.shape[1]
    if size > MAX_BASIS_ENTRIES:
        raise CapExceededError(
            f"kernel basis would hold {size} amplitudes (limit {MAX_BASIS_ENTRIES}); instance too large for exact solve"
        )
    return np.kron(a, b)


def _global_basis(n: int, clusters: list[_Cluster], owner: dict, dead: bool) -> np.ndarray:
    if dead:
        return np.zeros((2**n, 0), dtype=np.complex128)
    qubits: list[int] = []
    basis = np.ones((1, 1), dtype=np.complex128)
    for cl in clusters:
        qubits += cl.qubits
        basis = _kron_checked(basis, cl.basis)
    rest = [q for q in range(n) if q not in owner]
    if rest:
        qubits += rest
        basis = _kron_checked(basis, _identity_on(len(rest)))
    d = basis.shape[1]
    t = basis.reshape((2,) * n + (d,))
    # axis j of t holds qubit qubits[j]; bring qubit 0 first
    t = np.transpose(t, [qubits.index(q) for q in range(n)] + [n])
    return np.ascontiguousarray(t.reshape(2**n, d))


@dataclass
class EnergyReport:
    E0: float
    residual: float
    iterations: int
    converged: bool
    method: str
    state: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "E0": self.E0,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
        }


def ground_state_energy(
    inst: QsatInstance,
    tol: float = 1e-12,
    max_iter: int | None = None,
    cap: int = ENERGY_CAP,
    keep_state: bool = False,
) -> EnergyReport:
    """Smallest eigenvalue of H.

    Dense diagonalisation for n <= 9, otherwise Lanczos (ARPACK) on the
    shifted operator M - H, whose top eigenvalue is M - E0.
    """
    if inst.n > cap:
        raise CapExceededError(f"ground_state_energy is capped at n <= {cap} (got n={inst.n})")
    dim = 2**inst.n
    if inst.m == 0:
        psi = np.zeros(dim, dtype=np.complex128)
        psi[0] = 1.0
        return EnergyReport(0.0, 0.0, 0, True, "trivial", psi if keep_state else None)
    if inst.n <= DENSE_ENERGY_MAX_N:
        h = dense_hamiltonian(inst)
        w, v = np.linalg.eigh(h)
        psi = v[:, 0]
        res = float(np.linalg.norm(h @ psi - w[0] * psi))
        return EnergyReport(float(w[0]), res, 1, True, "dense", psi if keep_state else None)

    shift = float(inst.m)
    counter = {"n": 0}

    def matvec(x):
        counter["n"] += 1
        x = np.asarray(x).reshape(dim)
        return shift * x - apply_h(inst, x)

    op = LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)
    rng = make_rng(inst.seed, 0x5EED)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    converged = True
    try:
        vals, vecs = eigsh(op, k=1, which="LA", tol=tol, maxiter=max_iter, v0=v0)
    except ArpackNoConvergence as exc:
        converged = False
        if len(exc.eigenvalues):
            vals, vecs = exc.eigenvalues, exc.eigenvectors
        else:
            return EnergyReport(math.nan, math.inf, counter["n"], False, "lanczos")
    psi = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    e0 = float(np.vdot(psi, apply_h(inst, psi)).real)
    res = float(np.linalg.norm(apply_h(inst, psi) - e0 * psi))
    return EnergyReport(e0, res, counter["n"], converged, "lanczos", psi if keep_state else None)


def verify_state(inst: QsatInstance, state) -> float:
    """<psi|H|psi> / <psi|psi> for a dense state or a ProductState.

    Product states are checked edge by edge without forming 2**n amplitudes.
    """
    if isinstance(state, ProductState):
        if state.n != inst.n:
            raise ValidationError(f"product state has {state.n} qubits, instance has {inst.n}")
        total = 0.0
        for i, e in enumerate(inst.edges):
            v = state.factors[e[0]]
            for q in e[1:]:
                v = np.kron(v, state.factors[q])
            total += float(np.sum(np.abs(inst.phis[i].conj() @ v) ** 2))
        return total
    psi = np.asarray(state, dtype=np.complex128)
    if psi.shape != (2**inst.n,):
        raise ValidationError(f"state has shape {psi.shape}, expected ({2**inst.n},)")
    norm2 = float(np.vdot(psi, psi).real)
    if norm2 == 0.0:
        raise ValidationError("cannot verify a zero-norm state")
    return float(np.vdot(psi, apply_h(inst, psi)).real) / norm2


@dataclass
class WeakBoundCheck:
    violations: list[dict]
    final_ok: bool
    final_bound_log2: float

    @property
    def ok(self) -> bool:
        return self.final_ok and not self.violations


def check_weak_bound(report: KernelReport, k: int, r: int) -> WeakBoundCheck:
    """Stepwise D_{m+1} <= D_m (1 - r/2^k) (+1/2 rounding guard) and the
    cumulative D_M <= 2^N (1 - r/2^k)^M, all in exact integer arithmetic."""
    q = 2**k
    violations = []
    traj = report.trajectory
    for m in range(len(traj) - 1):
        lhs = q * traj[m + 1]
        rhs = traj[m] * (q - r) + q // 2
        if lhs > rhs:
            violations.append({"step": m, "D_prev": traj[m], "D_next": traj[m + 1], "bound": traj[m] * (q - r) / q})
    steps = len(traj) - 1
    final_ok = traj[-1] * q**steps <= 2**report.n * (q - r) ** steps
    from .bounds import weak_dim_bound

    return WeakBoundCheck(violations, final_ok, weak_dim_bound(report.n, steps, k, r))
