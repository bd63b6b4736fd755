"""Monte Carlo drivers over the random QSAT ensemble.

Every trial draws from its own stream keyed by (seed, alpha index, trial
index, purpose), so results are independent of worker count and of the
order in which trials finish; aggregation walks trials by index.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special, stats

from .bounds import CountingQuery, edge_probability, expected_subgraph_count, figure_eight_automorphisms
from .hypergraph import (
    Hypergraph,
    count_figure_eights,
    figure_eight_graph,
    graph_stats,
    sample_hypergraph,
    thresholds,
)
from .instance import build_instance, classical_diagonal_instance
from .kernel import ENERGY_CAP, KERNEL_CAP, ground_state_energy, kernel_dimension
from .rng import derive_seed

GRAPH, FRAMES = 0, 1
ZERO_ENERGY = 1e-8

CSV_COLUMNS = [
    "k", "r", "alpha", "n", "trials", "seed",
    "p_empty_core", "p_excess_le1", "giant_frac", "p_sat", "mean_D", "mean_E0", "var_E0",
]


def default_threads() -> int:
    env = os.environ.get("QSATLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_indexed(fn: Callable, tasks: Sequence, threads: int | None = None) -> list:
    """fn over tasks on a thread pool; results come back in task order."""
    threads = default_threads() if threads is None else max(1, threads)
    if threads == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def parse_grid(spec: str) -> list[float]:
    """``min:max:step`` (endpoints inclusive within half a step) or a comma list."""
    if ":" in spec:
        parts = [float(x) for x in spec.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"grid must be min:max:step with positive step, got {spec!r}")
        lo, hi, step = parts
        count = int(math.floor((hi - lo) / step + 0.5)) + 1
        return [round(lo + i * step, 12) for i in range(max(count, 0))]
    return [float(x) for x in spec.split(",") if x.strip()]


@dataclass
class ScanTrial:
    empty_core: bool
    excess_le1: bool | None
    giant_frac: float
    D: int | None = None
    E0: float | None = None
    margin: float | None = None
    degenerate: bool = False


@dataclass
class ScanRow:
    k: int
    r: int
    alpha: float
    n: int
    trials: int
    seed: int
    p_empty_core: float
    p_excess_le1: float | None
    giant_frac: float
    p_sat: float | None = None
    mean_D: float | None = None
    median_D: float | None = None
    mean_E0: float | None = None
    var_E0: float | None = None
    graph_agreement: float | None = None  # k=2: fraction where D>0 matches the graph criterion
    sat_flags: list[bool] = field(default_factory=list, repr=False)

    def csv_values(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(x)

        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _scan_trial(task) -> ScanTrial:
    k, r, alpha, n, seed, ai, t, quantum, energy, tol_factor = task
    g = sample_hypergraph(n, k, alpha, "poisson", derive_seed(seed, ai, t, GRAPH))
    gs = graph_stats(g)
    out = ScanTrial(
        empty_core=gs.hypercore_edges == 0,
        excess_le1=(gs.max_excess is None or gs.max_excess <= 1) if k == 2 else None,
        giant_frac=gs.giant_fraction,
    )
    if quantum:
        inst = build_instance(g, r, derive_seed(seed, ai, t, FRAMES))
        rep = kernel_dimension(inst, tol_factor)
        out.D, out.margin = rep.D, rep.margin
        if energy:
            out.E0 = ground_state_energy(inst).E0
    return out


def scan(
    k: int,
    r: int,
    alpha_grid: Sequence[float],
    n: int,
    trials: int,
    seed: int,
    quantum_cap: int = KERNEL_CAP,
    energy: bool = True,
    energy_cap: int = 12,
    tol_factor: float = 100.0,
    threads: int | None = None,
) -> list[ScanRow]:
    """One ScanRow per density; quantum statistics only when n <= quantum_cap."""
    if not alpha_grid:
        raise ValueError("alpha grid is empty")
    if trials <= 0:
        raise ValueError("trials must be positive")
    quantum = n <= quantum_cap
    energy = energy and quantum and n <= min(energy_cap, ENERGY_CAP)
    tasks = [
        (k, r, float(a), n, seed, ai, t, quantum, energy, tol_factor)
        for ai, a in enumerate(alpha_grid)
        for t in range(trials)
    ]
    results = run_indexed(_scan_trial, tasks, threads)
    rows = []
    for ai, a in enumerate(alpha_grid):
        chunk = results[ai * trials : (ai + 1) * trials]
        row = ScanRow(
            k=k,
            r=r,
            alpha=float(a),
            n=n,
            trials=trials,
            seed=seed,
            p_empty_core=float(np.mean([c.empty_core for c in chunk])),
            p_excess_le1=float(np.mean([c.excess_le1 for c in chunk])) if k == 2 else None,
            giant_frac=float(np.mean([c.giant_frac for c in chunk])),
        )
        if quantum:
            ds = np.array([c.D for c in chunk], dtype=float)
            row.sat_flags = [c.D > 0 for c in chunk]
            row.p_sat = float(np.mean(row.sat_flags))
            row.mean_D = float(ds.mean())
            row.median_D = float(np.median(ds))
            if k == 2:
                row.graph_agreement = float(np.mean([(c.D > 0) == c.excess_le1 for c in chunk]))
            if energy:
                es = np.array([c.E0 for c in chunk])
                row.mean_E0 = float(es.mean())
                row.var_E0 = float(es.var())
        rows.append(row)
    return rows


def scan_csv(rows: Sequence[ScanRow], config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(row.csv_values())
    return buf.getvalue()


def crossing_point(alphas: Sequence[float], p_sat: Sequence[float]) -> float | None:
    """First alpha where P[SAT] falls through 1/2, by linear interpolation."""
    for i in range(len(alphas) - 1):
        a0, a1, p0, p1 = alphas[i], alphas[i + 1], p_sat[i], p_sat[i + 1]
        if p0 >= 0.5 > p1:
            return a0 + (p0 - 0.5) * (a1 - a0) / (p0 - p1)
    return None


def crossing_slope(alphas: Sequence[float], p_sat: Sequence[float]) -> float | None:
    """-dP/dalpha on the segment containing the crossing."""
    for i in range(len(alphas) - 1):
        if p_sat[i] >= 0.5 > p_sat[i + 1]:
            return (p_sat[i] - p_sat[i + 1]) / (alphas[i + 1] - alphas[i])
    return None


def bootstrap_crossing(rows: Sequence[ScanRow], n_boot: int = 200, seed: int = 0) -> tuple[float | None, float]:
    """Crossing point and its bootstrap standard error (trials resampled per alpha)."""
    alphas = [row.alpha for row in rows]
    point = crossing_point(alphas, [row.p_sat for row in rows])
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0xB007)))
    flags = [np.asarray(row.sat_flags, dtype=float) for row in rows]
    reps = []
    for _ in range(n_boot):
        ps = [float(f[rng.integers(0, len(f), len(f))].mean()) for f in flags]
        c = crossing_point(alphas, ps)
        if c is not None:
            reps.append(c)
    err = float(np.std(reps, ddof=1)) if len(reps) > 1 else math.nan
    return point, err


@dataclass(frozen=True)
class TransitionFit:
    center: float  # alpha where the fitted P[SAT] equals 1/2
    width: float
    slope: float  # -dP/dalpha at the center, 1 / (4 width)


def fit_transition(rows: Sequence[ScanRow]) -> TransitionFit:
    """Maximum-likelihood logistic P[SAT](alpha) = 1 / (1 + exp((alpha - c) / w))."""
    alphas = np.array([row.alpha for row in rows])
    sat = np.array([sum(row.sat_flags) for row in rows], dtype=float)
    tot = np.array([len(row.sat_flags) for row in rows], dtype=float)
    if tot.min() == 0:
        raise ValueError("transition fit needs per-trial SAT flags on every row")

    def nll(x):
        z = -(alphas - x[0]) / np.exp(x[1])
        return -float(np.sum(sat * special.log_expit(z) + (tot - sat) * special.log_expit(-z)))

    c0 = crossing_point(alphas, sat / tot)
    x0 = [float(np.median(alphas)) if c0 is None else c0, math.log(0.1)]
    res = optimize.minimize(nll, x0, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000})
    c, w = float(res.x[0]), float(np.exp(res.x[1]))
    return TransitionFit(c, w, 1.0 / (4.0 * w))


@dataclass(frozen=True)
class EnergyEnvelope:
    alpha_gc: float
    c_min: float  # smallest c with E0/n <= c (alpha - alpha_gc)^2 on every row above alpha_gc
    c_fit: float  # least-squares c
    r_squared: float
    rows_above: int


def energy_density_envelope(rows: Sequence[ScanRow]) -> EnergyEnvelope:
    """Quadratic envelope of the measured energy density E0/n above the giant threshold."""
    agc = thresholds(rows[0].k)["alpha_gc"]
    pts = [(row.alpha - agc, row.mean_E0 / row.n) for row in rows if row.mean_E0 is not None and row.alpha > agc]
    if not pts:
        raise ValueError("energy envelope needs rows with energies above alpha_gc")
    x = np.array([(a * a) for a, _ in pts])
    y = np.array([e for _, e in pts])
    c_fit = float(x @ y / (x @ x))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - c_fit * x) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return EnergyEnvelope(agc, float(np.max(y / x)), c_fit, r2, len(pts))


@dataclass
class GeometrizationReport:
    graph_seed: int
    trials: int
    counts: dict[int, int]
    modal_D: int
    modal_frequency: int
    min_margin: float
    low_margin_trials: int
    classical_D: int | None = None

    @property
    def concentrated(self) -> bool:
        return self.modal_frequency == self.trials

    def to_dict(self) -> dict:
        return {
            "graph_seed": self.graph_seed,
            "trials": self.trials,
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "modal_D": self.modal_D,
            "modal_frequency": self.modal_frequency,
            "min_margin": None if math.isinf(self.min_margin) else self.min_margin,
            "low_margin_trials": self.low_margin_trials,
            "classical_D": self.classical_D,
        }


def geometrization_trial(
    g: Hypergraph,
    r: int,
    trials: int,
    seed: int,
    tol_factor: float = 100.0,
    classical_clauses: Sequence[str] | None = None,
    threads: int | None = None,
) -> GeometrizationReport:
    """Kernel dimension of one fixed graph under repeated Haar re-draws."""

    def one(t):
        rep = kernel_dimension(build_instance(g, r, derive_seed(seed, t)), tol_factor)
        return rep.D, rep.margin

    res = run_indexed(one, list(range(trials)), threads)
    counts = Counter(d for d, _ in res)
    modal, freq = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    margins = [m for _, m in res]
    classical = None
    if classical_clauses is not None:
        classical = kernel_dimension(classical_diagonal_instance(g, classical_clauses), tol_factor).D
    return GeometrizationReport(
        graph_seed=g.seed,
        trials=trials,
        counts=dict(counts),
        modal_D=modal,
        modal_frequency=freq,
        min_margin=min(margins),
        low_margin_trials=sum(m < 10 for m in margins),
        classical_D=classical,
    )


@dataclass
class CensusRow:
    n: int
    alpha: float
    L: int
    d: int
    trials: int
    seed: int
    mean: float
    var: float
    predicted: float
    z: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def census(n: int, alpha: float, L: int, d: int, trials: int, seed: int, threads: int | None = None) -> CensusRow:
    """Observed vs expected number of (L, d) figure eights in G(n, p = alpha n / C(n,2))."""
    counts = run_indexed(
        lambda t: count_figure_eights(sample_hypergraph(n, 2, alpha, "poisson", derive_seed(seed, t)), L, d),
        list(range(trials)),
        threads,
    )
    arr = np.asarray(counts, dtype=float)
    mean = float(arr.mean())
    var = float(arr.var(ddof=1)) if trials > 1 else 0.0
    p = edge_probability(n, 2, alpha)
    predicted = expected_subgraph_count(CountingQuery(n, p, L, L + 1, figure_eight_automorphisms(L, d))) if p > 0 else 0.0
    se = math.sqrt(var / trials)
    z = (mean - predicted) / se if se > 0 else (0.0 if mean == predicted else math.inf)
    return CensusRow(n, alpha, L, d, trials, seed, mean, var, predicted, z)


@dataclass
class EnergyScaling:
    L: list[int]
    mean_E0: list[float]
    std_E0: list[float]
    min_E0: list[float]
    excluded: list[int]
    slope: float
    slope_ci: tuple[float, float]
    r_squared: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def figure_eight_energy_scaling(
    L_list: Sequence[int], trials: int, seed: int, d: int | None = None, threads: int | None = None
) -> EnergyScaling:
    """Ground-state energy of random rank-1 figure eights vs loop size, with a
    log-log least-squares fit of mean E0 against L."""
    means, stds, mins, excluded = [], [], [], []
    for L in L_list:
        g = figure_eight_graph(L, d)

        def one(t, g=g, L=L):
            rep = ground_state_energy(build_instance(g, 1, derive_seed(seed, L, t)))
            return rep.E0 if rep.converged else None

        es = [e for e in run_indexed(one, list(range(trials)), threads) if e is not None]
        excluded.append(trials - len(es))
        means.append(float(np.mean(es)))
        stds.append(float(np.std(es, ddof=1)))
        mins.append(float(np.min(es)))
    fit = stats.linregress(np.log(L_list), np.log(means))
    dof = len(L_list) - 2
    half = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else math.inf
    return EnergyScaling(
        list(L_list), means, stds, mins, excluded,
        float(fit.slope), (float(fit.slope - half), float(fit.slope + half)), float(fit.rvalue**2),
    )


@dataclass
class PromiseGapRow:
    n: int
    trials: int
    mean_E0: float
    var_E0: float
    min_E0: float
    frac_zero: float
    epsilon: float
    frac_violations: float  # ZERO_ENERGY <= E0 < epsilon(n)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def promise_gap_stats(
    k: int,
    r: int,
    alpha: float,
    n_list: Sequence[int],
    trials: int,
    seed: int,
    eps_c: float = 1.0,
    eps_a: float = 1.0,
    graph_factory: Callable[[int, int], Hypergraph] | None = None,
    threads: int | None = None,
) -> list[PromiseGapRow]:
    """E0 statistics vs n against a user promise scale eps(n) = eps_c * n^-eps_a.

    ``graph_factory(n, graph_seed)`` replaces the random ensemble with a
    fixed family (e.g. a chain probe) when given.
    """
    rows = []
    for ni, n in enumerate(n_list):

        def one(t, n=n, ni=ni):
            gseed = derive_seed(seed, ni, t, GRAPH)
            g = graph_factory(n, gseed) if graph_factory else sample_hypergraph(n, k, alpha, "poisson", gseed)
            inst = build_instance(g, r, derive_seed(seed, ni, t, FRAMES))
            return ground_state_energy(inst).E0

        es = np.array(run_indexed(one, list(range(trials)), threads))
        eps = eps_c * n ** (-eps_a)
        rows.append(
            PromiseGapRow(
                n=n,
                trials=trials,
                mean_E0=float(es.mean()),
                var_E0=float(es.var()),
                min_E0=float(es.min()),
                frac_zero=float(np.mean(es < ZERO_ENERGY)),
                epsilon=eps,
                frac_violations=float(np.mean((es >= ZERO_ENERGY) & (es < eps))),
            )
        )
    return rows


__all__ = [
    "CSV_COLUMNS",
    "CensusRow",
    "EnergyScaling",
    "EnergyEnvelope",
    "GeometrizationReport",
    "PromiseGapRow",
    "ScanRow",
    "TransitionFit",
    "bootstrap_crossing",
    "census",
    "crossing_point",
    "crossing_slope",
    "energy_density_envelope",
    "figure_eight_energy_scaling",
    "fit_transition",
    "geometrization_trial",
    "parse_grid",
    "promise_gap_stats",
    "run_indexed",
    "scan",
    "scan_csv",
]
