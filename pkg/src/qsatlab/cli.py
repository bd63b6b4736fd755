"""Command-line interface: ``qsatlab <subcommand> ...``.

Exit status is 0 on success, 1 on invalid input and 2 when a numerical
degeneracy (singular transfer, degenerate loop, zero contraction) stops a
construction. Machine-readable results go to ``--out`` (or standard output
when no file is given); a short human summary goes to standard output.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import alpha_weak_bound
from .ensemble import (
    bootstrap_crossing,
    census,
    default_threads,
    energy_density_envelope,
    figure_eight_energy_scaling,
    fit_transition,
    geometrization_trial,
    parse_grid,
    promise_gap_stats,
    scan,
    scan_csv,
)
from .errors import DegeneracyError, QsatError, ValidationError
from .hypergraph import (
    Hypergraph,
    classify_satisfiability_k2,
    connected_components,
    cyclomatic_excess,
    graph_stats,
    hypercore,
    sample_hypergraph,
    thresholds,
)
from .instance import ProductState, QsatInstance, build_instance
from .kernel import ENERGY_CAP, KERNEL_CAP, ground_state_energy, kernel_dimension, verify_state
from .rng import derive_seed, fresh_seed, make_rng
from .transfer import build_transfer_basis, core_product_state, lift_product_state, loop_eigenbasis

log = logging.getLogger("qsatlab")

# options that never change results and so stay out of the embedded config
_UNRECORDED = {"func", "threads", "out", "verbose", "csv_out"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def run_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}
    cfg["version"] = __version__
    return cfg


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _clean(x):
    """Replace inf/nan by None so the output stays strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _emit(args, payload: dict, summary: str | None = None) -> None:
    text = _dumps(_clean({"config": run_config(args), **payload}))
    if args.out:
        Path(args.out).write_text(text)
        if summary:
            print(summary)
    else:
        sys.stdout.write(text)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _load_json(path: str) -> dict:
    text = _read_text(path)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return d


def load_instance(path: str) -> QsatInstance:
    return QsatInstance.from_dict(_load_json(path))


def load_graph(path: str) -> Hypergraph:
    d = _load_json(path)
    for key in ("n", "k", "edges"):
        if key not in d:
            raise ValidationError(f"{path}: missing field {key!r}")
    return Hypergraph.from_dict(d)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
    return args.seed


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    seed = _seed(args)
    g = sample_hypergraph(args.n, args.k, args.alpha, args.mode, derive_seed(seed, 0))
    inst = build_instance(g, args.r, derive_seed(seed, 1))
    _emit(args, inst.to_dict(), f"instance: n={inst.n} k={inst.k} r={inst.r} m={inst.m} seed={seed} -> {args.out}")
    return 0


def cmd_graph(args) -> int:
    if args.input:
        g = load_graph(args.input)
    else:
        if args.n is None or args.alpha is None:
            raise ValidationError("graph needs --in FILE or --n/--alpha to sample one")
        g = sample_hypergraph(args.n, args.k, args.alpha, args.mode, derive_seed(_seed(args), 0))
    gs = graph_stats(g)
    comps = connected_components(g)
    hc = hypercore(g)
    out = {
        "n": g.n,
        "k": g.k,
        "m": g.m,
        "alpha": g.alpha,
        "components": len(comps.qubits),
        "giant_fraction": gs.giant_fraction,
        "hypercore_edges": len(hc.core_edges),
        "hypercore_qubits": len(hc.qubits),
        "thresholds": thresholds(g.k),
    }
    if g.k == 2:
        out["cyclomatic_excess"] = cyclomatic_excess(g, comps)
        out["classification"] = classify_satisfiability_k2(g)
    summary = (
        f"n={g.n} k={g.k} m={g.m} alpha={g.alpha:.4g} components={out['components']} "
        f"giant={gs.giant_fraction:.3f} core_edges={out['hypercore_edges']}"
    )
    if g.k == 2:
        summary += f" verdict={out['classification']}"
    _emit(args, out, summary)
    if not args.out:
        print(summary, file=sys.stderr)
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(args.input)
    rep = kernel_dimension(inst, args.tol_factor, cap=args.cap, return_basis=args.basis)
    out = {"kernel": rep.to_dict(include_basis=args.basis)}
    summary = f"D={rep.D} margin={rep.margin:.3g} flagged_steps={len(rep.flagged_steps)}"
    if args.energy:
        e = ground_state_energy(inst, cap=args.energy_cap)
        out["energy"] = e.to_dict()
        summary += f" E0={e.E0:.6g}"
    _emit(args, out, summary)
    return 0


def product_state_auto(inst: QsatInstance, seed: int = 0) -> tuple[ProductState, str]:
    """Tree/loop transfer construction for k=2, otherwise leaf-order lifting."""
    if inst.k == 2 and inst.r == 1:
        comps = connected_components(inst.graph)
        f = np.zeros((inst.n, 2), dtype=np.complex128)
        f[:, 0] = 1.0
        kinds = []
        for qs, es in zip(comps.qubits, comps.edges):
            if not es:
                continue
            root = min(qs)
            if len(es) == len(qs) - 1:
                basis = build_transfer_basis(inst, root)
                kinds.append("tree")
            elif len(es) == len(qs):
                core = hypercore(inst.graph.subgraph(es))
                base = min(es[i] for i in core.core_edges)
                basis = loop_eigenbasis(inst, inst.edges[base][0]).basis
                kinds.append("loop")
            else:
                raise ValidationError(
                    f"component of qubit {root} has cyclomatic excess {len(es) - len(qs) + 1}; "
                    "k=2 components with two or more loops admit no product state"
                )
            for q, v in basis.up.items():
                f[q] = v
        return ProductState(f), "+".join(sorted(set(kinds))) or "empty"
    core_state = None
    method = "lift"
    if not hypercore(inst.graph).empty:
        core_state = core_product_state(inst, seed=seed)
        if core_state is None:
            raise ValidationError("hypercore is non-empty and no satisfying core product state was found")
        method = "core-search+lift"
    return lift_product_state(inst, core_state), method


def cmd_product_state(args) -> int:
    inst = load_instance(args.input)
    state, method = product_state_auto(inst, seed=args.seed)
    res = verify_state(inst, state)
    ok = res < args.tol
    _emit(
        args,
        {"method": method, "residual": res, "satisfies": ok, "factors": state.to_list()},
        f"method={method} residual={res:.3g} {'OK' if ok else 'FAILED'}",
    )
    return 0 if ok else 1


def cmd_scan(args) -> int:
    seed = _seed(args)
    grid = parse_grid(args.alpha)
    rows = scan(
        args.k, args.r, grid, args.n, args.trials, seed,
        quantum_cap=args.quantum_cap, energy=not args.no_energy, energy_cap=args.energy_cap,
        tol_factor=args.tol_factor, threads=args.threads,
    )
    text = scan_csv(rows, run_config(args))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    lines = [f"scan k={args.k} r={args.r} n={args.n} trials={args.trials} seed={seed}: {len(rows)} rows"]
    if rows[0].p_sat is not None:
        c, err = bootstrap_crossing(rows, seed=seed)
        if c is not None:
            lines.append(f"P[SAT] crosses 1/2 at alpha = {c:.4f} +/- {err:.4f}")
        try:
            fit = fit_transition(rows)
            lines.append(f"logistic fit: center {fit.center:.4f}, width {fit.width:.4f}")
        except ValueError:
            pass
        if rows[0].mean_E0 is not None and any(row.alpha > thresholds(args.k)["alpha_gc"] for row in rows):
            env = energy_density_envelope(rows)
            lines.append(
                f"E0/n <= c (alpha - {env.alpha_gc:.4g})^2 holds for c >= {env.c_min:.4g}; "
                f"least-squares c {env.c_fit:.4g} (R^2 {env.r_squared:.3f})"
            )
    print("\n".join(lines), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_geometrize(args) -> int:
    seed = _seed(args)
    if args.input:
        g = load_graph(args.input)
    else:
        if args.n is None or args.alpha is None:
            raise ValidationError("geometrize needs --in FILE or --n/--alpha to sample a graph")
        g = sample_hypergraph(args.n, args.k, args.alpha, "poisson", derive_seed(seed, 0))
    if g.n > KERNEL_CAP:
        raise ValidationError(f"geometrize needs n <= {KERNEL_CAP}, got {g.n}")
    clauses = None
    if args.classical:
        clauses = [int(c) for c in make_rng(seed, 2).integers(0, 2**g.k, g.m)]
    rep = geometrization_trial(g, args.r, args.trials, derive_seed(seed, 1), args.tol_factor, clauses, args.threads)
    summary = f"modal D={rep.modal_D} ({rep.modal_frequency}/{rep.trials}) min margin={rep.min_margin:.3g}"
    if clauses is not None:
        summary += f" classical D={rep.classical_D}"
    _emit(args, {"graph": g.to_dict(), "report": rep.to_dict()}, summary)
    return 0


def cmd_census(args) -> int:
    seed = _seed(args)
    row = census(args.n, args.alpha, args.L, args.d, args.trials, seed, args.threads)
    _emit(args, row.to_dict(), f"observed {row.mean:.4f} vs predicted {row.predicted:.4f} (z = {row.z:.2f})")
    return 0


def bounds_table(k_list, r_list) -> list[dict]:
    rows = []
    for k in k_list:
        th = thresholds(k)
        for r in r_list:
            if not 1 <= r <= 2**k:
                raise ValidationError(f"rank r={r} outside [1, {2**k}] for k={k}")
            rows.append({"k": k, "r": r, "alpha_gc": th["alpha_gc"], "alpha_hc": th["alpha_hc"], "alpha_wb": alpha_weak_bound(k, r)})
    return rows


def _fmt(x) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "inf"
    return f"{x:.4f}"


def cmd_bounds(args) -> int:
    rows = bounds_table(args.k, args.r)
    header = ("k", "r", "alpha_gc", "alpha_hc", "alpha_wb")
    lines = ["  ".join(f"{h:>9}" for h in header)]
    for row in rows:
        lines.append("  ".join(f"{v:>9}" for v in (row["k"], row["r"], _fmt(row["alpha_gc"]), _fmt(row["alpha_hc"]), _fmt(row["alpha_wb"]))))
    print("\n".join(lines))
    if args.csv_out:
        cfg = "# config: " + json.dumps(run_config(args), sort_keys=True) + "\n"
        body = ",".join(header) + "\n" + "".join(
            ",".join("" if row[h] is None else repr(row[h]) for h in header) + "\n" for row in rows
        )
        Path(args.csv_out).write_text(cfg + body)
    if args.out:
        Path(args.out).write_text(_dumps(_clean({"config": run_config(args), "rows": rows})))
    return 0


def cmd_energy(args) -> int:
    if args.input:
        inst = load_instance(args.input)
        rep = ground_state_energy(inst, tol=args.tol, cap=args.energy_cap)
        _emit(args, rep.to_dict(), f"E0={rep.E0:.6g} residual={rep.residual:.3g} method={rep.method}")
        return 0
    seed = _seed(args)
    if args.figure_eight:
        L_list = [int(x) for x in parse_grid(args.figure_eight)]
        res = figure_eight_energy_scaling(L_list, args.trials, seed, threads=args.threads)
        summary = f"log-log slope {res.slope:.3f} (95% CI {res.slope_ci[0]:.3f}..{res.slope_ci[1]:.3f}), R^2 {res.r_squared:.4f}"
        _emit(args, res.to_dict(), summary)
        return 0
    if args.n_list is None or args.alpha is None:
        raise ValidationError("energy needs --in FILE, --figure-eight LIST, or --alpha with --n-list")
    n_list = [int(x) for x in parse_grid(args.n_list)]
    if max(n_list) > min(args.energy_cap, ENERGY_CAP):
        raise ValidationError(f"energy statistics need n <= {min(args.energy_cap, ENERGY_CAP)}")
    rows = promise_gap_stats(args.k, args.r, args.alpha, n_list, args.trials, seed, args.eps_c, args.eps_a, threads=args.threads)
    summary = "\n".join(
        f"n={r.n}: mean E0 {r.mean_E0:.4g}, min {r.min_E0:.3g}, P[E0=0] {r.frac_zero:.3f}, "
        f"promise violations {r.frac_violations:.3f} (eps {r.epsilon:.3g})"
        for r in rows
    )
    _emit(args, {"rows": [r.to_dict() for r in rows]}, summary)
    return 0


# ------------------------------------------------------------------ parser


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qsatlab", description="Random quantum satisfiability (k-QSAT) toolkit.")
    p.add_argument("--version", action="version", version=f"qsatlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True, threads=False, out=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed (drawn from entropy and recorded when omitted)")
        if threads:
            sp.add_argument("--threads", type=int, default=None, help="worker threads (default: $QSATLAB_THREADS or all cores)")
        if out:
            sp.add_argument("--out", default=None, help="write machine-readable output here")

    sp = sub.add_parser("gen", help="sample a random instance")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--mode", choices=("poisson", "fixed_m"), default="poisson")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("graph", help="graph statistics of a file or a sampled hypergraph")
    sp.add_argument("--in", dest="input", default=None, help="graph or instance JSON")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--mode", choices=("poisson", "fixed_m"), default="poisson")
    common(sp)
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("solve", help="kernel dimension of an instance")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--tol-factor", type=float, default=100.0)
    sp.add_argument("--cap", type=int, default=KERNEL_CAP)
    sp.add_argument("--basis", action="store_true", help="include the kernel basis")
    sp.add_argument("--energy", action="store_true", help="also compute the ground-state energy")
    sp.add_argument("--energy-cap", type=int, default=ENERGY_CAP)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("product-state", help="construct and verify a satisfying product state")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--seed", type=int, default=0, help="seed for the core search restarts")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_product_state)

    sp = sub.add_parser("scan", help="phase-diagram sweep over clause density")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", required=True, help="grid min:max:step or comma list")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--quantum-cap", type=int, default=KERNEL_CAP)
    sp.add_argument("--energy-cap", type=int, default=12)
    sp.add_argument("--no-energy", action="store_true")
    sp.add_argument("--tol-factor", type=float, default=100.0)
    common(sp, threads=True)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("geometrize", help="kernel dimension of one graph under projector re-draws")
    sp.add_argument("--in", dest="input", default=None, help="graph or instance JSON")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--tol-factor", type=float, default=100.0)
    sp.add_argument("--classical", action="store_true", help="compare with random classical clauses")
    common(sp, threads=True)
    sp.set_defaults(func=cmd_geometrize)

    sp = sub.add_parser("census", help="figure-eight counts vs the first-moment prediction")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--trials", type=int, default=1000)
    common(sp, threads=True)
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("bounds", help="threshold table (giant, hypercore, weak bound)")
    sp.add_argument("--k", type=_int_list, default=[2, 3])
    sp.add_argument("--r", type=_int_list, default=[1])
    sp.add_argument("--csv", dest="csv_out", default=None, help="also write the table as CSV")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("energy", help="ground-state energy of a file, figure eights, or the ensemble")
    sp.add_argument("--in", dest="input", default=None)
    sp.add_argument("--figure-eight", default=None, help="loop sizes, e.g. 4,6,8")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--n-list", default=None, help="qubit counts, e.g. 8,10,12")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--eps-c", type=float, default=1.0)
    sp.add_argument("--eps-a", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--energy-cap", type=int, default=ENERGY_CAP)
    common(sp, threads=True)
    sp.set_defaults(func=cmd_energy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return args.func(args)
    except DegeneracyError as exc:
        print(f"qsatlab {args.command}: numerical degeneracy: {exc} (re-draw the instance)", file=sys.stderr)
        return 2
    except (QsatError, ValueError) as exc:
        print(f"qsatlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
