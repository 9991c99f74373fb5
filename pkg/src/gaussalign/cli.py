"""Command-line entry point: ``gaussalign <subcommand> [options]``.

Every subcommand prints a JSON report (schema ``gaussalign/1``) to standard
output, or writes it to ``--out``. Exit status is 0 on success, 2 on usage
errors and 1 on computation or input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cluster import (
    DistanceMatrix,
    classical_mds,
    cka,
    kmeans_igw,
    mds_stress,
    pairwise_igw_matrix,
    triangle_violations,
)
from .errors import GaussAlignError
from .gaussian import (
    DEFAULT_RIDGE,
    Gaussian,
    WeightedCollection,
    dump_gaussian,
    fit_gaussian,
    load_entity,
    read_csv_matrix,
    write_csv_matrix,
)
from .igw import igw_barycenter, igw_bounds, igw_closed_form, igw_distance_rgd
from .manifold import SolverConfig, factor_rank
from .multimarginal import barycenter_from_mm, glued_coupling, mm_igw_closed_form, mm_ot_solve
from .transport import bw_distance, bw_map, displacement_interpolation

SCHEMA = "gaussalign/1"
SEED_ENV = "GAUSSALIGN_SEED"
ENTITY_SUFFIXES = (".json", ".csv")


class UsageError(Exception):
    """Bad flag values detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        if not math.isfinite(val):
            raise GaussAlignError(f"non-finite value {val!r} in result")
        return val
    return obj


def _gauss_payload(g: Gaussian) -> dict:
    return {"dim": g.dim, "mean": g.mean, "cov": g.cov}


class _Run:
    """Collects inputs, timings and result for one invocation."""

    def __init__(self, args):
        self.args = args
        self.inputs = {}
        self.timings = {}
        self.warnings = []

    def load(self, path, ridge=DEFAULT_RIDGE, skip_header=False) -> Gaussian:
        self.inputs[str(path)] = _digest(path)
        return load_entity(path, ridge, skip_header)

    def matrix(self, path, skip_header=False) -> np.ndarray:
        self.inputs[str(path)] = _digest(path)
        return read_csv_matrix(path, skip_header)

    def timed(self, phase, fn, *a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        self.timings[phase] = self.timings.get(phase, 0.0) + time.perf_counter() - t0
        return out

    def config(self, rtr=False) -> SolverConfig:
        a = self.args
        base = SolverConfig.for_rtr() if rtr else SolverConfig()
        over = {"seed": a.seed}
        for name in ("max_iters", "grad_tol", "restarts"):
            val = getattr(a, name, None)
            if val is not None:
                over[name] = val
        try:
            return SolverConfig(**{**base.to_dict(), **over})
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def _entity_dir(run: _Run, directory, ridge, skip_header):
    d = Path(directory)
    if not d.is_dir():
        raise GaussAlignError(f"{d}: not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in ENTITY_SUFFIXES)
    if not files:
        raise GaussAlignError(f"{d}: no .json or .csv entity files")
    return [p.name for p in files], [run.load(p, ridge, skip_header) for p in files]


# -- subcommands -------------------------------------------------------------


def cmd_fit(run: _Run):
    a = run.args
    run.inputs[str(a.input)] = _digest(a.input)
    x = run.timed("read", read_csv_matrix, a.input, a.skip_header)
    g = run.timed("fit", fit_gaussian, x, a.ridge)
    result = {"n_samples": x.shape[0], "dim": g.dim, "ridge": a.ridge}
    if a.out:
        Path(a.out).write_text(dump_gaussian(g), encoding="utf-8")
        result["output"] = str(a.out)
    else:
        result["gaussian"] = _gauss_payload(g)
    return result


def cmd_w2(run: _Run):
    a = run.args
    g1, g2 = run.load(a.a), run.load(a.b)
    dist = run.timed("distance", bw_distance, g1, g2)
    result = {"distance": dist, "distance_sq": dist * dist}
    if not a.no_map:
        tmap = run.timed("map", bw_map, g1, g2)
        result["map"] = tmap.to_dict()
        if a.t is not None:
            result["interpolation"] = {"t": a.t, **_gauss_payload(displacement_interpolation(g1, tmap, a.t))}
    return result


def cmd_igw(run: _Run):
    a = run.args
    g1, g2 = run.load(a.a), run.load(a.b)
    bounds = run.timed("bounds", igw_bounds, g1, g2)
    result = {"method": a.method, "bounds": bounds.to_dict()}
    if a.method == "closed":
        val = run.timed("closed", igw_closed_form, g1, g2)
        if val is None:
            raise GaussAlignError("no closed form applies to these inputs; use --method rgd")
        result["distance"] = val
    elif a.method == "rgd":
        cfg = run.config()
        dist, sol, _ = run.timed("rgd", igw_distance_rgd, g1, g2, cfg)
        result.update(
            distance=dist,
            gamma=sol.gamma,
            iterations=sol.iterations,
            converged=sol.converged,
            swapped=sol.swapped,
            c=sol.c,
            trace=sol.trace,
            solver=cfg.to_dict(),
        )
        if not sol.converged:
            run.warnings.append("gradient ascent stopped at max-iters before reaching grad-tol")
    else:
        result["distance_interval"] = [bounds.lower, bounds.upper]
    return result


def _weights(a, p):
    if a.weights is None:
        return None
    if len(a.weights) != p:
        raise UsageError(f"--weights has {len(a.weights)} values for {p} inputs")
    return np.asarray(a.weights, dtype=float)


def cmd_igw_barycenter(run: _Run):
    a = run.args
    gs = [run.load(p) for p in a.inputs]
    col = WeightedCollection(gs, _weights(a, len(gs)))
    g = run.timed("barycenter", igw_barycenter, col, a.d_target)
    return {"barycenter": _gauss_payload(g), "weights": col.weights}


def _maybe_blocks_csv(a, coupling, result):
    if getattr(a, "blocks_csv", None):
        write_csv_matrix(coupling.stacked_cov, a.blocks_csv)
        result["blocks_csv"] = str(a.blocks_csv)


def cmd_mmot(run: _Run):
    a = run.args
    gs = [run.load(p) for p in a.inputs]
    w = _weights(a, len(gs))
    cfg = run.config(rtr=True)
    coupling = run.timed("solve", mm_ot_solve, gs, cfg)
    bary = run.timed("barycenter", barycenter_from_mm, coupling, w)
    if coupling.status != "certified":
        run.warnings.append("multimarginal OT solution is not certified globally optimal")
    result = {
        "coupling": coupling.summary(),
        "barycenter": _gauss_payload(bary),
        "weights": np.full(len(gs), 1.0 / len(gs)) if w is None else w,
        "solver": cfg.to_dict(),
    }
    _maybe_blocks_csv(a, coupling, result)
    return result


def cmd_mm_igw(run: _Run):
    a = run.args
    gs = [run.load(p) for p in a.inputs]
    coupling = run.timed("solve", mm_igw_closed_form, gs)
    result = {"coupling": coupling.summary()}
    _maybe_blocks_csv(a, coupling, result)
    return result


def cmd_cluster(run: _Run):
    a = run.args
    names, gs = _entity_dir(run, a.dir, a.ridge, a.skip_header)
    res = run.timed("kmeans", kmeans_igw, gs, a.k, a.seed)
    return {
        "k": a.k,
        "entities": names,
        "labels": res.labels,
        "inertia": res.inertia,
        "iterations": res.iterations,
        "inertia_history": res.history,
        "centers": [_gauss_payload(c) for c in res.centers],
    }


def cmd_mds(run: _Run):
    a = run.args
    if a.matrix:
        dm = DistanceMatrix(run.matrix(a.matrix))
        names = []
    else:
        names, gs = _entity_dir(run, a.dir, a.ridge, a.skip_header)
        dm = run.timed("distances", pairwise_igw_matrix, gs, run.config(), a.mode, a.threads)
        bad = triangle_violations(dm)
        if bad:
            run.warnings.append(f"{len(bad)} triangle-inequality violations in the distance matrix")
    coords = run.timed("mds", classical_mds, dm, a.dim)
    result = {
        "entities": names,
        "distances": dm.entries,
        "coordinates": coords,
        "stress": mds_stress(dm, coords),
    }
    if a.coords_csv:
        write_csv_matrix(coords, a.coords_csv)
        result["coords_csv"] = str(a.coords_csv)
    return result


def cmd_cka(run: _Run):
    a = run.args
    x = run.matrix(a.x, a.skip_header)
    y = run.matrix(a.y, a.skip_header)
    return {"cka": run.timed("cka", cka, x, y, a.center), "center": a.center}


def _bench_instance(p, d, seed, cfg):
    rng = np.random.default_rng([seed, p])
    gs = []
    for _ in range(p):
        m = rng.standard_normal((d, d))
        gs.append(Gaussian(np.zeros(d), m @ m.T + 0.1 * np.eye(d)))
    t0 = time.perf_counter()
    coupling = mm_ot_solve(gs, cfg)
    elapsed = time.perf_counter() - t0
    glued = glued_coupling(gs)
    s = coupling.stacked_cov
    lam = np.linalg.eigvalsh(s)
    k = coupling.factor.rank_k
    row = {
        "p": p,
        "d": d,
        "k": k,
        "variables": p * d * k,
        "objective": coupling.objective,
        "cost": coupling.cost,
        "glued_objective": glued.objective,
        "status": coupling.status,
        "certificate": coupling.certificate.to_dict(),
        "stacked_rank": int(np.sum(lam > 1e-6 * lam[-1])),
        "factor_rank": factor_rank(coupling.factor.blocks),
    }
    return row, elapsed


def cmd_bench_mmot(run: _Run):
    a = run.args
    cfg = run.config(rtr=True)
    ps = list(a.p)
    workers = a.threads if a.threads is not None else os.cpu_count()
    with ThreadPoolExecutor(max_workers=max(1, workers or 1)) as pool:
        outs = list(pool.map(lambda p: _bench_instance(p, a.d, a.seed, cfg), ps))
    rows = []
    for p, (row, elapsed) in zip(ps, outs):
        rows.append(row)
        run.timings[f"p={p}"] = elapsed
        if row["status"] != "certified":
            run.warnings.append(f"p={p}: solution not certified globally optimal")
    return {"d": a.d, "rows": rows, "solver": cfg.to_dict()}


# -- parser ------------------------------------------------------------------


def _common(sp, solver=False):
    sp.add_argument("--seed", type=int, default=None, help=f"random seed (default ${SEED_ENV} or 0)")
    sp.add_argument("--out", default=None, help="write the report here instead of stdout")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    sp.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")
    if solver:
        sp.add_argument("--max-iters", type=int, default=None)
        sp.add_argument("--grad-tol", type=float, default=None)
        sp.add_argument("--restarts", type=int, default=None)


def _entity_flags(sp):
    sp.add_argument("--ridge", type=float, default=DEFAULT_RIDGE, help="ridge for CSV point clouds")
    sp.add_argument("--skip-header", action="store_true", help="CSV files start with a header row")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussalign", description="OT and IGW alignment of Gaussian measures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("fit", help="fit a Gaussian to a point-cloud CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    sp.add_argument("--skip-header", action="store_true")
    _common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("w2", help="2-Wasserstein distance, map and interpolation")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--t", type=float, default=None, help="interpolation time in [0, 1]")
    sp.add_argument("--no-map", action="store_true", help="distance only")
    _common(sp)
    sp.set_defaults(func=cmd_w2)

    sp = sub.add_parser("igw", help="IGW distance between two Gaussians")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--method", choices=("closed", "rgd", "bounds"), default="rgd")
    _common(sp, solver=True)
    sp.set_defaults(func=cmd_igw)

    sp = sub.add_parser("igw-barycenter", help="IGW barycenter of centered Gaussians")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--weights", nargs="+", type=float, default=None)
    sp.add_argument("--d-target", type=int, default=None)
    _common(sp)
    sp.set_defaults(func=cmd_igw_barycenter)

    sp = sub.add_parser("mmot", help="multimarginal OT and its barycenter")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--weights", nargs="+", type=float, default=None)
    sp.add_argument("--blocks-csv", default=None, help="write the joint covariance as CSV")
    _common(sp, solver=True)
    sp.set_defaults(func=cmd_mmot)

    sp = sub.add_parser("mm-igw", help="closed-form multimarginal IGW of centered Gaussians")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--blocks-csv", default=None)
    _common(sp)
    sp.set_defaults(func=cmd_mm_igw)

    sp = sub.add_parser("cluster", help="k-means++ under IGW on a directory of entities")
    sp.add_argument("--dir", required=True)
    sp.add_argument("--k", type=int, required=True)
    _entity_flags(sp)
    _common(sp)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("mds", help="classical MDS of an IGW or given distance matrix")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--dir")
    src.add_argument("--matrix", help="headerless CSV distance matrix")
    sp.add_argument("--mode", choices=("closed", "rgd", "upper", "lower"), default="closed")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--coords-csv", default=None)
    _entity_flags(sp)
    _common(sp, solver=True)
    sp.set_defaults(func=cmd_mds)

    sp = sub.add_parser("cka", help="kernel alignment of two representation matrices")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--center", action="store_true", help="column-center both inputs first")
    sp.add_argument("--skip-header", action="store_true")
    _common(sp)
    sp.set_defaults(func=cmd_cka)

    sp = sub.add_parser("bench-mmot", help="multimarginal OT scaling sweep over p")
    sp.add_argument("--p", nargs="+", type=int, default=[3, 5, 10, 50, 100])
    sp.add_argument("--d", type=int, default=3)
    _common(sp, solver=True)
    sp.set_defaults(func=cmd_bench_mmot)
    return parser


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"gaussalign: error: {SEED_ENV}={env!r} is not an integer") from None


def run(argv=None) -> int:
    """Execute one CLI invocation and return its exit status."""
    try:
        args = build_parser().parse_args(argv)
        args.seed = _resolve_seed(args)
        if args.threads is not None and args.threads < 1:
            raise UsageError("gaussalign: error: --threads must be at least 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    session = _Run(args)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            t0 = time.perf_counter()
            result = args.func(session)
            session.timings["total"] = time.perf_counter() - t0
        # sorted so that warnings raised from worker threads have a stable order
        for msg in sorted({str(w.message) for w in caught}):
            if msg not in session.warnings:
                session.warnings.append(msg)
        report = {
            "schema": SCHEMA,
            "command": args.command,
            "inputs": session.inputs,
            "seed": args.seed,
            "result": result,
            "warnings": session.warnings,
        }
        if args.timings:
            report["timings"] = session.timings
        text = json.dumps(_jsonable(report), indent=2) + "\n"
    except UsageError as exc:
        print(f"gaussalign {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (GaussAlignError, OSError, ValueError) as exc:
        print(f"gaussalign {args.command}: error: {exc}", file=sys.stderr)
        return 1

    if args.out and args.command != "fit":
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"gaussalign {args.command}: error: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
