"""Command-line front end: ``solve``, ``verify`` and ``bench``.

Exit codes: 0 success, 2 solver warning (non-convergence, truncated result,
failed verification), 1 error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import __version__
from .fixed import parse_arith
from .oracle import MAX_ORACLE_N, dense_oracle
from .solver import SolverConfig, accuracy_report, top_k_eigen
from .sparse import load_matrix_market
from .spmv import default_threads
from .synthetic import random_graph

SCHEMA_VERSION = "v1"
EXIT_OK, EXIT_ERROR, EXIT_WARNING = 0, 1, 2

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_int_or_null = {"type": ["integer", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "command", "config", "matrix", "n", "nnz", "k_effective", "eigenvalues",
                 "accuracy", "timings", "per_nnz_ns", "lanczos", "jacobi", "saturations", "warnings"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "command": {"type": "string"},
        "config": {
            "type": "object",
            "required": ["k", "ncv", "reorth", "arith", "trig", "cus", "seed", "tol", "threads"],
            "properties": {
                "k": {"type": "integer"}, "ncv": {"type": "integer"}, "reorth": {"type": "string"},
                "arith": {"type": "string"}, "trig": {"type": "string"}, "cus": {"type": "integer"},
                "seed": _int_or_null, "tol": _num_or_null, "threads": {"type": "integer"},
            },
        },
        "matrix": {"type": "string"},
        "n": {"type": "integer"},
        "nnz": {"type": "integer"},
        "k_effective": {"type": "integer"},
        "eigenvalues": {"type": "array", "items": _num},
        "accuracy": {
            "type": "object",
            "required": ["mean_orthogonality_degrees", "min_orthogonality_degrees",
                         "mean_residual", "max_residual", "per_pair_residuals"],
            "properties": {
                "mean_orthogonality_degrees": _num, "min_orthogonality_degrees": _num,
                "mean_residual": _num, "max_residual": _num,
                "per_pair_residuals": {"type": "array", "items": _num},
            },
        },
        "timings": {
            "type": "object",
            "required": ["load", "normalize", "lanczos", "spmv_per_iteration", "jacobi", "map_back"],
            "properties": {
                "load": _num, "normalize": _num, "lanczos": _num, "jacobi": _num, "map_back": _num,
                "spmv_per_iteration": {"type": "array", "items": _num},
            },
        },
        "per_nnz_ns": _num,
        "lanczos": {
            "type": "object",
            "required": ["iterations", "breakdown_at", "restarts"],
            "properties": {"iterations": {"type": "integer"}, "breakdown_at": _int_or_null,
                           "restarts": {"type": "integer"}},
        },
        "jacobi": {
            "type": "object",
            "required": ["sweeps", "steps", "converged"],
            "properties": {"sweeps": {"type": "integer"}, "steps": {"type": "integer"},
                           "converged": {"type": "boolean"}},
        },
        "saturations": {"type": "integer"},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "verify": {"type": "object"},
    },
}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_solver_flags(p, bench=False):
    if bench:
        p.add_argument("--matrix", action="append", required=True,
                       help="Matrix Market file or synth:<n>:<avg_degree>[:seed]; repeatable")
        p.add_argument("--k", type=int, nargs="+", default=[8])
        p.add_argument("--reps", type=int, default=20)
    else:
        p.add_argument("--matrix", required=True, help="Matrix Market file or synth:<n>:<avg_degree>[:seed]")
        p.add_argument("--k", type=int, required=True)
    p.add_argument("--ncv", type=int, help="Krylov dimension (default: 4k, min 16, max 256)")
    p.add_argument("--reorth", choices=["none", "every2", "full"])
    p.add_argument("--arith", help="f32, f64 or fixed:F")
    p.add_argument("--trig", choices=["exact", "taylor3"])
    p.add_argument("--cus", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="Jacobi convergence tolerance")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=["json", "csv"], default="csv" if bench else "json")
    p.add_argument("--symmetrize", action="store_true", help="average the input with its transpose")
    p.add_argument("--precise", action="store_true", help="float64, exact trig, full reorthogonalization")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="topk-eigen", description="Top-K eigenpairs of sparse symmetric matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_solver_flags(sub.add_parser("solve", help="compute eigenpairs and an accuracy report"))
    v = sub.add_parser("verify", help="compare against the dense oracle")
    _add_solver_flags(v)
    v.add_argument("--threshold", type=float, help="pass bound (default 1e-6 precise, 1e-3 otherwise)")
    _add_solver_flags(sub.add_parser("bench", help="timing runs as CSV"), bench=True)
    return p


def make_config(args) -> SolverConfig:
    base = SolverConfig.precise() if args.precise else SolverConfig.fidelity()
    kw = {"num_cus": args.cus, "seed": args.seed, "tol": args.tol, "ncv": args.ncv,
          "threads": default_threads()}
    if args.reorth:
        kw["policy"] = {"every2": "every_two"}.get(args.reorth, args.reorth)
    if args.arith:
        try:
            parse_arith(args.arith)
        except ValueError as e:
            raise CliError(str(e)) from None
        kw["arith"] = args.arith
    if args.trig:
        kw["trig"] = args.trig
    if args.cus < 1:
        raise CliError("--cus must be >= 1")
    if args.tol is not None and args.tol <= 0:
        raise CliError("--tol must be positive")
    return base.with_(**kw)


def load_input(spec: str, symmetrize: bool = False):
    if spec.startswith("synth:"):
        parts = spec.split(":")[1:]
        try:
            n, deg = int(parts[0]), float(parts[1])
            seed = int(parts[2]) if len(parts) > 2 else 0
        except (IndexError, ValueError):
            raise CliError(f"bad synthetic spec {spec!r} (expected synth:<n>:<deg>[:seed])") from None
        return random_graph(n, deg, "er", seed)
    return load_matrix_market(spec, symmetrize=symmetrize)


def _check_k(k: int, n: int):
    if k < 1:
        raise CliError(f"--k must be >= 1, got {k}")
    if k > min(n, 64):
        raise CliError(f"--k must be <= {min(n, 64)} for this matrix, got {k}")


def run_solve(args, command="solve"):
    if args.k < 1:
        raise CliError(f"--k must be >= 1, got {args.k}")
    cfg = make_config(args)
    t0 = time.perf_counter()
    m = load_input(args.matrix, args.symmetrize)
    load_s = time.perf_counter() - t0
    _check_k(args.k, m.n)
    d = top_k_eigen(m, args.k, cfg)
    acc = accuracy_report(m, d)
    spmv = [float(x) for x in d.timings["spmv"]]
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": {"k": args.k, "ncv": d.ncv, "reorth": cfg.policy, "arith": cfg.arith, "trig": cfg.trig,
                   "cus": cfg.num_cus, "seed": cfg.seed, "tol": cfg.tol, "threads": cfg.threads},
        "matrix": args.matrix,
        "n": m.n,
        "nnz": m.nnz,
        "k_effective": d.k_effective,
        "eigenvalues": [float(x) for x in d.eigenvalues],
        "accuracy": acc.as_dict(),
        "timings": {"load": load_s, "normalize": d.timings["normalize"], "lanczos": d.timings["lanczos"],
                    "spmv_per_iteration": spmv, "jacobi": d.timings["jacobi"], "map_back": d.timings["map_back"]},
        "per_nnz_ns": float(np.mean(spmv) / max(m.nnz, 1) * 1e9) if spmv else 0.0,
        "lanczos": {"iterations": d.lanczos_report.iterations, "breakdown_at": d.lanczos_report.breakdown_at,
                    "restarts": d.lanczos_report.restarts},
        "jacobi": {"sweeps": d.jacobi.sweeps, "steps": d.jacobi.steps, "converged": bool(d.jacobi.converged)},
        "saturations": d.lanczos_report.saturations,
        "warnings": list(d.warnings),
    }
    return m, d, report


def _solve_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "eigenvalue", "residual"])
    for i, (lam, r) in enumerate(zip(report["eigenvalues"], report["accuracy"]["per_pair_residuals"]), 1):
        w.writerow([i, repr(lam), repr(r)])
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    _, _, report = run_solve(args)
    _emit(json.dumps(report, indent=2) + "\n" if args.format == "json" else _solve_csv(report), args.output)
    return EXIT_WARNING if report["warnings"] else EXIT_OK


def cmd_verify(args) -> int:
    if args.k < 1:
        raise CliError(f"--k must be >= 1, got {args.k}")
    m = load_input(args.matrix, args.symmetrize)
    if m.n > MAX_ORACLE_N:
        raise CliError(f"oracle infeasible: n={m.n} exceeds {MAX_ORACLE_N}")
    m, d, report = run_solve(args, "verify")
    threshold = args.threshold if args.threshold is not None else (1e-6 if args.precise else 1e-3)
    ref_vals, ref_vecs = dense_oracle(m.to_dense())
    k = d.k_effective
    ref = ref_vals[:k]
    rel = np.abs(d.eigenvalues - ref) / np.maximum(np.abs(ref), np.finfo(float).tiny)
    proj = np.linalg.norm(ref_vecs[:, :k].T @ d.eigenvectors, axis=0)
    angles = np.degrees(np.arccos(np.clip(proj, 0.0, 1.0)))
    norm_res = accuracy_report(m, d, normalized=True)
    passed = bool(rel.max() <= threshold and norm_res.max_residual <= threshold)
    report["verify"] = {
        "threshold": threshold,
        "oracle_eigenvalues": [float(x) for x in ref],
        "relative_errors": [float(x) for x in rel],
        "max_relative_error": float(rel.max()),
        "subspace_angles_degrees": [float(x) for x in angles],
        "max_normalized_residual": norm_res.max_residual,
        "passed": passed,
    }
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "eigenvalue", "oracle", "relative_error", "angle_degrees"])
        for i in range(k):
            w.writerow([i + 1, repr(float(d.eigenvalues[i])), repr(float(ref[i])), repr(float(rel[i])),
                        repr(float(angles[i]))])
        text = buf.getvalue()
    _emit(text, args.output)
    print(f"verify: {'PASS' if passed else 'FAIL'} (max relative error {rel.max():.3e}, threshold {threshold:g})",
          file=sys.stderr)
    return EXIT_OK if passed and not report["warnings"] else EXIT_WARNING


BENCH_COLUMNS = ["matrix", "n", "nnz", "k", "ncv", "rep", "arith", "trig", "reorth", "cus", "load_s",
                 "lanczos_s", "jacobi_s", "total_s", "spmv_mean_s", "ns_per_nnz", "eigenvalues"]


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise CliError("--reps must be >= 1")
    for k in args.k:
        if k < 1:
            raise CliError(f"--k must be >= 1, got {k}")
    cfg = make_config(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    warned = False
    for spec in args.matrix:
        t0 = time.perf_counter()
        m = load_input(spec, args.symmetrize)
        load_s = time.perf_counter() - t0
        for k in args.k:
            _check_k(k, m.n)
            for rep in range(args.reps):
                t1 = time.perf_counter()
                d = top_k_eigen(m, k, cfg)
                total = time.perf_counter() - t1
                warned |= bool(d.warnings)
                spmv_mean = float(np.mean(d.timings["spmv"]))
                w.writerow([spec, m.n, m.nnz, k, d.ncv, rep, cfg.arith, cfg.trig, cfg.policy, cfg.num_cus,
                            f"{load_s:.6f}", f"{d.timings['lanczos']:.6f}", f"{d.timings['jacobi']:.6f}",
                            f"{total:.6f}", f"{spmv_mean:.9f}", f"{spmv_mean / max(m.nnz, 1) * 1e9:.4f}",
                            ";".join(repr(float(x)) for x in d.eigenvalues)])
    _emit(buf.getvalue(), args.output)
    return EXIT_WARNING if warned else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"solve": cmd_solve, "verify": cmd_verify, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except (CliError, ValueError, OSError) as e:
        print(f"topk-eigen: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
