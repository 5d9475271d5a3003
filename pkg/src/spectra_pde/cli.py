"""Command-line interface: ``spectra-pde {solve,eval,rank,ode}``.

Exit codes: 0 success, 2 unresolved (or evaluation point outside the
domain), 3 ill-posed problem (singular, non-unique, incompatible data),
4 invalid input (schema, grammar, usage).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import documents as docs
from .chebcore import Interval, eval2
from .errors import (
    DomainError,
    EvaluationError,
    IllPosedError,
    ParseError,
    ResourceError,
    SchemaError,
    SpectraError,
    UnresolvedError,
)
from .frontend import parse_function, parse_ode, parse_ode_bcs
from .ode1d import OdeProblem, solve_ode
from .pde import solve_pde
from .separable import splitting_rank

EXIT_OK, EXIT_UNRESOLVED, EXIT_ILLPOSED, EXIT_SCHEMA = 0, 2, 3, 4
THREADS_ENV = "SPECTRA_PDE_THREADS"

logger = logging.getLogger("spectra_pde.cli")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as "unresolved"
    def error(self, message):
        raise _UsageError(message)


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError as exc:
        raise SchemaError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from exc
    if n < 1:
        raise SchemaError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_grid(spec: str) -> tuple[int, int]:
    parts = spec.lower().replace("×", "x").split("x")
    try:
        nx, ny = (int(p) for p in parts)
    except ValueError as exc:
        raise SchemaError(f"--grid must look like NXxNY, got {spec!r}") from exc
    if nx < 1 or ny < 1:
        raise SchemaError("--grid sizes must be positive")
    return nx, ny


def _parse_points(spec: str) -> np.ndarray:
    pts = []
    for item in spec.split(";"):
        if not item.strip():
            continue
        try:
            x, y = (float(v) for v in item.split(","))
        except ValueError as exc:
            raise SchemaError(f"--points entries must be 'x,y', got {item!r}") from exc
        pts.append((x, y))
    if not pts:
        raise SchemaError("--points is empty")
    return np.array(pts)


def _domain(spec: str, n: int) -> list[float]:
    try:
        vals = [float(v) for v in spec.replace(" ", "").split(",")]
    except ValueError as exc:
        raise SchemaError(f"--domain must be {n} comma-separated numbers, got {spec!r}") from exc
    if len(vals) != n:
        raise SchemaError(f"--domain must have {n} numbers, got {len(vals)}")
    return vals


# ---------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    p = docs.load_problem(args.problem, tol=args.tol, max_n=args.max_n, rank_tol=args.rank_tol)
    sol = solve_pde(p)
    out = None if args.out in (None, "-") else args.out
    doc = docs.solution_document(sol, out)
    _write(docs.dump_document(doc), args.out)
    d = sol.diagnostics
    print(f"resolved at n_x={d.nx}, n_y={d.ny} (path {d.path}, splitting rank {d.k}, "
          f"{d.wall_time:.2f} s)", file=sys.stderr)
    return EXIT_OK


def _eval_points(u, args) -> np.ndarray:
    if args.points:
        return _parse_points(args.points)
    nx, ny = _parse_grid(args.grid or "11x11")
    a, b = u.xinterval
    c, d = u.yinterval
    xs = np.linspace(a, b, nx) if nx > 1 else np.array([(a + b) / 2])
    ys = np.linspace(c, d, ny) if ny > 1 else np.array([(c + d) / 2])
    Yg, Xg = np.meshgrid(ys, xs, indexing="ij")  # y-major rows
    return np.stack([Xg.ravel(), Yg.ravel()], axis=1)


def cmd_eval(args) -> int:
    u = docs.load_solution(args.result)
    pts = _eval_points(u, args)
    for x, y in pts:
        if not (u.xinterval.contains(x) and u.yinterval.contains(y)):
            raise DomainError(f"point ({float(x)!r}, {float(y)!r}) lies outside the domain "
                              f"[{u.xinterval.a}, {u.xinterval.b}] x [{u.yinterval.a}, {u.yinterval.b}]")
    vals = np.asarray(eval2(u, pts[:, 0], pts[:, 1]), dtype=complex)
    if args.format == "json":
        doc = {"schema": docs.SCHEMA, "kind": "evaluation",
               "points": pts.tolist(), "values": docs.encode_matrix(vals[None, :])}
        _write(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        lines = ["x,y,re,im"]
        lines += [",".join(repr(float(t)) for t in (x, y, v.real, v.imag)) for (x, y), v in zip(pts, vals)]
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_rank(args) -> int:
    if args.problem:
        p = docs.load_problem(args.problem, rank_tol=args.rank_tol)
        rank_tol = p.rank_tol
        C = p.operator
    else:
        if not args.op:
            raise SchemaError("rank needs a problem file or --op")
        from .frontend import extract_coeffs

        a, b, c, d = _domain(args.domain or "-1,1,-1,1", 4)
        rank_tol = args.rank_tol or 1e-12
        C = extract_coeffs(args.op, Interval(a, b), Interval(c, d), args.tol or 1e-14)
    rep = splitting_rank(C, rank_tol)
    s = rep.singular_values
    rel = s / s[0] if s.size and s[0] else s
    if args.format == "json":
        doc = {"schema": docs.SCHEMA, "kind": "rank", "splitting_rank": rep.k, "rank_tol": rank_tol,
               "singular_values": s.tolist(), "terms": rep.summary()}
        _write(json.dumps(doc, indent=1) + "\n", args.out)
        return EXIT_OK
    lines = [f"splitting rank: {rep.k}",
             "singular values (relative): " + " ".join(f"{v:.3e}" for v in rel)]
    lines += rep.summary()
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_ode(args) -> int:
    if not args.op:
        raise SchemaError("ode needs --op")
    if not args.bc:
        raise SchemaError("ode needs at least one --bc constraint")
    a, b = _domain(args.domain or "-1,1", 2)
    iv = Interval(a, b)
    tol = args.tol or 1e-14
    L = parse_ode(args.op, iv, tol)
    functionals, values = parse_ode_bcs(args.bc, iv)
    rhs = parse_function(args.rhs if args.rhs is not None else "0", ("x",))
    p = OdeProblem(L, functionals, values, rhs)
    kwargs = {"max_degree": args.max_n - 1} if args.max_n else {}
    u, info = solve_ode(p, tol=tol, full_output=True, **kwargs)
    if args.format == "csv":
        lines = ["index,re,im"]
        c = np.asarray(u.coeffs, dtype=complex)
        lines += [f"{j},{float(v.real)!r},{float(v.imag)!r}" for j, v in enumerate(c)]
        _write("\n".join(lines) + "\n", args.out)
    else:
        _write(docs.dump_document(docs.ode_document(u, info)), args.out)
    print(f"resolved at degree {u.coeffs.size - 1}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectra-pde", description="Spectral solver for linear PDEs on rectangles.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, tol=True):
        p.add_argument("--out", help="output file (default stdout)")
        if tol:
            p.add_argument("--tol", type=float, help="resolution tolerance (default 1e-14)")
            p.add_argument("--max-n", type=int, help="largest discretization size per dimension")
            p.add_argument("--rank-tol", type=float, help="relative singular-value cutoff (default 1e-12)")

    ps = sub.add_parser("solve", help="solve the PDE in a problem file")
    ps.add_argument("problem")
    common(ps)
    ps.set_defaults(func=cmd_solve)

    pe = sub.add_parser("eval", help="evaluate a stored solution on a grid or at points")
    pe.add_argument("result")
    pe.add_argument("--grid", help="uniform NXxNY grid (default 11x11)")
    pe.add_argument("--points", help="explicit points 'x1,y1;x2,y2;...'")
    pe.add_argument("--format", choices=("csv", "json"), default="csv")
    common(pe, tol=False)
    pe.set_defaults(func=cmd_eval)

    pr = sub.add_parser("rank", help="report the splitting rank of an operator")
    pr.add_argument("problem", nargs="?")
    pr.add_argument("--op", help="operator string (instead of a problem file)")
    pr.add_argument("--domain", help="a,b,c,d (with --op)")
    pr.add_argument("--format", choices=("csv", "json"), default="csv",
                    help="json for a machine-readable report; otherwise plain text")
    common(pr)
    pr.set_defaults(func=cmd_rank)

    po = sub.add_parser("ode", help="solve a linear ODE boundary-value problem in x")
    po.add_argument("--op", help="operator, e.g. \"1e-3*diff(u,x,2) - x*u\"")
    po.add_argument("--bc", action="append", help="constraint such as 'u(-1)=1' (repeatable or ';'-separated)")
    po.add_argument("--rhs", help="right-hand side in x (default 0)")
    po.add_argument("--domain", help="a,b (default -1,1)")
    po.add_argument("--format", choices=("csv", "json"), default="json")
    common(po)
    po.set_defaults(func=cmd_ode)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"spectra-pde: error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_SCHEMA
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (UnresolvedError, ResourceError) as exc:
        code, exc_ = EXIT_UNRESOLVED, exc
    except DomainError as exc:
        code, exc_ = EXIT_UNRESOLVED, exc
    except IllPosedError as exc:
        code, exc_ = EXIT_ILLPOSED, exc
    except (SchemaError, ParseError, EvaluationError) as exc:
        code, exc_ = EXIT_SCHEMA, exc
    except SpectraError as exc:
        code, exc_ = EXIT_ILLPOSED, exc
    except (ValueError, TypeError) as exc:
        code, exc_ = EXIT_SCHEMA, exc
    print(f"spectra-pde: {type(exc_).__name__}: {exc_}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
