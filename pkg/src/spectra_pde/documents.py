"""Problem and result documents (JSON, ``"schema": "spectra-pde/1"``).

A problem document::

    {"schema": "spectra-pde/1",
     "operator": "lap(u) + 1000*u",
     "domain": [-1, 1, -1, 1],
     "rhs": "cos(10*x*y)",
     "bc": {"left": {"type": "dirichlet", "data": "1"}, ...},
     "tol": 1e-14, "max_n": 2049, "rank_tol": 1e-12}

Each ``bc`` entry is one constraint object or a list of them.  ``type`` is
``dirichlet``, ``neumann`` or ``expr``; ``data`` is a string in the
tangential variable; ``expr`` (for ``type: expr``) is the constrained
combination, e.g. ``"u/5 + diff(u)"``.

Result documents hold the coefficient matrix row-major with complex
entries as ``[re, im]`` pairs.  Matrices with more than ``SIDECAR_THRESHOLD``
entries go to a binary sidecar file instead.  The ``timing`` field is the
only run-dependent part and is excluded from ``payload_sha256``.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .chebcore import Cheb1, Cheb2, Interval
from .errors import SchemaError
from .frontend import EDGES, BcSpec, parse_bc
from .pde import PdeProblem, Solution

SCHEMA = "spectra-pde/1"
SIDECAR_THRESHOLD = 10**6
SIDECAR_MAGIC = b"SPDEX01\x00"

_PROBLEM_KEYS = {"schema", "operator", "domain", "rhs", "bc", "tol", "max_n", "rank_tol", "compat"}
_BC_KEYS = {"type", "data", "expr"}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaError(message)


def _number(doc: dict, key: str, default, kind=float):
    value = doc.get(key, default)
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), f"'{key}' must be a number")
    value = kind(value)
    _require(value > 0, f"'{key}' must be positive")
    return value


def _bc_string(item, where: str) -> str:
    _require(isinstance(item, dict), f"{where}: a constraint must be an object")
    unknown = set(item) - _BC_KEYS
    _require(not unknown, f"{where}: unknown key(s) {sorted(unknown)}")
    kind = item.get("type")
    _require(kind in ("dirichlet", "neumann", "expr"), f"{where}: 'type' must be dirichlet, neumann or expr")
    data = item.get("data", "0")
    _require(isinstance(data, (str, int, float)), f"{where}: 'data' must be a string")
    data = str(data)
    if kind == "expr":
        expr = item.get("expr")
        _require(isinstance(expr, str) and expr.strip() != "", f"{where}: type 'expr' needs an 'expr' string")
        return f"{expr} = {data}"
    return f"{kind}: {data}"


def problem_from_dict(doc: dict, tol=None, max_n=None, rank_tol=None) -> PdeProblem:
    """Validate a problem document and build the :class:`PdeProblem`.

    Keyword arguments override the document's settings.
    """
    _require(isinstance(doc, dict), "problem document must be a JSON object")
    unknown = set(doc) - _PROBLEM_KEYS
    _require(not unknown, f"unknown key(s) {sorted(unknown)}")
    _require(doc.get("schema") == SCHEMA, f"'schema' must be {SCHEMA!r}")
    _require(isinstance(doc.get("operator"), str), "'operator' (string) is required")
    dom = doc.get("domain")
    _require(isinstance(dom, list) and len(dom) == 4, "'domain' must be a list [a, b, c, d]")
    _require(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in dom), "'domain' entries must be numbers")
    _require(dom[0] < dom[1] and dom[2] < dom[3], "'domain' must satisfy a < b and c < d")
    rhs = doc.get("rhs", "0")
    _require(isinstance(rhs, (str, int, float)), "'rhs' must be a string")
    bc = doc.get("bc", {})
    _require(isinstance(bc, dict), "'bc' must be an object")
    bad = set(bc) - set(EDGES)
    _require(not bad, f"unknown edge(s) in 'bc': {sorted(bad)}")
    bcs = {}
    for edge, items in bc.items():
        items = items if isinstance(items, list) else [items]
        spec = BcSpec.none()
        for k, item in enumerate(items):
            spec = spec + parse_bc(_bc_string(item, f"bc.{edge}[{k}]"), edge)
        bcs[edge] = spec
    compat = doc.get("compat", "error")
    _require(compat in ("error", "project"), "'compat' must be 'error' or 'project'")
    return PdeProblem(
        doc["operator"],
        domain=tuple(float(v) for v in dom),
        bcs=bcs,
        rhs=rhs if isinstance(rhs, str) else float(rhs),
        tol=tol if tol is not None else _number(doc, "tol", 1e-14),
        max_n=max_n if max_n is not None else _number(doc, "max_n", 2049, int),
        rank_tol=rank_tol if rank_tol is not None else _number(doc, "rank_tol", 1e-12),
        compat=compat,
    )


def load_json(path: str | os.PathLike) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc.strerror})") from exc


def load_problem(path, **overrides) -> PdeProblem:
    return problem_from_dict(load_json(path), **overrides)


# ---------------------------------------------------------------- matrices

def encode_matrix(X: np.ndarray) -> list:
    """Row-major list of ``[re, im]`` pairs."""
    X = np.asarray(X, dtype=complex)
    pairs = np.stack([X.real.ravel(), X.imag.ravel()], axis=1)
    return pairs.tolist()


def decode_matrix(data: list, shape) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.size == 0:
        return np.zeros(shape, dtype=complex)
    _require(a.ndim == 2 and a.shape[1] == 2, "matrix data must be [re, im] pairs")
    _require(a.shape[0] == shape[0] * shape[1], "matrix data does not match its shape")
    return (a[:, 0] + 1j * a[:, 1]).reshape(shape)


def write_sidecar(path: Path, X: np.ndarray) -> None:
    X = np.asarray(X, dtype=complex)
    pairs = np.stack([X.real.ravel(), X.imag.ravel()], axis=1).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(SIDECAR_MAGIC)
        fh.write(pairs.tobytes())


def read_sidecar(path: Path, shape) -> np.ndarray:
    raw = Path(path).read_bytes()
    _require(raw[:8] == SIDECAR_MAGIC, f"{path}: not a coefficient sidecar (bad magic)")
    a = np.frombuffer(raw[8:], dtype="<f8")
    _require(a.size == 2 * shape[0] * shape[1], f"{path}: size does not match shape {shape}")
    return (a[0::2] + 1j * a[1::2]).reshape(shape)


# ---------------------------------------------------------------- results

def _plain(obj):
    """Numpy scalars and arrays to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_hash(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k not in ("timing", "payload_sha256")}
    return hashlib.sha256(_dumps(body).encode()).hexdigest()


def solution_document(sol: Solution, out_path: str | os.PathLike | None = None,
                      threshold: int = SIDECAR_THRESHOLD) -> dict:
    """Result document for a PDE solution; writes a sidecar next to ``out_path`` when large."""
    u = sol.u
    X = u.X
    doc = {
        "schema": SCHEMA,
        "kind": "pde-solution",
        "domain": [u.xinterval.a, u.xinterval.b, u.yinterval.a, u.yinterval.b],
        "X": {"shape": list(X.shape)},
        "diagnostics": _plain(sol.diagnostics.to_dict()),
    }
    if X.size > threshold:
        if out_path is None:
            raise SchemaError("a sidecar file needs an output path")
        side = Path(str(out_path) + ".bin")
        write_sidecar(side, X)
        doc["X"]["sidecar"] = side.name
        doc["X"]["sidecar_sha256"] = hashlib.sha256(side.read_bytes()).hexdigest()
    else:
        doc["X"]["data"] = encode_matrix(X)
    doc["payload_sha256"] = payload_hash(doc)
    doc["timing"] = {"wall_time": sol.diagnostics.wall_time}
    return doc


def ode_document(u: Cheb1, info) -> dict:
    doc = {
        "schema": SCHEMA,
        "kind": "ode-solution",
        "domain": [u.interval.a, u.interval.b],
        "degree": int(u.coeffs.size - 1),
        "coeffs": encode_matrix(u.coeffs[None, :]),
        "diagnostics": {"n": info.n, "residual": info.residual,
                        "history": [[int(n), float(r)] for n, r in info.history]},
    }
    doc["payload_sha256"] = payload_hash(doc)
    doc["timing"] = {"wall_time": info.wall_time}
    return doc


def dump_document(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def load_solution(path: str | os.PathLike) -> Cheb2:
    """Read a result document back into a :class:`Cheb2`."""
    doc = load_json(path)
    _require(isinstance(doc, dict) and doc.get("schema") == SCHEMA, f"'schema' must be {SCHEMA!r}")
    _require(doc.get("kind") == "pde-solution", "not a PDE result document")
    try:
        a, b, c, d = (float(v) for v in doc["domain"])
        shape = tuple(int(s) for s in doc["X"]["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed result document ({exc})") from exc
    Xd = doc["X"]
    if "sidecar" in Xd:
        X = read_sidecar(Path(path).parent / Xd["sidecar"], shape)
    else:
        _require("data" in Xd, "result document has no coefficient data")
        X = decode_matrix(Xd["data"], shape)
    if not np.any(X.imag):
        X = X.real.copy()
    return Cheb2(X, Interval(a, b), Interval(c, d))
