"""JSON scenario files: plant matrices plus solver and observer settings.

A scenario looks like::

    {
      "name": "cavity",
      "n": 2, "n_w": 2, "n_y": 2,
      "theta": {"kind": "canonical"},
      "A": [[-0.05, 0.0], [0.0, -0.05]],
      ...
      "P0": [[1.0, 0.0], [0.0, 1.0]],
      "solver": {"dt": 0.001, "horizon": 2000.0, "tol": 1e-10},
      "coherent": {"enabled": true, "n_v": 2}
    }

Only ``n, n_w, n_y, theta, A, B, C, D`` are required. :func:`dumps` writes the
canonical layout (two-space indent, one matrix row per line); on files in that
layout ``dumps(loads(text)) == text``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ScenarioError
from .filtering import DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_TOL
from .model import NoiseSpec, QuantumLinearSystem, make_canonical_theta, make_degenerate_theta

REQUIRED = ("n", "n_w", "n_y", "theta", "A", "B", "C", "D")
OPTIONAL = ("name", "P0", "solver", "coherent")
SOLVER_KEYS = ("dt", "horizon", "tol")


@dataclass(frozen=True)
class SolverConfig:
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    tol: float = DEFAULT_TOL


@dataclass(frozen=True)
class CoherentConfig:
    enabled: bool = False
    n_v: int | None = None


@dataclass(frozen=True)
class Scenario:
    system: QuantumLinearSystem
    name: str = ""
    P0: np.ndarray | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    coherent: CoherentConfig = field(default_factory=CoherentConfig)
    # which optional sections were present, so serialization reproduces the input
    sections: tuple = ()

    @property
    def initial_covariance(self) -> np.ndarray:
        return np.eye(self.system.n) if self.P0 is None else self.P0


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _err(msg, key, text):
    return ScenarioError(msg, field=key, line=_line_of(text, key.split(".")[0]))


def _int(doc, key, text) -> int:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise _err(f"expected an integer, got {v!r}", key, text)
    return v


def _number(v, key, text) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise _err(f"expected a finite number, got {v!r}", key, text)
    return float(v)


def _matrix(doc, key, shape, text) -> np.ndarray:
    rows = doc[key]
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise _err("expected a list of rows", key, text)
    r, c = shape
    if len(rows) != r or any(len(row) != c for row in rows):
        got = (len(rows), len(rows[0]) if rows else 0)
        raise _err(f"expected shape {r}x{c}, got {got[0]}x{got[1]}", key, text)
    return np.array([[_number(v, key, text) for v in row] for row in rows], dtype=float)


def _theta(doc, n, text):
    th = doc["theta"]
    if not isinstance(th, dict) or "kind" not in th:
        raise _err('expected {"kind": ...}', "theta", text)
    kind = th["kind"]
    try:
        if kind == "canonical":
            return make_canonical_theta(n)
        if kind == "degenerate":
            if "n_prime" not in th:
                raise _err("degenerate theta needs n_prime", "theta.n_prime", text)
            return make_degenerate_theta(n, _int(th, "n_prime", text))
    except DimensionError as exc:
        raise _err(str(exc), "theta", text) from None
    raise _err(f"unknown kind {kind!r}; use 'canonical' or 'degenerate'", "theta.kind", text)


def from_dict(doc: dict, text: str | None = None) -> Scenario:
    """Validate a decoded scenario document.

    Args:
        doc: decoded JSON object.
        text: original source, used only to report line numbers.

    Raises:
        ScenarioError: naming the offending field (and line, when ``text`` is given).
    """
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be a JSON object", line=1)
    for key in REQUIRED:
        if key not in doc:
            raise ScenarioError("missing required field", field=key)
    unknown = sorted(set(doc) - set(REQUIRED) - set(OPTIONAL))
    if unknown:
        raise _err("unknown field", unknown[0], text)

    n, n_w, n_y = (_int(doc, k, text) for k in ("n", "n_w", "n_y"))
    for k, v in (("n", n), ("n_w", n_w), ("n_y", n_y)):
        if v <= 0:
            raise _err(f"must be positive, got {v}", k, text)
    comm = _theta(doc, n, text)
    A = _matrix(doc, "A", (n, n), text)
    B = _matrix(doc, "B", (n, n_w), text)
    C = _matrix(doc, "C", (n_y, n), text)
    D = _matrix(doc, "D", (n_y, n_w), text)
    try:
        system = QuantumLinearSystem(A=A, B=B, C=C, D=D, comm=comm, noise=NoiseSpec(n_w))
    except DimensionError as exc:
        raise _err(str(exc), "n_y", text) from None

    P0 = None
    if "P0" in doc:
        P0 = _matrix(doc, "P0", (n, n), text)
        if np.max(np.abs(P0 - P0.T)) > 1e-12:
            raise _err("P0 must be symmetric", "P0", text)

    solver = SolverConfig()
    if "solver" in doc:
        cfg = doc["solver"]
        if not isinstance(cfg, dict):
            raise _err("expected an object", "solver", text)
        bad = sorted(set(cfg) - set(SOLVER_KEYS))
        if bad:
            raise _err(f"unknown solver option {bad[0]!r}", "solver", text)
        vals = {k: _number(cfg[k], f"solver.{k}", text) for k in SOLVER_KEYS if k in cfg}
        for k, v in vals.items():
            if v <= 0:
                raise _err(f"must be positive, got {v}", f"solver.{k}", text)
        solver = SolverConfig(**vals)

    coherent = CoherentConfig()
    if "coherent" in doc:
        cfg = doc["coherent"]
        if not isinstance(cfg, dict):
            raise _err("expected an object", "coherent", text)
        enabled = cfg.get("enabled", False)
        if not isinstance(enabled, bool):
            raise _err("expected true or false", "coherent.enabled", text)
        n_v = cfg.get("n_v")
        if n_v is not None and (isinstance(n_v, bool) or not isinstance(n_v, int)
                                or n_v < 0 or n_v % 2):
            raise _err(f"n_v must be a non-negative even integer, got {n_v!r}", "coherent.n_v", text)
        coherent = CoherentConfig(enabled, n_v)

    name = doc.get("name", "")
    if not isinstance(name, str):
        raise _err("expected a string", "name", text)
    sections = tuple(k for k in OPTIONAL if k in doc)
    return Scenario(system, name, P0, solver, coherent, sections)


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, line=exc.lineno) from None
    return from_dict(doc, text)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def to_dict(sc: Scenario) -> dict:
    sys = sc.system
    th = {"kind": sys.comm.kind.value}
    if not sys.comm.is_canonical:
        th["n_prime"] = sys.comm.n_prime
    doc = {}
    if "name" in sc.sections or sc.name:
        doc["name"] = sc.name
    doc.update(n=sys.n, n_w=sys.n_w, n_y=sys.n_y, theta=th,
               A=sys.A.tolist(), B=sys.B.tolist(), C=sys.C.tolist(), D=sys.D.tolist())
    if sc.P0 is not None:
        doc["P0"] = sc.P0.tolist()
    if "solver" in sc.sections or sc.solver != SolverConfig():
        doc["solver"] = {"dt": sc.solver.dt, "horizon": sc.solver.horizon, "tol": sc.solver.tol}
    if "coherent" in sc.sections or sc.coherent != CoherentConfig():
        co = {"enabled": sc.coherent.enabled}
        if sc.coherent.n_v is not None:
            co["n_v"] = sc.coherent.n_v
        doc["coherent"] = co
    return doc


def _fmt(v) -> str:
    return json.dumps(v)


def dumps(sc: Scenario) -> str:
    """Canonical text: two-space indent, matrices one row per line."""
    doc = to_dict(sc)
    lines = ["{"]
    items = list(doc.items())
    for i, (k, v) in enumerate(items):
        comma = "," if i < len(items) - 1 else ""
        if isinstance(v, list):
            rows = [f"    [{', '.join(_fmt(x) for x in row)}]" for row in v]
            lines.append(f'  "{k}": [')
            lines.append(",\n".join(rows))
            lines.append(f"  ]{comma}")
        else:
            lines.append(f'  "{k}": {_fmt(v)}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump(sc: Scenario, path) -> None:
    Path(path).write_text(dumps(sc))


def from_system(system: QuantumLinearSystem, name: str = "", **kw) -> Scenario:
    """Scenario wrapping an in-memory system; keyword arguments as in :class:`Scenario`."""
    sections = tuple(k for k in OPTIONAL if k == "name" and name or kw.get(k) is not None)
    return Scenario(system, name, sections=sections, **kw)
