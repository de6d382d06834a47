"""Standard-form conic programs.

    minimize    c'x + offset
    subject to  A x = b,   x in K = K_1 x ... x K_p

with dual  maximize b'y + offset  s.t.  A'y + s = c,  s in K*.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .cones import Cone, Free, cone_from_json


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class ConicProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: tuple
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.size == 0:
            A = A.reshape(len(b), len(c))
        cones = tuple(self.cones)
        for cone in cones:
            if not isinstance(cone, Cone):
                raise TypeError(f"not a cone block: {cone!r}")
        n = sum(cone.dim for cone in cones)
        if n != c.size:
            raise ValueError(f"cone sizes sum to {n} but c has {c.size} entries")
        if A.shape != (b.size, c.size):
            raise ValueError(f"A has shape {A.shape}, expected {(b.size, c.size)}")
        for arr in (c, A, b):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "cones", cones)

    @property
    def n(self):
        return self.c.size

    @property
    def m(self):
        return self.b.size

    def blocks(self):
        """Yield (cone, slice) pairs in variable order."""
        start = 0
        for cone in self.cones:
            yield cone, slice(start, start + cone.dim)
            start += cone.dim

    def to_json(self):
        """Debug container for cross-checking with an external solver.

        Keys: ``c``, ``b``, ``offset``, ``cones`` (list of ``{"type": ..., size}``
        records), and ``A`` in coordinate form ``{"shape", "rows", "cols",
        "vals"}``. PSD blocks use the scaled upper-triangle (svec) layout.
        """
        rows, cols = np.nonzero(self.A)
        return {
            "format": "conic-program/1",
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "offset": float(self.offset),
            "cones": [cone.to_json() for cone in self.cones],
            "A": {
                "shape": list(self.A.shape),
                "rows": rows.tolist(),
                "cols": cols.tolist(),
                "vals": self.A[rows, cols].tolist(),
            },
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, obj):
        shape = tuple(obj["A"]["shape"])
        A = np.zeros(shape)
        A[obj["A"]["rows"], obj["A"]["cols"]] = obj["A"]["vals"]
        return cls(
            c=np.array(obj["c"], dtype=float),
            A=A,
            b=np.array(obj["b"], dtype=float),
            cones=tuple(cone_from_json(k) for k in obj["cones"]),
            offset=float(obj.get("offset", 0.0)),
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class Residuals:
    primal: float
    dual: float
    gap: float

    def as_tuple(self):
        return (self.primal, self.dual, self.gap)


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: Status
    residuals: Residuals
    iterations: int
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    solve_time: float = 0.0
    info: dict = field(default_factory=dict)


def residuals(program, x, y, s):
    """Relative primal, dual and gap residuals of a candidate triple."""
    A, b, c = program.A, program.b, program.c
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape != (program.n,) or s.shape != (program.n,) or y.shape != (program.m,):
        raise ValueError("candidate dimensions do not match the program")
    primal = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
    dual = np.linalg.norm(A.T @ y + s - c) / (1.0 + np.linalg.norm(c))
    pobj = c @ x
    dobj = b @ y
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return Residuals(float(primal), float(dual), float(gap))


def presolve(program, tol=0.0):
    """Drop zero rows and exact duplicate rows of (A, b).

    Returns ``(keep, infeasible_row)``: indices of kept rows and, if a zero row
    carries a nonzero right-hand side, the index of that row (else None).
    """
    A, b = program.A, program.b
    row_norm = np.abs(A).max(axis=1) if program.m else np.zeros(0)
    keep = []
    seen = {}
    for i in range(program.m):
        if row_norm[i] <= tol:
            if abs(b[i]) > tol:
                return np.array(keep, dtype=int), i
            continue
        key = (A[i].tobytes(), b[i])
        if key in seen:
            continue
        seen[key] = i
        keep.append(i)
    return np.array(keep, dtype=int), None


def has_free(program):
    return any(isinstance(cone, Free) for cone in program.cones)
