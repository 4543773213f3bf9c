"""Covering integer programs: representation, metrics and feasibility.

A CIP asks for nonnegative integers ``x`` minimising ``C . x`` subject to
``A x >= a`` and, optionally, ``x <= d``. ``A`` is held as CSR rows with
strictly positive coefficients, so a column's support size is its l0 norm.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cipround import kernels

FEAS_TOL = 1e-9

LP_KINDS = ("basic-unbounded", "basic-boxed", "kc")


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class CipInstance:
    """Immutable covering instance.

    ``d`` holds ``inf`` for unbounded multiplicities; ``objectives`` is an
    ``r x n`` array whose first row is the primary objective.
    """

    n: int
    m: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    a: np.ndarray
    d: np.ndarray
    objectives: np.ndarray
    _cols: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "indptr", _frozen(self.indptr, np.int64))
        object.__setattr__(self, "indices", _frozen(self.indices, np.int64))
        object.__setattr__(self, "data", _frozen(self.data, np.float64))
        object.__setattr__(self, "a", _frozen(self.a, np.float64))
        object.__setattr__(self, "d", _frozen(self.d, np.float64))
        obj = np.atleast_2d(np.asarray(self.objectives, dtype=np.float64))
        if obj.shape[1] != self.n and obj.size:
            raise ValueError(f"objectives have {obj.shape[1]} columns, expected n={self.n}")
        object.__setattr__(self, "objectives", _frozen(obj, np.float64))
        if len(self.indptr) != self.m + 1 or len(self.a) != self.m or len(self.d) != self.n:
            raise ValueError("inconsistent instance dimensions")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValueError("column index out of range")

    # construction -----------------------------------------------------------

    @classmethod
    def from_rows(cls, n, rows, a, d=None, objectives=None):
        """Build from ``rows[k] = [(i, A_ki), ...]``; zero entries are dropped."""
        indptr = [0]
        indices, data = [], []
        for row in rows:
            for i, v in sorted(((int(i), float(v)) for i, v in row)):
                if v != 0.0:
                    indices.append(i)
                    data.append(v)
            indptr.append(len(indices))
        if d is None:
            d = [math.inf] * n
        d = [math.inf if v is None else float(v) for v in d]
        if objectives is None:
            objectives = [np.ones(n)]
        return cls(n, len(rows), indptr, indices, data, a, d, objectives)

    @classmethod
    def from_dense(cls, A, a, d=None, objectives=None):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        m, n = A.shape
        rows = [[(i, A[k, i]) for i in np.flatnonzero(A[k])] for k in range(m)]
        return cls.from_rows(n, rows, a, d, objectives)

    # views ------------------------------------------------------------------

    @property
    def r(self) -> int:
        return self.objectives.shape[0]

    @property
    def cost(self) -> np.ndarray:
        return self.objectives[0]

    def row(self, k):
        lo, hi = self.indptr[k], self.indptr[k + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.m, self.n))
        for k in range(self.m):
            cols, vals = self.row(k)
            A[k, cols] = vals
        return A

    def columns(self):
        """CSC view ``(colptr, rowind, vals)`` of A, cached."""
        if self._cols is None:
            rows = np.repeat(np.arange(self.m), np.diff(self.indptr))
            order = np.lexsort((rows, self.indices))
            counts = np.bincount(self.indices, minlength=self.n)
            colptr = np.concatenate([[0], np.cumsum(counts)])
            object.__setattr__(self, "_cols", (colptr, rows[order], self.data[order]))
        return self._cols

    def activity(self, x) -> np.ndarray:
        """Row activities ``A_k . x`` for an integer vector, summed left to right."""
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n},)")
        return kernels.row_activity(self.indptr, self.indices, self.data,
                                    np.ascontiguousarray(x, dtype=np.int64))

    def with_objectives(self, objectives) -> "CipInstance":
        return CipInstance(self.n, self.m, self.indptr, self.indices, self.data,
                           self.a, self.d, objectives)

    def with_d(self, d) -> "CipInstance":
        d = [math.inf if v is None else float(v) for v in d]
        return CipInstance(self.n, self.m, self.indptr, self.indices, self.data,
                           self.a, d, self.objectives)

    @property
    def finite_d(self) -> bool:
        return bool(np.all(np.isfinite(self.d)))

    # serialization ----------------------------------------------------------

    def to_json_dict(self) -> dict:
        rows = []
        for k in range(self.m):
            cols, vals = self.row(k)
            rows.append([[int(i), float(v)] for i, v in zip(cols, vals)])
        return {
            "n": self.n,
            "m": self.m,
            "rows": rows,
            "a": [float(v) for v in self.a],
            "d": [None if math.isinf(v) else int(v) if float(v).is_integer() else float(v)
                  for v in self.d],
            "objectives": [[float(v) for v in c] for c in self.objectives],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CipInstance":
        try:
            n, m = int(obj["n"]), int(obj["m"])
            rows = obj["rows"]
            a = obj["a"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed instance: {exc}") from None
        if len(rows) != m:
            raise ValueError(f"instance declares m={m} but has {len(rows)} rows")
        d = obj.get("d")
        if d is None:
            d = [None] * n
        objectives = obj.get("objectives") or [[1.0] * n]
        return cls.from_rows(n, [[(i, v) for i, v in row] for row in rows], a, d, objectives)


def load_instance(path) -> CipInstance:
    with open(path) as fh:
        return CipInstance.from_json_dict(json.load(fh))


def dump_instance(inst: CipInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_json_dict(), fh, indent=1)
        fh.write("\n")


@dataclass(frozen=True)
class Metrics:
    delta0: int
    delta1: float
    a_min: float
    gamma: float
    gamma0: float


@dataclass(frozen=True, eq=False)
class FractionalSolution:
    x: np.ndarray
    objective_values: np.ndarray
    lp_kind: str = "basic-unbounded"

    @property
    def value(self) -> float:
        return float(self.objective_values[0])


@dataclass(frozen=True, eq=False)
class IntegralSolution:
    x: np.ndarray
    objective_values: np.ndarray

    @property
    def value(self) -> float:
        return float(self.objective_values[0])


def validate_instance(inst: CipInstance) -> list[str]:
    """Describe every violated instance invariant; empty means valid."""
    problems = []
    for k in range(inst.m):
        cols, vals = inst.row(k)
        for i, v in zip(cols, vals):
            if not np.isfinite(v) or v <= 0:
                problems.append(f"A[{k},{i}]={v:g} must be in (0,1]")
            elif v > 1:
                problems.append(f"A[{k},{i}]={v:g} exceeds 1")
        if len(set(cols.tolist())) != len(cols):
            problems.append(f"row {k} repeats a column index")
    for k, v in enumerate(inst.a):
        if not (np.isfinite(v) and v > 0):
            problems.append(f"a[{k}] must be > 0")
    for i, v in enumerate(inst.d):
        if not (math.isinf(v) and v > 0) and not (v >= 1 and float(v).is_integer()):
            problems.append(f"d[{i}]={v:g} must be a positive integer or unbounded")
    if inst.r == 0:
        problems.append("objectives must be nonempty")
    elif np.any(~np.isfinite(inst.objectives)) or np.any(inst.objectives < 0):
        problems.append("objective coefficients must be finite and >= 0")
    return problems


def compute_metrics(inst: CipInstance) -> Metrics:
    if inst.n == 0 or inst.data.size == 0:
        raise ValueError("degenerate matrix")
    l0 = np.bincount(inst.indices, minlength=inst.n)
    l1 = np.bincount(inst.indices, weights=inst.data, minlength=inst.n)
    delta0 = int(l0.max())
    delta1 = float(l1.max())
    a_min = float(inst.a.min())
    return Metrics(
        delta0=delta0,
        delta1=delta1,
        a_min=a_min,
        gamma=math.log(delta1 + 1.0) / a_min,
        gamma0=math.log(delta0 + 1.0),
    )


def _as_int_vector(inst, x):
    x = np.asarray(x)
    if x.shape != (inst.n,):
        raise ValueError(f"x has length {x.size}, expected {inst.n}")
    if x.dtype.kind == "f":
        if not np.all(np.isfinite(x)) or np.any(x != np.round(x)):
            raise ValueError("x must be integral")
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    return x.astype(np.int64)


def check_cover(inst: CipInstance, x: Sequence[int]) -> bool:
    """True iff every covering row holds, compared exactly against ``a``."""
    x = _as_int_vector(inst, x)
    return bool(np.all(inst.activity(x) >= inst.a))


def violated_rows(inst: CipInstance, x) -> list[int]:
    x = _as_int_vector(inst, x)
    return np.flatnonzero(inst.activity(x) < inst.a).tolist()


def check_multiplicity(inst: CipInstance, x) -> bool:
    x = _as_int_vector(inst, x)
    return bool(np.all(x <= inst.d))


def integral_solution(inst: CipInstance, x) -> IntegralSolution:
    x = _as_int_vector(inst, x)
    return IntegralSolution(x=x, objective_values=inst.objectives @ x.astype(np.float64))


def fractional_solution(inst: CipInstance, x, lp_kind="basic-unbounded",
                        tol=FEAS_TOL) -> FractionalSolution:
    """Wrap ``x`` after re-checking it against the LP it claims to solve."""
    if lp_kind not in LP_KINDS:
        raise ValueError(f"unknown lp_kind {lp_kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,) or np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("fractional solution must be a finite nonnegative n-vector")
    A = inst.to_dense()
    if inst.m and np.any(A @ x < inst.a - tol):
        raise ValueError("fractional solution violates a covering row")
    if lp_kind == "basic-boxed" and np.any(x > inst.d + tol):
        raise ValueError("fractional solution exceeds a multiplicity cap")
    return FractionalSolution(x=x, objective_values=inst.objectives @ x, lp_kind=lp_kind)
