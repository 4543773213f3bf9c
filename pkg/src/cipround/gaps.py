"""Integrality-gap instance families, random test instances, and an exact oracle."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from cipround.errors import BudgetExceeded, InfeasibleError
from cipround.lp import solve_basic_lp
from cipround.model import CipInstance, check_cover
from cipround.rng import generator

FAMILIES = ("random", "eps-aug", "gf2")


# --- families ---------------------------------------------------------------

def gen_random_gap(m: int, a: float, p: float, t: int, seed: int) -> CipInstance:
    """``m`` rows over ``n = m t`` variables, each row ``s = ceil(p n)`` random ones."""
    if m < 1 or t < 1:
        raise ValueError("m and t must be >= 1")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0,1]")
    n = m * t
    s = math.ceil(p * n)
    if s > n:
        raise ValueError(f"s={s} exceeds n={n}")
    rng = generator(seed)
    rows = []
    for _ in range(m):
        cols = np.sort(rng.choice(n, size=s, replace=False))
        rows.append([(int(i), 1.0) for i in cols])
    return CipInstance.from_rows(n, rows, [float(a)] * m)


def random_gap_params(m: int) -> dict:
    """The asymptotic choice ``p = 1/ln m``, ``t = (ln m - 10 ln ln m) / p``.

    ``t_raw`` is negative for every ``m`` below roughly ``e^36``, so ``t``
    is clamped to at least 1 for desk-scale use.
    """
    if m < 3:
        raise ValueError("m must be >= 3")
    lm = math.log(m)
    p = 1.0 / lm
    t_raw = (lm - 10.0 * math.log(lm)) / p
    return {"p": p, "t_raw": t_raw, "t": max(1, round(t_raw))}


def gen_eps_gap(base: CipInstance, a: float, eps: float, K: int) -> CipInstance:
    """Add one helper per row, coefficient ``a / (K (1+eps) + 1)``, cap ``K``, cost 0."""
    if np.any(base.a != 1.0) or np.any(base.data != 1.0):
        raise ValueError("base must have unit RHS and 0/1 coefficients")
    if not 0 < eps <= 1 or K < 1:
        raise ValueError("need eps in (0,1] and K >= 1")
    c = a / (K * (1.0 + eps) + 1.0)
    if c > 1.0:
        raise ValueError(f"helper coefficient {c:g} exceeds 1 (K too small)")
    n, m = base.n, base.m
    rows = []
    for k in range(m):
        cols, vals = base.row(k)
        rows.append(list(zip(cols.tolist(), vals.tolist())) + [(n + k, c)])
    d = [None] * n + [K] * m
    cost = np.concatenate([np.ones(n), np.zeros(m)])
    return CipInstance.from_rows(n + m, rows, [float(a)] * m, d, [cost])


def eps_gap_point(base_xhat, m: int, a: float, eps: float, K: int) -> np.ndarray:
    """Originals scaled by ``a (1 + eps K) / (1 + (1+eps) K)``, helpers at ``K``."""
    v = a * (1.0 + eps * K) / (1.0 + (1.0 + eps) * K)
    return np.concatenate([v * np.asarray(base_xhat, dtype=np.float64), np.full(m, float(K))])


def _even_parity(k: int, i: int) -> bool:
    return bin(k & i).count("1") % 2 == 0


def gen_gf2_gap(q: int, g: float) -> CipInstance:
    """Variables and rows indexed by nonzero ``q``-bit strings; row k covers ``{i : k.i = 0}``."""
    if not 2 <= q <= 20:
        raise ValueError("q must be in [2, 20]")
    if not 0 < g < 1:
        raise ValueError("g must lie in (0,1)")
    n = (1 << q) - 1
    rows = []
    for k in range(1, n + 1):
        rows.append([(i - 1, 1.0) for i in range(1, n + 1) if _even_parity(k, i)])
    return CipInstance.from_rows(n, rows, [(q - 1) / g] * n)


def gf2_point_value(q: int, g: float) -> float:
    """Objective of the uniform point ``a / (2^(q-1) - 1)``, feasible row by row."""
    a = (q - 1) / g
    return ((1 << q) - 1) * a / ((1 << (q - 1)) - 1)


# --- random test instances --------------------------------------------------

def random_instance(n: int, m: int, seed: int, density: float = 0.1, a_max: float = 3.0,
                    d_max: int = 3, objectives: int = 1) -> CipInstance:
    """Sparse random instance, feasible within ``d`` (some RHS are trimmed to ensure it)."""
    rng = generator(seed, 1)
    mask = rng.random((m, n)) < density
    A = rng.random((m, n)) * mask
    for k in range(m):
        if not mask[k].any():
            A[k, rng.integers(n)] = rng.random()
    A = np.where(A > 0, np.maximum(A, 0.01), 0.0)
    d = rng.integers(1, d_max + 1, size=n)
    a = 0.2 + rng.random(m) * a_max
    a = np.minimum(a, 0.9 * (A @ d))
    C = rng.random((objectives, n))
    return CipInstance.from_dense(A, a, d, C)


def random_set_cover(n: int, m: int, set_size: int, seed: int) -> CipInstance:
    """``n`` sets (variables) of ``set_size`` random elements each, over ``m`` elements."""
    if set_size > m:
        raise ValueError("set_size exceeds m")
    rng = generator(seed, 2)
    for _ in range(1000):
        A = np.zeros((m, n))
        for i in range(n):
            A[rng.choice(m, size=set_size, replace=False), i] = 1.0
        if np.all(A.sum(axis=1) > 0):
            break
    else:
        raise ValueError("could not draw a family that covers every element")
    return CipInstance.from_dense(A, np.ones(m), np.ones(n))


# --- exact oracle -------------------------------------------------------------

def brute_force_opt(inst: CipInstance, per_var_cap: int, budget: int = 10**8) -> float:
    """Minimum of ``C_1 . x`` over integers ``0 <= x <= min(d, cap)`` covering every row.

    Depth-first over variables with two prunes: the cost already spent plus
    a per-row lower bound on what is still needed, and whether the rows can
    still be met at all by the remaining variables at their caps.
    """
    n, m = inst.n, inst.m
    caps = np.minimum(inst.d, per_var_cap).astype(np.int64)
    space = 1
    for c in caps:
        space *= int(c) + 1
        if space > budget:
            raise BudgetExceeded(f"search space exceeds budget {budget}")
    A = inst.to_dense()
    cost = inst.cost
    a = inst.a
    # suffix[j] = activity the variables j.. can still add at their caps
    suffix = np.zeros((n + 1, m))
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] + A[:, j] * caps[j]
    # cheapest cost per unit of row k among variables j..
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(A > 0, cost[None, :] / A, np.inf)
    cheapest = np.full((n + 1, m), np.inf)
    for j in range(n - 1, -1, -1):
        cheapest[j] = np.minimum(cheapest[j + 1], np.where(caps[j] > 0, unit[:, j], np.inf))

    best = [math.inf]
    x = np.zeros(n, dtype=np.int64)

    def lower(j, act):
        deficit = a - act
        need = deficit > 0
        if not need.any():
            return 0.0
        return float(np.max(deficit[need] * cheapest[j][need]))

    def dfs(j, act, spent):
        if j == n:
            if spent < best[0] and check_cover(inst, x):
                best[0] = spent
            return
        if np.any(act + suffix[j] < a - 1e-9):
            return
        if spent + lower(j, act) >= best[0] - 1e-12 * max(1.0, abs(best[0])):
            return
        for val in range(int(caps[j]), -1, -1):
            x[j] = val
            dfs(j + 1, act + A[:, j] * val, spent + cost[j] * val)
        x[j] = 0

    dfs(0, np.zeros(m), 0.0)
    if math.isinf(best[0]):
        raise InfeasibleError("infeasible under cap")
    return best[0]


def enumerate_feasible(inst: CipInstance, caps) -> list:
    """Every integer ``x <= caps`` that covers; for tiny instances only."""
    caps = np.asarray(caps, dtype=np.int64)
    grids = np.meshgrid(*[np.arange(c + 1) for c in caps], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1) if inst.n else np.zeros((1, 0), np.int64)
    return [p for p in pts if check_cover(inst, p)]


# --- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    """Measured gap of one instance; ``theoretical_floor`` is report-only."""

    family: str
    frac_value: float
    int_opt: float
    ratio: float
    theoretical_floor: float
    params: dict = field(default_factory=dict)

    CSV_PARAMS = ("m", "a", "p", "t", "eps", "K", "q", "g")

    def csv_row(self) -> list:
        return ([self.family] + [self.params.get(k, "") for k in self.CSV_PARAMS]
                + [repr(self.frac_value), repr(self.int_opt), repr(self.ratio),
                   repr(self.theoretical_floor)])

    @classmethod
    def csv_header(cls) -> list:
        return ["family", *cls.CSV_PARAMS, "frac_value", "int_opt", "ratio", "floor"]


def gap_floor(family: str, params: dict) -> float:
    """Reference ratio per family, constants that are never pinned down omitted."""
    if family == "gf2":
        return 1.0 + params["g"] / 8.0
    if family == "random":
        return max(1.0, math.log(params["m"]) / params["a"])
    if family == "eps-aug":
        eps, K, a = params["eps"], params["K"], params["a"]
        v = a * (1.0 + eps * K) / (1.0 + (1.0 + eps) * K)
        return params.get("base_ratio", 1.0) / v
    raise ValueError(f"unknown family {family!r}")


def gap_report(inst: CipInstance, family: str, params: dict, per_var_cap: int,
               budget: int = 10**8, frac_value: float | None = None) -> GapReport:
    """Measure ``int_opt / frac_value``; the LP optimum is used unless a value is given."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if frac_value is None:
        frac_value = solve_basic_lp(inst, use_box=True).value
    opt = brute_force_opt(inst, per_var_cap, budget)
    ratio = opt / frac_value if frac_value > 0 else math.inf
    if ratio < 1 - 1e-9:
        raise AssertionError(f"integral optimum {opt} below fractional value {frac_value}")
    return GapReport(family, float(frac_value), float(opt), float(ratio),
                     gap_floor(family, params), dict(params))


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GapReport.csv_header())
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()
