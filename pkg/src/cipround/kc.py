"""Exact multiplicities through pinned residuals and knapsack-cover cuts.

Pinning a set ``X`` of variables at their caps leaves a residual demand
``v_k`` per row. The pinned residual keeps rows with ``v_k > 0``, zeroes the
pinned columns, and lifts rows with ``v_k <= 1`` to demand 1 with
coefficients ``min(1, A_ki / v_k)``. Every integral point within the caps
satisfies the pinned residual of every ``X``, so these rows are valid cuts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cipround.errors import NoFixedPoint
from cipround.lp import basic_lp_problem, solve_lp_with_cuts
from cipround.model import CipInstance, FractionalSolution, compute_metrics, fractional_solution
from cipround.policies import (SolveReport, _report, _require_normalized, default_max_attempts,
                               kc_threshold, params_plain, retry_loop)
from cipround.rounding import RoundingPlan

CUT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PinnedResidual:
    X: tuple
    inst_prime: CipInstance
    v: np.ndarray
    rows: np.ndarray  # original index of each surviving row


def pinned_residual(inst: CipInstance, X) -> PinnedResidual:
    X = tuple(sorted({int(i) for i in X}))
    if any(not math.isfinite(inst.d[i]) for i in X):
        raise ValueError("pinned variables need finite multiplicities")
    pinned = np.zeros(inst.n, dtype=bool)
    pinned[list(X)] = True
    dx = np.where(pinned, inst.d, 0.0)
    v = inst.a - (inst.to_dense() @ dx if inst.m else np.zeros(0))
    keep, new_rows, new_a = [], [], []
    for k in range(inst.m):
        if v[k] <= 0:
            continue
        cols, vals = inst.row(k)
        free = ~pinned[cols]
        cols, vals = cols[free], vals[free]
        if v[k] <= 1:
            vals = np.minimum(1.0, vals / v[k])
            ak = 1.0
        else:
            ak = float(v[k])
        keep.append(k)
        new_rows.append(list(zip(cols.tolist(), vals.tolist())))
        new_a.append(ak)
    prime = CipInstance.from_rows(inst.n, new_rows, new_a, inst.d, inst.objectives)
    if prime.m:
        assert prime.a.min() >= 1.0
        if prime.data.size:
            l1 = np.bincount(prime.indices, weights=prime.data, minlength=inst.n)
            l0 = np.bincount(inst.indices, minlength=inst.n)
            assert l1.max() <= l0.max() + 1e-12
    return PinnedResidual(X, prime, v, np.array(keep, dtype=np.int64))


def kc_delta(gamma0: float) -> float:
    r = math.sqrt(gamma0)
    return (gamma0 / 2 + r) / math.log1p(r)


def pin_set(x, d, theta: float) -> tuple:
    """Variables whose LP value reaches ``d_i * theta``; tested as ``x_i / theta >= d_i``."""
    return tuple(np.flatnonzero(np.asarray(x) / theta >= d).tolist())


def _violated_cuts(pr: PinnedResidual, x, tol=CUT_TOL):
    inst = pr.inst_prime
    if inst.m == 0:
        return []
    A = inst.to_dense()
    act = A @ x
    bad = np.flatnonzero(act < inst.a - tol)
    return [(A[k], float(inst.a[k])) for k in bad]


def kc_lp(inst: CipInstance, delta: float, theta: float | None = None,
          max_iter: int | None = None):
    """Boxed LP plus pinned-residual cuts, iterated to a fixed point.

    Returns ``(FractionalSolution, X)`` where ``xhat`` satisfies every row of
    the pinned residual of ``X = {i : xhat_i >= d_i / delta}``. ``theta``
    overrides ``1/delta`` in that test so it matches a rounding quantum.
    """
    if not inst.finite_d:
        raise ValueError("kc requires finite multiplicities")
    theta = 1.0 / delta if theta is None else theta
    base = basic_lp_problem(inst, use_box=True)
    if max_iter is None:
        max_iter = max(1, 50 * inst.m)
    cuts, seen = [], set()
    for it in range(max_iter):
        sol = solve_lp_with_cuts(base, cuts)
        X = pin_set(sol.x, inst.d, theta)
        new = []
        for row, rhs in _violated_cuts(pinned_residual(inst, X), sol.x):
            key = (row.tobytes(), rhs)
            if key in seen:
                continue
            seen.add(key)
            new.append((row, rhs))
        if not new:
            out = fractional_solution(inst, sol.x, "kc")
            return out, X
        cuts.extend(new)
    raise NoFixedPoint(f"no fixed point within cap of {max_iter} iterations")


def kc_check(inst: CipInstance, xhat: FractionalSolution, X, tol=1e-7) -> bool:
    """Does ``xhat`` satisfy every row of the pinned residual of ``X``?"""
    return not _violated_cuts(pinned_residual(inst, X), xhat.x, tol)


def kc_plan(inst: CipInstance):
    met = _require_normalized(inst)
    if not inst.finite_d:
        raise ValueError("kc requires finite multiplicities")
    params = params_plain(met.gamma0)
    delta = kc_delta(met.gamma0)
    assert abs(delta * params.theta - 1.0) < 1e-9
    lp, X = kc_lp(inst, delta, params.theta)
    pr = pinned_residual(inst, X)
    xres = lp.x.copy()
    xres[list(X)] = 0.0
    fixed = np.zeros(inst.n, dtype=np.int64)
    fixed[list(X)] = inst.d[list(X)].astype(np.int64)
    plan = RoundingPlan(pr.inst_prime, xres, params, fixed=fixed, also_cover=(inst,))
    if np.any(plan.caps > inst.d):
        raise AssertionError("residual rounding cap exceeds a multiplicity")
    return met, lp, params, X, plan


def solve_kc(inst: CipInstance, seed: int, max_attempts: int | None = None) -> SolveReport:
    """Round so that ``x <= d`` holds on every run."""
    met, lp, params, X, plan = kc_plan(inst)
    thr = kc_threshold(met.gamma0)
    if max_attempts is None:
        max_attempts = default_max_attempts(inst.m)
    caps = np.minimum(plan.caps, inst.d)
    x, att, ev = retry_loop(inst, plan, thr, lp.value, seed, max_attempts, caps)
    return _report(inst, x, att, ev, lp.value, thr, params, "kc", seed, X)
