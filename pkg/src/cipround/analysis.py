"""Monte Carlo harness and upper-tail bounds.

Every trial runs a single rounding with no retry, so the empirical
distribution is the one the bounds talk about. Trial ``j`` of a batch seeded
``s`` always uses random stream ``(s, j)``; aggregates are integer sums, so
results do not depend on thread count or scheduling.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cipround import kernels
from cipround.kc import kc_plan
from cipround.model import CipInstance, compute_metrics
from cipround.policies import eps_mean_ratio, eps_plan, plain_mean_ratio, plain_plan
from cipround.relaxation import RoundingParams, marginal_bounds
from cipround.rounding import RoundingPlan


def chernoff_upper(mu: float, t: float) -> float:
    """``(e^d / (1+d)^(1+d))^mu`` with ``d = t/mu - 1``, evaluated in log space."""
    if mu < 0 or t < 0:
        raise ValueError("mu and t must be >= 0")
    if t < mu:
        raise ValueError(f"t={t} below mu={mu}")
    if mu == 0:
        return 1.0 if t == 0 else 0.0
    d = t / mu - 1.0
    return math.exp(mu * (d - (1.0 + d) * math.log1p(d)))


def tail_ratio(mode: str, gamma: float, eps: float | None = None) -> float:
    """Inflation ``beta`` for which ``C_l . x`` concentrates below ``beta C_l . xhat``."""
    if mode == "plain":
        return plain_mean_ratio(gamma)
    if mode == "eps":
        return eps_mean_ratio(gamma, eps)
    raise ValueError("tail bounds are available for plain and eps modes only")


@dataclass(eq=False)
class McStats:
    trials: int
    per_variable_mean: np.ndarray
    per_variable_stderr: np.ndarray
    mean_events: float
    stderr_events: float
    tail_queries: list
    tail_freq: np.ndarray
    joint_sets: list
    joint_freq: np.ndarray
    joint_tail_freq: float
    all_runs_feasible: bool
    max_multiplicity_seen: np.ndarray
    cap_violations: int = 0
    seed: int = 0
    xhat: np.ndarray | None = field(default=None, repr=False)
    params: RoundingParams | None = None

    def binom_stderr(self, p: float) -> float:
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.trials)

    def csv_rows(self, label: str = "") -> list:
        rows = []
        for i, (mu, se) in enumerate(zip(self.per_variable_mean, self.per_variable_stderr)):
            rows.append([label, "mean", i, "", repr(float(mu)), repr(float(se)), ""])
        rows.append([label, "events", "", "", repr(self.mean_events), repr(self.stderr_events), ""])
        for (l, t), f in zip(self.tail_queries, self.tail_freq):
            rows.append([label, "tail", l, repr(float(t)), repr(float(f)), "", ""])
        return rows


def _trial_block(plan: RoundingPlan, inst: CipInstance, seed, lo, hi, costs, thresholds,
                 joint_idx, caps):
    n = inst.n
    sx = np.zeros(n, dtype=np.int64)
    sxx = np.zeros(n, dtype=np.int64)
    mx = np.zeros(n, dtype=np.int64)
    ev = ev2 = 0
    tails = np.zeros(len(thresholds), dtype=np.int64)
    joints = np.zeros(len(joint_idx), dtype=np.int64)
    joint_ok = 0
    feasible = True
    cap_bad = 0
    act = kernels.row_activity
    for j in range(lo, hi):
        x, events, _ = plan.draw(seed, j)
        sx += x
        sxx += x * x
        np.maximum(mx, x, out=mx)
        ev += events
        ev2 += events * events
        if inst.m and np.any(act(inst.indptr, inst.indices, inst.data, x) < inst.a):
            feasible = False
        if caps is not None and np.any(x > caps):
            cap_bad += 1
        if thresholds.size:
            over = costs @ x > thresholds
            tails += over
            joint_ok += not over.any()
        for r, idx in enumerate(joint_idx):
            joints[r] += bool(np.all(x[idx] >= 1))
    return sx, sxx, mx, ev, ev2, tails, joints, joint_ok, feasible, cap_bad


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("CIP_ROUND_THREADS", "1") or 1)
    return max(1, threads)


def run_plan(plan: RoundingPlan, inst: CipInstance, trials: int, seed: int,
             tail_queries=(), joint_sets=(), caps=None, threads=None) -> McStats:
    """Draw ``trials`` independent roundings from ``plan`` and aggregate them."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tail_queries = [(int(l), float(t)) for l, t in tail_queries]
    costs = (np.array([inst.objectives[l] for l, _ in tail_queries])
             if tail_queries else np.zeros((0, inst.n)))
    thresholds = np.array([t for _, t in tail_queries])
    joint_idx = [np.asarray(sorted(R), dtype=np.int64) for R in joint_sets]
    nthreads = min(_threads(threads), trials)
    bounds = np.linspace(0, trials, nthreads + 1).astype(int)
    args = [(plan, inst, seed, bounds[i], bounds[i + 1], costs, thresholds, joint_idx, caps)
            for i in range(nthreads)]
    if nthreads == 1:
        parts = [_trial_block(*args[0])]
    else:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(lambda a: _trial_block(*a), args))
    sx = sum(p[0] for p in parts)
    sxx = sum(p[1] for p in parts)
    mx = np.max([p[2] for p in parts], axis=0)
    ev = sum(p[3] for p in parts)
    ev2 = sum(p[4] for p in parts)
    tails = sum(p[5] for p in parts)
    joints = sum(p[6] for p in parts)
    joint_ok = sum(p[7] for p in parts)
    feasible = all(p[8] for p in parts)
    cap_bad = sum(p[9] for p in parts)

    T = float(trials)
    mean = sx / T
    var = np.maximum(sxx / T - mean * mean, 0.0)
    se = np.sqrt(var / T) if trials > 1 else np.zeros_like(mean)
    mev = ev / T
    sev = math.sqrt(max(ev2 / T - mev * mev, 0.0) / T) if trials > 1 else 0.0
    return McStats(
        trials=trials,
        per_variable_mean=mean,
        per_variable_stderr=se,
        mean_events=mev,
        stderr_events=sev,
        tail_queries=tail_queries,
        tail_freq=np.asarray(tails, dtype=np.float64) / T,
        joint_sets=[tuple(map(int, R)) for R in joint_idx],
        joint_freq=np.asarray(joints, dtype=np.float64) / T,
        joint_tail_freq=joint_ok / T if tail_queries else 1.0,
        all_runs_feasible=feasible,
        max_multiplicity_seen=mx,
        cap_violations=int(cap_bad),
        seed=seed,
        xhat=plan.xhat,
        params=plan.params,
    )


def build_plan(inst: CipInstance, mode: str, eps: float | None = None):
    """``(plan, xhat, params, caps)`` for a solve mode; ``caps`` bounds every draw."""
    if mode == "plain":
        met, lp, params, plan = plain_plan(inst)
        return plan, lp.x, params, plan.caps
    if mode == "eps":
        if eps is None:
            raise ValueError("mode eps needs eps")
        met, lp, params, plan = eps_plan(inst, eps)
        return plan, lp.x, params, plan.caps
    if mode == "kc":
        met, lp, params, X, plan = kc_plan(inst)
        return plan, lp.x, params, np.minimum(plan.caps, inst.d)
    raise ValueError(f"unknown mode {mode!r}")


def monte_carlo(inst: CipInstance, mode: str = "plain", eps: float | None = None,
                trials: int = 10**5, seed: int = 0, tail_queries=(), joint_sets=(),
                threads=None) -> McStats:
    """Single-attempt distribution of a solve mode over ``trials`` seeds."""
    plan, xhat, params, caps = build_plan(inst, mode, eps)
    stats = run_plan(plan, inst, trials, seed, tail_queries, joint_sets, caps, threads)
    stats.xhat = xhat
    return stats


def _pass(emp: float, bound: float, trials: int) -> bool:
    se = math.sqrt(max(emp * (1.0 - emp), 0.0) / trials)
    return emp <= bound + 3.0 * se


def check_negative_correlation(inst: CipInstance, R, trials: int, seed: int, xhat,
                               params: RoundingParams, threads=None):
    """``P(all x_i = 1 for i in R)`` against ``prod rho_i``; returns ``(emp, bound, pass)``."""
    return check_negative_correlation_many(inst, [R], trials, seed, xhat, params, threads)[0]


def check_negative_correlation_many(inst, Rs, trials, seed, xhat, params, threads=None):
    x = np.asarray(xhat, dtype=np.float64)
    if np.any(params.alpha * x >= 1.0):
        raise ValueError("negative correlation is checked in the regime xhat_i < 1/alpha")
    rho = marginal_bounds(inst, x, params)
    plan = RoundingPlan(inst, x, params)
    stats = run_plan(plan, inst, trials, seed, joint_sets=[R for R in Rs if len(R)],
                     threads=threads)
    out, it = [], iter(stats.joint_freq)
    for R in Rs:
        if not len(R):
            out.append((1.0, 1.0, True))
            continue
        emp = float(next(it))
        bound = float(np.prod(rho[list(R)]))
        out.append((emp, bound, _pass(emp, bound, trials)))
    return out


def check_tail(inst: CipInstance, l: int, t: float, mode: str, trials: int, seed: int,
               eps: float | None = None, threads=None):
    """Empirical ``P(C_l . x > t)`` against ``chernoff_upper(beta C_l . xhat, t)``."""
    return check_tails(inst, [(l, t)], mode, trials, seed, eps, threads)[0]


def check_tails(inst, queries, mode, trials, seed, eps=None, threads=None):
    for l, _ in queries:
        C = inst.objectives[l]
        if np.any(C < 0) or np.any(C > 1):
            raise ValueError(f"objective {l} has an entry outside [0,1]")
    met = compute_metrics(inst)
    beta = tail_ratio(mode, met.gamma, eps)
    stats = monte_carlo(inst, mode, eps, trials, seed, tail_queries=queries, threads=threads)
    out = []
    for (l, t), emp in zip(queries, stats.tail_freq):
        mu = beta * float(inst.objectives[l] @ stats.xhat)
        bound = chernoff_upper(mu, t) if t >= mu else 1.0
        out.append((float(emp), bound, _pass(float(emp), bound, trials)))
    return out


CSV_HEADER = ["check", "instance", "params", "empirical", "bound", "pass"]


def checks_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
