"""Parameter choices and full solve pipelines with Markov retry.

Each pipeline solves an LP, fixes rounding parameters from the instance's
sparsity, then redraws roundings (one fresh random stream per attempt) until
the objective falls under a fixed multiple of the LP value.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from cipround.errors import AttemptsExhausted
from cipround.lp import solve_basic_lp
from cipround.model import (CipInstance, IntegralSolution, check_cover, compute_metrics,
                            integral_solution)
from cipround.relaxation import RoundingParams
from cipround.rounding import RoundingPlan

MODES = ("plain", "eps", "kc")
MAX_DECAY = 36.0


def params_plain(gamma: float) -> RoundingParams:
    """``alpha = 1 + gamma + 2 sqrt(gamma)``, ``sigma = 1 - 1/alpha``."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    alpha = 1.0 + gamma + 2.0 * math.sqrt(gamma)
    return RoundingParams(sigma=1.0 - 1.0 / alpha, alpha=alpha)


def params_eps(gamma: float, eps: float) -> RoundingParams:
    """Parameters whose multiplicity cap is ``ceil(xhat_i (1 + eps))``.

    Small ``gamma`` (at most ``eps**2 / 2``) already meets that cap under
    :func:`params_plain`, which is returned unchanged. ``alpha`` is derived
    from the stored ``sigma`` so that ``1/theta = 1 + eps`` to rounding.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0,1]")
    if gamma <= eps * eps / 2:
        return params_plain(gamma)
    # beyond this decay 1 - sigma underflows relative to 1 in double precision
    sigma = -math.expm1(-min(gamma / eps, MAX_DECAY))
    alpha = (1.0 + eps) * -math.log1p(-sigma) / sigma
    return RoundingParams(sigma=sigma, alpha=alpha)


def plain_mean_ratio(gamma: float) -> float:
    """Per-variable expectation factor ``1 + gamma + 4 sqrt(gamma)``."""
    return 1.0 + gamma + 4.0 * math.sqrt(gamma)


def eps_mean_ratio(gamma: float, eps: float) -> float:
    return 1.0 + 4.0 * math.sqrt(gamma) + 4.0 * gamma / eps


def plain_threshold(gamma: float) -> float:
    return 1.0 + gamma + 5.0 * math.sqrt(gamma)


def eps_threshold(gamma: float, eps: float) -> float:
    return 1.0 + 5.0 * math.sqrt(gamma) + 5.0 * gamma / eps


def kc_threshold(gamma0: float) -> float:
    return 1.0 + gamma0 + 8.0 * math.sqrt(gamma0)


def default_max_attempts(m: int) -> int:
    return 64 * math.ceil(math.sqrt(math.log(m + 2)))


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of one pipeline.

    ``theoretical_ratio`` is the acceptance multiple actually enforced; its
    constants (5, or 8 for kc) are this implementation's concrete choice.
    """

    x: IntegralSolution
    attempts: int
    lp_value: float
    ratio: float
    theoretical_ratio: float
    params_used: RoundingParams
    mode: str
    seed: int
    events: int = 0
    pinned: tuple = ()

    @property
    def value(self) -> float:
        return self.x.value

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "x": [int(v) for v in self.x.x],
            "objective_values": [float(v) for v in self.x.objective_values],
            "attempts": self.attempts,
            "lp_value": self.lp_value,
            "ratio": self.ratio,
            "theoretical_ratio": self.theoretical_ratio,
            "params": {"sigma": self.params_used.sigma, "alpha": self.params_used.alpha,
                       "theta": self.params_used.theta},
            "events": self.events,
            "pinned": list(self.pinned),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1)


def _require_normalized(inst: CipInstance):
    met = compute_metrics(inst)
    if met.a_min < 1.0 or met.delta1 < 1.0:
        raise ValueError("instance must be normalized (a_min >= 1 and delta1 >= 1)")
    return met


def _accepts(value: float, threshold: float, lp_value: float) -> bool:
    return value <= threshold * lp_value + 1e-9 * max(1.0, abs(lp_value))


def retry_loop(inst: CipInstance, plan: RoundingPlan, threshold: float, lp_value: float,
               seed: int, max_attempts: int, caps=None):
    """Draw until accepted; returns ``(x, attempts, events)``.

    Every draw is checked for covering feasibility and, if ``caps`` is
    given, for ``x <= caps``; a failure there is a bug, not bad luck.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    cost = inst.cost
    for attempt in range(max_attempts):
        x, events, _ = plan.draw(seed, attempt)
        if not check_cover(inst, x):
            raise AssertionError(f"rounding returned an infeasible x (seed={seed}, attempt={attempt})")
        if caps is not None and np.any(x > caps):
            raise AssertionError(f"rounding broke its multiplicity cap (seed={seed}, attempt={attempt})")
        if _accepts(float(cost @ x), threshold, lp_value):
            return x, attempt + 1, events
    raise AttemptsExhausted(f"attempts exhausted after {max_attempts} tries")


def _report(inst, x, attempts, events, lp_value, thr, params, mode, seed, pinned=()):
    sol = integral_solution(inst, x)
    ratio = sol.value / lp_value if lp_value > 0 else 1.0
    return SolveReport(sol, attempts, lp_value, ratio, thr, params, mode, seed, events, pinned)


def plain_plan(inst: CipInstance):
    met = _require_normalized(inst)
    lp = solve_basic_lp(inst, use_box=False)
    params = params_plain(met.gamma)
    return met, lp, params, RoundingPlan(inst, lp.x, params)


def eps_plan(inst: CipInstance, eps: float):
    met = _require_normalized(inst)
    lp = solve_basic_lp(inst, use_box=True)
    params = params_eps(met.gamma, eps)
    return met, lp, params, RoundingPlan(inst, lp.x, params)


def solve_plain(inst: CipInstance, seed: int, max_attempts: int | None = None) -> SolveReport:
    """Round the unbounded basic LP; multiplicities are ignored."""
    met, lp, params, plan = plain_plan(inst)
    thr = plain_threshold(met.gamma)
    if max_attempts is None:
        max_attempts = default_max_attempts(inst.m)
    x, att, ev = retry_loop(inst, plan, thr, lp.value, seed, max_attempts, plan.caps)
    return _report(inst, x, att, ev, lp.value, thr, params, "plain", seed)


def solve_eps(inst: CipInstance, eps: float, seed: int, max_attempts: int | None = None) -> SolveReport:
    """Round the boxed basic LP so that ``x_i <= ceil(xhat_i (1 + eps))``."""
    met, lp, params, plan = eps_plan(inst, eps)
    thr = eps_threshold(met.gamma, eps)
    if max_attempts is None:
        max_attempts = default_max_attempts(inst.m)
    x, att, ev = retry_loop(inst, plan, thr, lp.value, seed, max_attempts, plan.caps)
    return _report(inst, x, att, ev, lp.value, thr, params, "eps", seed)
