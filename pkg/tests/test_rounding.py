import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cipround.analysis import run_plan
from cipround.gaps import random_instance
from cipround.lp import solve_basic_lp
from cipround.model import CipInstance, check_cover, compute_metrics
from cipround.policies import params_plain
from cipround.preprocess import normalize
from cipround.relaxation import RoundingParams, relax_round
from cipround.rounding import (RoundingPlan, multiplicity_cap, multiplicity_caps, quantize,
                               round_solution, rounding_events_bound, rounding_mean_bounds)

# theta for sigma = 3/4, alpha = 4, i.e. ln(4)/3, and 1 - 2 theta (50 digits, decimal module)
THETA_34_4 = 0.4620981203732968729448214143054510453837
F_ONE = 0.0758037592534062541103571713890979092326

P34 = RoundingParams(0.75, 4.0)
ONE = CipInstance.from_dense([[1.0]], [1.0])


def test_theta_value():
    assert P34.theta == pytest.approx(THETA_34_4, rel=1e-15)


def test_quantize_zero_vector():
    inst = CipInstance.from_dense([[1.0, 0.5], [0.2, 1.0]], [1.0, 2.0])
    q = quantize([0.0, 0.0], inst, P34, check=False)
    assert not q.v.any() and not q.G.any() and not q.xprime_hat.any()
    assert np.array_equal(q.a_resid, inst.a)


def test_quantize_one():
    q = quantize([1.0], ONE, P34)
    assert q.v.tolist() == [2]
    assert q.F[0] == pytest.approx(F_ONE, rel=1e-13)
    assert q.G.tolist() == [0]
    assert q.xprime_hat[0] == pytest.approx(F_ONE, rel=1e-13)
    assert q.a_resid.tolist() == [-1.0]


@pytest.mark.parametrize("k", [1, 2, 3, 7])
def test_quantize_exact_multiple(k):
    q = quantize([k * P34.theta], ONE, P34, check=False)
    assert q.v.tolist() == [k]
    assert q.F.tolist() == [0.0] and q.G.tolist() == [0] and q.xprime_hat.tolist() == [0.0]


def test_multiplicity_cap_examples():
    assert multiplicity_cap(0.0, P34) == 0
    assert multiplicity_cap(P34.theta, P34) == 1
    assert multiplicity_cap(1.0, P34) == 3


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 20, allow_nan=False), min_size=1, max_size=8),
       st.floats(0.05, 0.95), st.floats(0.0, 3.0))
def test_quantized_fields(xs, sigma, extra):
    alpha = -math.log1p(-sigma) / sigma + 0.01 + extra
    params = RoundingParams(sigma, alpha)
    inst = CipInstance.from_dense([[1.0] * len(xs)], [1.0])
    q = quantize(xs, inst, params, check=False)
    x = np.array(xs)
    th = params.theta
    assert np.all(np.abs(q.v * th + q.F - x) <= 1e-12 * np.maximum(1, x) + 1e-15)
    assert np.all((q.F >= 0) & (q.F < th))
    assert np.all(q.xprime_hat[q.G == 1] == 0)
    assert np.all(q.xprime_hat[q.G == 0] == q.F[q.G == 0])
    assert np.all(q.xprime_hat < 1 / alpha)
    tol = 1e-12 * np.maximum(1, x)
    assert np.all(x - q.v * th - q.G * th <= q.xprime_hat + tol)
    assert np.all(q.xprime_hat <= x - q.v * th - q.G / alpha + tol)
    assert np.array_equal(multiplicity_caps(xs, params), q.v + (q.F > 0))


def test_round_idle_quantization_matches_relaxation(relax20):
    inst, xhat, params = relax20
    for s in range(20):
        a, ta = round_solution(xhat, inst, params, seed=s)
        b, tb = relax_round(xhat, inst, params, seed=s)
        assert np.array_equal(a.x, b.x) and ta.events == tb.events


def test_round_one_variable():
    seen = set()
    for s in range(200):
        sol, _ = round_solution([1.0], ONE, P34, seed=s)
        assert sol.x[0] in (2, 3)
        assert check_cover(ONE, sol.x)
        seen.add(int(sol.x[0]))
    assert seen == {2, 3}


@pytest.fixture(scope="module")
def rounded_random():
    inst = normalize(random_instance(50, 30, 5))[0]
    params = params_plain(compute_metrics(inst).gamma)
    lp = solve_basic_lp(inst)
    return inst, lp.x, params


def test_every_run_covers_and_respects_caps(rounded_random):
    inst, xhat, params = rounded_random
    plan = RoundingPlan(inst, xhat, params)
    caps = multiplicity_caps(xhat, params)
    assert np.array_equal(plan.caps, caps)
    for s in range(500):
        x, _, _ = plan.draw(s)
        assert check_cover(inst, x)
        assert np.all(x <= caps)


def test_rounding_monte_carlo(rounded_random):
    inst, xhat, params = rounded_random
    plan = RoundingPlan(inst, xhat, params)
    stats = run_plan(plan, inst, 20_000, seed=3, caps=plan.caps)
    assert stats.all_runs_feasible and stats.cap_violations == 0
    bound = rounding_mean_bounds(inst, xhat, params)
    assert np.all(stats.per_variable_mean <= bound + 3 * stats.per_variable_stderr)
    assert stats.mean_events <= rounding_events_bound(inst, params) + 3 * stats.stderr_events


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.5))
def test_residual_never_worse_on_random_points(seed, slack):
    inst = normalize(random_instance(20, 12, seed, density=0.25))[0]
    params = params_plain(compute_metrics(inst).gamma)
    x = solve_basic_lp(inst).x * (1 + slack)
    quantize(x, inst, params, check=True)  # raises if any row fails the comparison
    x2, _, _ = RoundingPlan(inst, x, params).draw(seed)
    assert check_cover(inst, x2)


def test_quantize_rejects_negative():
    with pytest.raises(ValueError):
        quantize([-0.1], ONE, P34)
