import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cipround.errors import AttemptsExhausted
from cipround.gaps import random_instance, random_set_cover
from cipround.model import CipInstance, check_cover, compute_metrics
from cipround.policies import (default_max_attempts, eps_plan, eps_threshold, params_eps,
                               params_plain, plain_mean_ratio, plain_plan, plain_threshold,
                               retry_loop, solve_eps,
                               solve_plain)
from cipround.preprocess import normalize
from cipround.relaxation import RoundingParams

# alpha for gamma = ln 4, and params_eps(1, 1) (decimal module, 40 digits)
ALPHA_LN4 = 4.741114406150840000857602895835752411645
SIGMA_EPS11 = 0.6321205588285576784044762298385391325542
ALPHA_EPS11 = 3.163953413738652848770004010218023117094


def test_params_plain_examples():
    p = params_plain(1.0)
    assert p.alpha == 4.0 and p.sigma == 0.75
    assert params_plain(math.log(4)).alpha == pytest.approx(ALPHA_LN4, rel=1e-15)
    tiny = params_plain(1e-12)
    assert 1.0 < tiny.alpha < 1.0 + 1e-5
    assert plain_mean_ratio(1e-12) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ValueError):
        params_plain(0.0)


def test_params_eps_examples():
    assert params_eps(0.001, 0.5) == params_plain(0.001)
    p = params_eps(1.0, 1.0)
    assert p.sigma == pytest.approx(SIGMA_EPS11, rel=1e-15)
    assert p.alpha == pytest.approx(ALPHA_EPS11, rel=1e-15)
    assert p.theta == pytest.approx(0.5, rel=1e-14)
    for bad in [(0.0, 0.5), (1.0, 0.0), (1.0, 1.5)]:
        with pytest.raises(ValueError):
            params_eps(*bad)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-6, 50.0), st.floats(1e-3, 1.0))
def test_params_always_valid(gamma, eps):
    for p in (params_plain(gamma), params_eps(gamma, eps)):
        assert 0 < p.sigma < 1
        assert p.alpha > -math.log1p(-p.sigma) / p.sigma
        RoundingParams(p.sigma, p.alpha)
    if gamma > eps * eps / 2:
        assert 1 / params_eps(gamma, eps).theta == pytest.approx(1 + eps, rel=1e-12)


def test_params_eps_extreme_ratio():
    p = params_eps(10.0, 0.01)
    assert p.sigma < 1.0
    assert 1 / p.theta == pytest.approx(1.01, rel=1e-12)


def test_threshold_monotone_in_gamma():
    gs = np.linspace(0.01, 20, 400)
    assert np.all(np.diff([plain_threshold(g) for g in gs]) >= 0)
    assert np.all(np.diff([plain_mean_ratio(g) for g in gs]) >= 0)


def test_eps_boundary_branches():
    eps = 0.5
    g = eps * eps / 2
    below, above = params_eps(g, eps), params_eps(np.nextafter(g, 1.0), eps)
    assert below == params_plain(g)
    assert 1 / above.theta == pytest.approx(1 + eps, rel=1e-12)
    # both branches give caps at most ceil(xhat (1 + eps))
    x = np.linspace(0, 5, 101)
    for p in (below, above):
        caps = np.ceil(x / p.theta - 1e-9)
        assert np.all(caps <= np.ceil(x * (1 + eps) + 1e-9))


def test_identity_instance():
    inst = CipInstance.from_dense(np.eye(3), [1.0, 1.0, 1.0])
    rep = solve_plain(inst, seed=0)
    assert check_cover(inst, rep.x.x)
    assert rep.attempts == 1
    assert 1.0 <= rep.ratio <= plain_threshold(math.log(2))
    assert rep.theoretical_ratio == plain_threshold(math.log(2))


def test_set_cover_acceptance():
    gamma = math.log(6)
    for s in range(3):
        inst = random_set_cover(100, 80, 5, s)
        assert compute_metrics(inst).gamma == pytest.approx(gamma)
        rep = solve_plain(inst, seed=s)
        assert check_cover(inst, rep.x.x)
        assert rep.ratio <= 1 + gamma + 5 * math.sqrt(gamma) + 1e-12
        assert rep.ratio >= 1 - 1e-9


def test_mean_attempts_small():
    attempts = []
    for s in range(100):
        inst = random_set_cover(30, 20, 3, 100 + s)
        attempts.append(solve_plain(inst, seed=s).attempts)
    assert np.mean(attempts) < 10


def test_attempts_exhausted():
    inst = random_set_cover(30, 20, 3, 1)
    met, lp, params, plan = plain_plan(inst)
    with pytest.raises(AttemptsExhausted, match="attempts exhausted"):
        # no integral point can beat half the LP value
        retry_loop(inst, plan, 0.5, lp.value, 0, 5, plan.caps)


def test_default_max_attempts():
    assert default_max_attempts(0) == 64
    assert default_max_attempts(10**6) == 64 * math.ceil(math.sqrt(math.log(10**6 + 2)))


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.2])
def test_eps_caps_every_run(eps):
    inst = normalize(random_instance(40, 25, 3))[0]
    met, lp, params, plan = eps_plan(inst, eps)
    bound = np.ceil(lp.x * (1 + eps) * (1 + 1e-12))
    assert np.all(plan.caps <= bound)
    for s in range(300):
        x, _, _ = plan.draw(s)
        assert check_cover(inst, x) and np.all(x <= bound)
    rep = solve_eps(inst, eps, seed=1)
    assert rep.ratio <= eps_threshold(met.gamma, eps) + 1e-12


def test_report_json():
    inst = random_set_cover(20, 10, 3, 0)
    rep = solve_plain(inst, seed=4)
    d = json.loads(rep.to_json())
    assert d["mode"] == "plain" and d["attempts"] == rep.attempts
    assert d["x"] == rep.x.x.tolist()


def test_unnormalized_rejected():
    inst = CipInstance.from_dense([[0.5]], [0.5])
    with pytest.raises(ValueError):
        solve_plain(inst, 0)
