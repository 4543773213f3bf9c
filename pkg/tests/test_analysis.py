import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cipround.analysis import (McStats, check_negative_correlation,
                               check_negative_correlation_many, check_tail, check_tails,
                               checks_to_csv, chernoff_upper, monte_carlo, run_plan, tail_ratio)
from cipround.gaps import random_instance
from cipround.model import CipInstance, compute_metrics
from cipround.policies import plain_mean_ratio
from cipround.preprocess import normalize
from cipround.relaxation import marginal_bounds
from cipround.rounding import RoundingPlan

E_OVER_4 = 0.6795704571147613088400718678381656244392


def test_chernoff_examples():
    assert chernoff_upper(3.0, 3.0) == 1.0
    assert chernoff_upper(1.0, 2.0) == pytest.approx(E_OVER_4, rel=1e-15)
    assert chernoff_upper(0.0, 0.0) == 1.0
    assert chernoff_upper(0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        chernoff_upper(2.0, 1.0)


@settings(max_examples=300)
@given(st.floats(1e-3, 50), st.floats(0, 50), st.floats(0, 1))
def test_chernoff_in_unit_interval_and_matches_direct(mu, extra, _):
    t = mu + extra
    v = chernoff_upper(mu, t)
    assert 0 < v <= 1 or (v == 0.0 and mu * (t / mu) > 100)
    d = t / mu - 1
    try:
        direct = (math.exp(d) / (1 + d) ** (1 + d)) ** mu
    except OverflowError:
        return
    if direct > 1e-300:
        assert v == pytest.approx(direct, rel=1e-10)


def test_chernoff_monotone_in_mu():
    for t in np.linspace(0.5, 30, 40):
        mus = np.linspace(1e-3, t, 60)
        vals = [chernoff_upper(m, t) for m in mus]
        assert np.all(np.diff(vals) >= -1e-9 * np.abs(vals[1:]))


def test_chernoff_shift():
    # shifting both arguments down by r never raises the bound
    for t in np.linspace(0.5, 20, 25):
        for mu in np.linspace(0.1, t, 15):
            for r in np.linspace(0, mu, 8):
                if mu - r <= 0:
                    continue
                assert chernoff_upper(mu - r, t - r) <= chernoff_upper(mu, t) * (1 + 1e-9)


def test_chernoff_shift_reverse_direction_fails():
    assert chernoff_upper(0.1, 0.5) > chernoff_upper(0.1 - 0.05, 0.5 - 0.05)


def test_tail_ratio_modes():
    assert tail_ratio("plain", 1.0) == plain_mean_ratio(1.0)
    assert tail_ratio("eps", 1.0, 0.5) == 1 + 4 + 8
    with pytest.raises(ValueError):
        tail_ratio("kc", 1.0)


def test_single_trial(relax20):
    inst, xhat, params = relax20
    plan = RoundingPlan(inst, xhat, params)
    stats = run_plan(plan, inst, 1, seed=9)
    x, events, _ = plan.draw(9, 0)
    assert np.array_equal(stats.per_variable_mean, x)
    assert stats.mean_events == events
    assert not stats.per_variable_stderr.any()
    with pytest.raises(ValueError):
        run_plan(plan, inst, 0, seed=9)


def test_thread_count_does_not_change_results(relax20):
    inst, xhat, params = relax20
    plan = RoundingPlan(inst, xhat, params)
    a = run_plan(plan, inst, 3000, 5, tail_queries=[(0, 2.0)], joint_sets=[(0, 1)], threads=1)
    b = run_plan(plan, inst, 3000, 5, tail_queries=[(0, 2.0)], joint_sets=[(0, 1)], threads=4)
    assert np.array_equal(a.per_variable_mean, b.per_variable_mean)
    assert a.mean_events == b.mean_events
    assert np.array_equal(a.tail_freq, b.tail_freq)
    assert np.array_equal(a.joint_freq, b.joint_freq)
    assert np.array_equal(a.max_multiplicity_seen, b.max_multiplicity_seen)


def test_thread_env(monkeypatch, relax20):
    inst, xhat, params = relax20
    plan = RoundingPlan(inst, xhat, params)
    monkeypatch.setenv("CIP_ROUND_THREADS", "3")
    a = run_plan(plan, inst, 500, 1)
    monkeypatch.setenv("CIP_ROUND_THREADS", "1")
    assert np.array_equal(a.per_variable_mean, run_plan(plan, inst, 500, 1).per_variable_mean)


def test_negative_correlation_trivial_sets(relax20):
    inst, xhat, params = relax20
    assert check_negative_correlation(inst, (), 100, 0, xhat, params) == (1.0, 1.0, True)
    emp, bound, ok = check_negative_correlation(inst, (3,), 20_000, 0, xhat, params)
    assert bound == pytest.approx(marginal_bounds(inst, xhat, params)[3])
    assert ok


def test_negative_correlation_pairs(relax20):
    inst, xhat, params = relax20
    res = check_negative_correlation_many(inst, [(0, 1), (4, 9), (2, 3, 5)], 50_000, 1,
                                          xhat, params)
    assert all(ok for _, _, ok in res)


def test_negative_correlation_regime(relax20):
    inst, xhat, params = relax20
    with pytest.raises(ValueError):
        check_negative_correlation(inst, (0,), 10, 0, xhat * 10, params)


@pytest.fixture(scope="module")
def multi_objective():
    return normalize(random_instance(40, 20, 4, objectives=5))[0]


def test_tail_extremes(multi_objective):
    inst = multi_objective
    emp, bound, ok = check_tail(inst, 0, float(inst.n * 10), "plain", 2000, 0)
    assert emp == 0.0 and ok
    st = monte_carlo(inst, "plain", trials=1, seed=0)
    beta = tail_ratio("plain", compute_metrics(inst).gamma)
    mu = beta * float(inst.objectives[0] @ st.xhat)
    emp, bound, ok = check_tail(inst, 0, mu, "plain", 500, 0)
    assert bound == 1.0 and ok


def test_joint_tail_frequency(multi_objective):
    inst = multi_objective
    beta = tail_ratio("plain", compute_metrics(inst).gamma)
    xhat = monte_carlo(inst, "plain", trials=1, seed=0).xhat
    r = inst.objectives.shape[0]
    queries = []
    for l in range(r):
        mu = beta * float(inst.objectives[l] @ xhat)
        queries.append((l, mu + 3 * math.sqrt(mu * math.log(r))))
    st = monte_carlo(inst, "plain", trials=5000, seed=3, tail_queries=queries)
    assert st.joint_tail_freq >= 0.5


def test_tail_rejects_out_of_range_objective():
    inst = CipInstance.from_dense([[1.0]], [1.0], objectives=[[2.0]])
    with pytest.raises(ValueError):
        check_tails(inst, [(0, 3.0)], "plain", 10, 0)


def test_monte_carlo_modes_feasible(multi_objective):
    for mode, eps in [("plain", None), ("eps", 0.5), ("kc", None)]:
        st = monte_carlo(multi_objective, mode, eps, trials=300, seed=1)
        assert st.all_runs_feasible and st.cap_violations == 0


def test_checks_csv():
    text = checks_to_csv([("events", "x", "p", 0.1, 0.2, 1)])
    assert text.splitlines() == ["check,instance,params,empirical,bound,pass",
                                 "events,x,p,0.1,0.2,1"]
