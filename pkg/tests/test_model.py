import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cipround.model import (CipInstance, check_cover, check_multiplicity, compute_metrics,
                            dump_instance, fractional_solution, integral_solution,
                            load_instance, validate_instance, violated_rows)


def test_minimal_instance_is_valid():
    inst = CipInstance.from_dense([[1.0]], [1.0], [None], [[1.0]])
    assert validate_instance(inst) == []


def test_oversize_coefficient_reported():
    inst = CipInstance.from_dense([[1.5]], [1.0])
    assert validate_instance(inst) == ["A[0,0]=1.5 exceeds 1"]


def test_zero_rhs_reported():
    inst = CipInstance.from_dense([[1.0]], [0.0])
    assert validate_instance(inst) == ["a[0] must be > 0"]


def test_bad_multiplicity_and_objective_reported():
    inst = CipInstance.from_rows(2, [[(0, 1.0), (1, 0.5)]], [1.0], [0.5, None], [[1.0, -1.0]])
    msgs = validate_instance(inst)
    assert any("d[0]" in s for s in msgs)
    assert any("objective" in s for s in msgs)


def test_metrics_two_halves():
    inst = CipInstance.from_dense([[0.5], [0.5]], [1.0, 1.0])
    met = compute_metrics(inst)
    assert met.delta1 == 1.0 and met.delta0 == 2 and met.a_min == 1.0


def test_metrics_identity(identity3):
    met = compute_metrics(identity3)
    assert met.delta0 == 1 and met.delta1 == 1.0
    assert met.gamma == pytest.approx(math.log(2), rel=1e-15)
    assert met.gamma0 == pytest.approx(math.log(2), rel=1e-15)


def test_metrics_set_cover_encoding():
    # sets of size at most n - 1 over n elements, unit demands
    n = 5
    sets = [[0, 1, 2, 3], [1, 2], [3, 4], [0, 4, 2]]
    rows = [[(j, 1.0) for j, s in enumerate(sets) if e in s] for e in range(n)]
    inst = CipInstance.from_rows(len(sets), rows, [1.0] * n)
    met = compute_metrics(inst)
    assert met.delta0 == met.delta1 == max(len(s) for s in sets) <= n - 1
    assert met.a_min == 1.0


def test_metrics_degenerate():
    with pytest.raises(ValueError, match="degenerate matrix"):
        compute_metrics(CipInstance.from_rows(2, [[]], [1.0]))
    with pytest.raises(ValueError, match="degenerate matrix"):
        compute_metrics(CipInstance.from_rows(0, [], []))


def test_check_cover_examples(identity3):
    assert check_cover(identity3, [1, 1, 1])
    assert not check_cover(identity3, [0, 0, 0])
    inst = CipInstance.from_dense([[0.4, 0.7]], [1.0])
    assert check_cover(inst, [1, 1])
    assert violated_rows(inst, [1, 0]) == [0]


def test_check_cover_length_mismatch(identity3):
    with pytest.raises(ValueError):
        check_cover(identity3, [1, 1])


def test_check_multiplicity():
    inst = CipInstance.from_dense([[1.0, 1.0]], [1.0], [1, None])
    assert check_multiplicity(inst, [1, 7])
    assert not check_multiplicity(inst, [2, 0])


def test_fractional_solution_revalidates():
    inst = CipInstance.from_dense([[1.0]], [1.0], [1])
    assert fractional_solution(inst, [1.0], "basic-boxed").value == 1.0
    with pytest.raises(ValueError):
        fractional_solution(inst, [0.5])
    with pytest.raises(ValueError):
        fractional_solution(inst, [2.0], "basic-boxed")


def test_integral_solution_all_objectives():
    inst = CipInstance.from_dense([[1.0, 1.0]], [1.0], objectives=[[1.0, 2.0], [3.0, 0.0]])
    sol = integral_solution(inst, [1, 1])
    assert sol.objective_values.tolist() == [3.0, 3.0]


def test_json_round_trip(tmp_path):
    inst = CipInstance.from_rows(3, [[(0, 0.5), (2, 1.0)], [(1, 0.25)]], [1.0, 2.0],
                                 [1, None, 3], [[1, 2, 3], [0, 0, 1]])
    path = tmp_path / "inst.json"
    dump_instance(inst, path)
    back = load_instance(path)
    assert back.to_json_dict() == inst.to_json_dict()
    assert math.isinf(back.d[1])


def test_instance_is_immutable(identity3):
    with pytest.raises(ValueError):
        identity3.a[0] = 5.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.floats(0.05, 1.0), st.data())
def test_metrics_scale_consistent(n, m, c, data):
    vals = data.draw(st.lists(st.floats(0.01, 1.0), min_size=n * m, max_size=n * m))
    a = data.draw(st.lists(st.floats(0.1, 5.0), min_size=m, max_size=m))
    A = np.array(vals).reshape(m, n)
    base = compute_metrics(CipInstance.from_dense(A, a))
    scaled = compute_metrics(CipInstance.from_dense(A * c, np.array(a) * c))
    assert scaled.delta1 == pytest.approx(c * base.delta1, rel=1e-12)
    assert scaled.a_min == pytest.approx(c * base.a_min, rel=1e-12)
    assert scaled.gamma == pytest.approx(math.log(c * base.delta1 + 1) / (c * base.a_min), rel=1e-12)
    assert base.delta1 <= base.delta0


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_check_cover_monotone(data):
    n = data.draw(st.integers(1, 5))
    m = data.draw(st.integers(1, 4))
    vals = data.draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.7, 1.0]), min_size=n * m,
                              max_size=n * m))
    A = np.array(vals).reshape(m, n)
    A[:, 0] = np.maximum(A[:, 0], 0.1)
    a = data.draw(st.lists(st.floats(0.1, 3.0), min_size=m, max_size=m))
    inst = CipInstance.from_dense(A, a)
    x = np.array(data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))
    y = x + np.array(data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
    if check_cover(inst, x):
        assert check_cover(inst, y)
