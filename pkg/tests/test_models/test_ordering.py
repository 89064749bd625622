# tests/test_models/test_ordering.py - Orderings, scaling tensors and the subsumption property

import numpy as np
import pytest

from app.core.exceptions import ContractError
from app.core.rng import Rng
from app.models.multitask import Mode, forward_parallel, forward_permuted, forward_soft
from app.models.ordering import (
    Gate, OrderingMode, OrderingSpec, initial_logits, one_hot_scaling, sample_permutations,
    scaling_from_logits, validate_permutation,
)
from tests.conftest import make_dense_model


def test_validate_permutation_rejects_repeats():
    assert validate_permutation([2, 0, 1], 3) == (2, 0, 1)
    with pytest.raises(ContractError):
        validate_permutation([0, 0, 1], 3)
    with pytest.raises(ContractError):
        validate_permutation([0, 1], 3)


def test_sample_permutations_are_valid(rng):
    for perm in sample_permutations(5, 4, rng):
        assert sorted(perm) == [0, 1, 2, 3]


def test_uniform_init_gives_one_over_depth():
    for D in (1, 2, 3, 5):
        S = scaling_from_logits(initial_logits(3, D))
        np.testing.assert_array_equal(S, np.full((3, D, D), 1.0 / D))


def test_identity_member_adds_a_candidate():
    S = scaling_from_logits(initial_logits(2, 3, include_identity=True))
    assert S.shape == (2, 4, 3)
    np.testing.assert_allclose(S.sum(axis=1), np.ones((2, 3)), atol=1e-15)


def test_one_hot_scaling_marks_permutation():
    S = one_hot_scaling([(1, 0), (0, 1)])
    np.testing.assert_array_equal(S[0], [[0, 1], [1, 0]])
    np.testing.assert_array_equal(S[1], np.eye(2))


def test_permuted_mode_needs_one_permutation_per_task():
    with pytest.raises(ContractError):
        OrderingSpec(OrderingMode.PERMUTED, permutations=[(0, 1)]).validate(2, 2)


def test_sigmoid_gate_only_in_sweep_mode():
    with pytest.raises(ContractError):
        OrderingSpec(OrderingMode.SOFT, gate=Gate.SIGMOID).validate(2, 2)
    OrderingSpec(OrderingMode.SOFT, gate=Gate.SIGMOID, sweep_mode=True).validate(2, 2)


def test_identity_member_requires_soft_mode():
    with pytest.raises(ContractError):
        OrderingSpec(OrderingMode.PARALLEL, include_identity=True).validate(2, 2)


def test_description_round_trip():
    spec = OrderingSpec(OrderingMode.PERMUTED, permutations=[(1, 0), (0, 1)])
    again = OrderingSpec.from_description(spec.describe())
    assert again.permutations == [(1, 0), (0, 1)] and again.mode is OrderingMode.PERMUTED


def test_soft_with_one_hot_scales_equals_permuted():
    """Hard orderings are the one-hot corner of soft ordering"""
    for trial in range(40):
        r = Rng(trial)
        T, D, m = int(r.integers(1, 4)), int(r.integers(1, 5)), int(r.integers(1, 7))
        model = make_dense_model(OrderingMode.PERMUTED, T=T, D=D, m=m, seed=trial)
        soft = model.with_ordering(OrderingSpec(OrderingMode.SOFT))
        S = one_hot_scaling(model.ordering.permutations)
        x = r.random((5, m))
        for task in range(T):
            expected = forward_permuted(model, task, x).value
            actual = forward_soft(soft, task, x, scales=S).value
            np.testing.assert_allclose(actual, expected, rtol=0, atol=1e-9)


def test_one_hot_scales_with_identity_member_equal_permuted():
    model = make_dense_model(OrderingMode.PERMUTED, T=2, D=3, m=4, seed=5)
    soft = model.with_ordering(OrderingSpec(OrderingMode.SOFT, include_identity=True))
    S = one_hot_scaling(model.ordering.permutations, include_identity=True)
    x = Rng(9).random((3, 4))
    for task in range(2):
        np.testing.assert_allclose(forward_soft(soft, task, x, scales=S).value,
                                   forward_permuted(model, task, x).value, atol=1e-9)


def test_identity_permutations_equal_parallel():
    for trial in range(20):
        r = Rng(100 + trial)
        T, D, m = int(r.integers(1, 4)), int(r.integers(1, 5)), int(r.integers(1, 7))
        parallel = make_dense_model(OrderingMode.PARALLEL, T=T, D=D, m=m, seed=trial)
        permuted = parallel.with_ordering(
            OrderingSpec(OrderingMode.PERMUTED, permutations=[tuple(range(D))] * T)
        )
        x = r.random((4, m))
        for task in range(T):
            np.testing.assert_allclose(forward_permuted(permuted, task, x).value,
                                       forward_parallel(parallel, task, x).value, rtol=0, atol=1e-12)


def test_forward_functions_check_mode():
    model = make_dense_model(OrderingMode.PARALLEL)
    with pytest.raises(ContractError):
        forward_soft(model, 0, np.zeros((1, 4)))
    with pytest.raises(ContractError):
        forward_permuted(model, 0, np.zeros((1, 4)), Mode.EVAL)
