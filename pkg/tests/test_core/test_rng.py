# tests/test_core/test_rng.py

import numpy as np
import pytest

from app.core.rng import Rng


def test_same_seed_same_stream():
    a, b = Rng(42), Rng(42)
    np.testing.assert_array_equal(a.random(5), b.random(5))
    np.testing.assert_array_equal(a.permutation(10), b.permutation(10))


def test_spawn_depends_only_on_seed_and_key():
    parent = Rng(3)
    first = parent.spawn("train").random(3)
    parent.random(100)
    np.testing.assert_array_equal(first, parent.spawn("train").random(3))
    assert not np.array_equal(first, parent.spawn("model").random(3))
    assert not np.array_equal(parent.spawn("task", 0).random(3), parent.spawn("task", 1).random(3))


def test_rejects_negative_seed():
    with pytest.raises(ValueError):
        Rng(-1)


def test_reports_algorithm():
    assert Rng(0).algorithm == "PCG64"
