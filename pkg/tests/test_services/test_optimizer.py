# tests/test_services/test_optimizer.py

import numpy as np

from app.core import autodiff as ad
from app.schemas.training import AdamConfig
from app.services.optimizer import Adam, AdamState, adam_update


def test_first_step_moves_by_learning_rate():
    p = ad.Parameter("p", np.array([1.0, -2.0, 3.0]))
    adam_update(AdamState(), [p], {p: np.array([0.5, -4.0, 1e-3])}, lr=1e-3)
    delta = p.value - np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(np.sign(delta), [-1.0, 1.0, -1.0])
    assert np.all(np.abs(delta) <= 1e-3)
    assert np.all(np.abs(delta) >= 1e-3 * (1 - 1e-4))


def test_zero_gradient_is_fixed_point():
    p = ad.Parameter("p", np.array([0.3, 0.7]))
    opt = Adam([p])
    for _ in range(50):
        opt.step({p: np.zeros(2)})
    np.testing.assert_array_equal(p.value, [0.3, 0.7])


def test_zero_eps_zero_gradient_is_safe():
    p = ad.Parameter("p", np.array([1.0]))
    Adam([p], AdamConfig(eps=0.0)).step({p: np.zeros(1)})
    np.testing.assert_array_equal(p.value, [1.0])


def test_quadratic_bowl_converges():
    target = np.array([0.5, -1.5, 2.0])
    p = ad.Parameter("p", np.zeros(3))
    opt = Adam([p], AdamConfig(lr=0.05))
    losses = []
    for _ in range(500):
        loss = ad.mse_loss(p, target)
        losses.append(float(loss.value))
        opt.step(ad.backward(loss, wrt=[p]))
    assert losses[-1] < 1e-3 < losses[0]


def test_step_counter_shared():
    a, b = ad.Parameter("a", np.zeros(1)), ad.Parameter("b", np.zeros(1))
    opt = Adam([a, b])
    opt.step({a: np.ones(1), b: np.ones(1)})
    assert opt.state.step == 1
