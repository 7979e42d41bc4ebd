"""Tests for the optimizers"""

import numpy as np
import pytest

from stnlab_common.errors import RejectedInputError
from stnlab_core.optim import Adam, SGDMomentum, make_optimizer
from stnlab_core.tensor import Tensor


def quadratic_step(optimizer, param):
    param.grad = 2.0 * param.data
    optimizer.step()
    optimizer.zero_grad()


def test_sgd_momentum_update_rule():
    """Test two momentum steps by hand"""
    param = Tensor(np.array([1.0]), requires_grad=True)
    sgd = SGDMomentum({"p": param}, learning_rate=0.1, momentum=0.5)
    quadratic_step(sgd, param)
    assert param.data[0] == pytest.approx(0.8)
    quadratic_step(sgd, param)
    assert param.data[0] == pytest.approx(0.8 - 0.1 * (0.5 * 2.0 + 1.6))
    assert param.grad is None


def test_adam_first_step_is_learning_rate():
    """Test bias correction makes the first step lr * sign(g)"""
    param = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    adam = Adam({"p": param}, learning_rate=0.01)
    quadratic_step(adam, param)
    np.testing.assert_allclose(param.data, [2.99, -1.99], atol=1e-8)


def test_optimizers_descend_a_quadratic():
    """Test both optimizers approach the minimum"""
    for kind in ("adam", "sgd_momentum"):
        param = Tensor(np.array([5.0, -4.0]), requires_grad=True)
        optimizer = make_optimizer(kind, {"p": param}, learning_rate=0.05)
        for _ in range(300):
            quadratic_step(optimizer, param)
        assert np.abs(param.data).max() < 0.25


def test_parameters_without_grad_are_skipped():
    """Test a parameter with no gradient stays put"""
    param = Tensor(np.array([1.0]), requires_grad=True)
    make_optimizer("adam", {"p": param}, 0.1).step()
    assert param.data[0] == 1.0


def test_bad_optimizer_settings():
    """Test unknown kinds and non-positive rates"""
    with pytest.raises(RejectedInputError):
        make_optimizer("rmsprop", {}, 0.1)
    with pytest.raises(RejectedInputError):
        SGDMomentum({}, learning_rate=0.0)
