"""Loss terms against hand-worked values and basic calculus checks."""

import math

import numpy as np
import pytest
import torch

from seco.objective import (
    InsufficientBatchError,
    LossWeights,
    covariance_loss,
    mse_loss,
    total_loss,
    variance_loss,
)


def T(rows):
    return torch.tensor(rows, dtype=torch.float64)


def test_mse_hand_value():
    s_c = T([[1.0, 2.0], [3.0, 4.0]])
    s_t = T([[0.0, 2.0], [3.0, 2.0]])
    # row squared distances: 1 and 4; mean 2.5
    assert mse_loss(s_c, s_t).item() == pytest.approx(2.5, abs=1e-12)


def test_mse_zero_for_identical():
    s = T([[0.3, -0.7], [1.1, 0.0]])
    assert mse_loss(s, s.clone()).item() == 0.0


def test_mse_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        mse_loss(T([[1.0, 2.0]]), T([[1.0, 2.0, 3.0]]))


def test_variance_hand_value():
    s = T([[0.0, 0.0], [0.2, 0.2]])
    # unbiased per-dim var = 0.02; hinge = 1 - sqrt(0.02 + 1e-4)
    want = 1.0 - math.sqrt(0.0201)
    assert variance_loss(s).item() == pytest.approx(want, abs=1e-12)


def test_variance_zero_above_target():
    s = T([[0.0, 0.0], [2.0, 2.0]])
    # per-dim std sqrt(2) > 1, hinge inactive
    assert variance_loss(s).item() == 0.0


def test_variance_uses_unbiased_estimate():
    s = T([[0.0], [1.0], [2.0]])
    var_unbiased = 1.0  # ((1)^2 + 0 + (1)^2) / (3 - 1)
    want = max(0.0, 1.0 - math.sqrt(var_unbiased + 1e-4))
    assert variance_loss(s).item() == pytest.approx(want, abs=1e-12)


def test_variance_needs_two_rows():
    with pytest.raises(InsufficientBatchError):
        variance_loss(T([[1.0, 2.0]]))


def test_covariance_hand_value():
    s = T([[1.0, 2.0], [3.0, 5.0]])
    # centered rows [[-1, -1.5], [1, 1.5]]; off-diag of C is 3 (twice)
    # sum of squares 18, divided by dim 2
    assert covariance_loss(s).item() == pytest.approx(9.0, abs=1e-12)


def test_covariance_zero_for_uncorrelated_dims():
    s = T([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    assert covariance_loss(s).item() == pytest.approx(0.0, abs=1e-12)


def test_covariance_diag_not_penalized():
    # single dimension: no off-diagonal entries at all
    s = T([[1.0], [5.0], [-2.0]])
    assert covariance_loss(s).item() == 0.0


def test_covariance_needs_two_rows():
    with pytest.raises(InsufficientBatchError):
        covariance_loss(T([[1.0, 2.0]]))


def test_total_composition_hand_value():
    s_c = T([[1.0, 2.0], [3.0, 4.0]])
    s_t = T([[0.0, 2.0], [3.0, 2.0]])
    w = LossWeights(alpha=25.0, beta=25.0, gamma=1.0)
    total, parts = total_loss(s_c, s_t, w)
    mse = mse_loss(s_c, s_t).item()
    var = variance_loss(s_c).item() + variance_loss(s_t).item()
    cov = covariance_loss(s_c).item() + covariance_loss(s_t).item()
    assert parts["mse"] == pytest.approx(mse, abs=1e-12)
    assert parts["var"] == pytest.approx(var, abs=1e-12)
    assert parts["cov"] == pytest.approx(cov, abs=1e-12)
    assert total.item() == pytest.approx(25 * mse + 25 * var + cov, abs=1e-10)


def test_halve_var_flag():
    s_c = T([[0.1, 0.0], [0.0, 0.1]])
    s_t = T([[0.2, 0.1], [0.0, 0.0]])
    plain, _ = total_loss(s_c, s_t, LossWeights(alpha=0.0, beta=1.0, gamma=0.0))
    halved, _ = total_loss(s_c, s_t, LossWeights(alpha=0.0, beta=1.0, gamma=0.0, halve_var=True))
    assert halved.item() == pytest.approx(plain.item() / 2, abs=1e-12)


def test_total_is_differentiable():
    torch.manual_seed(0)
    s_c = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    s_t = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    total, _ = total_loss(s_c, s_t, LossWeights())
    total.backward()
    assert s_c.grad is not None and torch.isfinite(s_c.grad).all()
    assert s_t.grad is not None and torch.isfinite(s_t.grad).all()


def test_collapsed_batch_is_penalized_by_variance_only():
    s = T([[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]])
    total, parts = total_loss(s, s.clone(), LossWeights(alpha=25.0, beta=25.0, gamma=1.0))
    assert parts["mse"] == 0.0
    assert parts["cov"] == 0.0
    # both matrices fully collapsed: hinge = 1 - sqrt(eps) each
    want = 2 * (1.0 - math.sqrt(1e-4))
    assert parts["var"] == pytest.approx(want, abs=1e-12)
    assert total.item() == pytest.approx(25 * want, abs=1e-10)


def test_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(alpha=-1.0).validate()
    with pytest.raises(ValueError):
        LossWeights(var_eps=0.0).validate()
