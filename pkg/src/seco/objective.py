"""Invariance / variance / covariance objective on paired embeddings.

The invariance term pulls each context read-out toward its target
projection; the variance term hinges per-dimension standard deviation
toward a floor so embeddings cannot collapse; the covariance term
penalizes squared off-diagonal covariance so dimensions decorrelate.
Variance and covariance are computed on both matrices and summed.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

__all__ = [
    "LossWeights",
    "InsufficientBatchError",
    "mse_loss",
    "variance_loss",
    "covariance_loss",
    "total_loss",
]


class InsufficientBatchError(ValueError):
    """Variance and covariance need at least two rows."""


@dataclass
class LossWeights:
    """Term weights and variance-hinge shape.

    ``halve_var`` multiplies the summed variance term by 1/2, matching a
    published pseudocode variant; off by default.
    """

    alpha: float = 25.0
    beta: float = 25.0
    gamma: float = 1.0
    var_target: float = 1.0
    var_eps: float = 1.0e-4
    halve_var: bool = False

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be non-negative")
        if self.var_target <= 0 or self.var_eps <= 0:
            raise ValueError("var_target and var_eps must be positive")


def _check_matrix(s: torch.Tensor, name: str) -> None:
    if s.ndim != 2:
        raise ValueError(f"{name} must be 2D (batch, dim), got {tuple(s.shape)}")


def mse_loss(s_c: torch.Tensor, s_t: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of squared euclidean row distance."""
    _check_matrix(s_c, "s_c")
    _check_matrix(s_t, "s_t")
    if s_c.shape != s_t.shape:
        raise ValueError(f"shape mismatch: {tuple(s_c.shape)} vs {tuple(s_t.shape)}")
    return ((s_c - s_t) ** 2).sum(dim=1).mean()


def variance_loss(
    s: torch.Tensor, target: float = 1.0, eps: float = 1.0e-4
) -> torch.Tensor:
    """Hinge on per-dimension std: mean(max(0, target - sqrt(var + eps))).

    Uses the unbiased variance estimate; raises for batches smaller
    than two.
    """
    _check_matrix(s, "s")
    if s.shape[0] < 2:
        raise InsufficientBatchError(f"need at least 2 rows, got {s.shape[0]}")
    var = s.var(dim=0, unbiased=True)
    return torch.relu(target - torch.sqrt(var + eps)).mean()


def covariance_loss(s: torch.Tensor) -> torch.Tensor:
    """Sum of squared off-diagonal covariance entries, scaled by 1/dim."""
    _check_matrix(s, "s")
    n, h = s.shape
    if n < 2:
        raise InsufficientBatchError(f"need at least 2 rows, got {n}")
    centered = s - s.mean(dim=0, keepdim=True)
    cov = centered.T @ centered / (n - 1)
    off = cov - torch.diag(torch.diag(cov))
    return (off**2).sum() / h


def total_loss(
    s_c: torch.Tensor, s_t: torch.Tensor, weights: LossWeights
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted total plus an unweighted per-term breakdown."""
    weights.validate()
    mse = mse_loss(s_c, s_t)
    var = variance_loss(s_c, weights.var_target, weights.var_eps) + variance_loss(
        s_t, weights.var_target, weights.var_eps
    )
    if weights.halve_var:
        var = var / 2
    cov = covariance_loss(s_c) + covariance_loss(s_t)
    total = weights.alpha * mse + weights.beta * var + weights.gamma * cov
    parts = {
        "total": float(total.detach()),
        "mse": float(mse.detach()),
        "var": float(var.detach()),
        "cov": float(cov.detach()),
    }
    return total, parts
