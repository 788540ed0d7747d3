"""Training objectives: Cox partial likelihood, embedding orthogonalization, combination.

All losses are scalar (1, 1) tensors differentiable through the autodiff
kernel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    add_const,
    concat_cols,
    constant,
    elementwise_mul,
    exp,
    log,
    matmul,
    maximum_const,
    mul_const,
    nuclear_norm,
    sub,
    sum_all,
)
from .validation import ConfigError, SurvivalBatch, as_survival

# Additive offset pushing masked-out risk-set entries far enough below the
# per-event maximum that exp underflows to exactly 0.0.
_MASK_OFFSET = 800.0


def cox_pl_loss(theta: Tensor, survival) -> Tensor:
    """Negative Cox log partial likelihood with Breslow-style tie handling.

    For each observed event i the risk set is every patient with follow-up
    time >= t_i (ties included). The inner log-sum-exp subtracts the
    per-event risk-set maximum as a graph constant, which leaves gradients
    exact while preventing overflow.

    An all-censored batch has no likelihood terms: the loss is a constant 0
    and a RuntimeWarning is emitted.
    """
    sb = as_survival(survival)
    n = sb.n
    if n < 2:
        raise ConfigError(f"Cox partial likelihood needs at least 2 patients, got {n}")
    if theta.value.shape != (1, n):
        raise ConfigError(
            f"theta must have shape (1, {n}) to match the survival batch, "
            f"got {theta.value.shape}"
        )
    event_idx = np.flatnonzero(sb.events == 1)
    if event_idx.size == 0:
        warnings.warn(
            "all-censored batch: Cox partial likelihood is identically 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return constant(np.zeros((1, 1)))

    risk_mask = sb.times[None, :] >= sb.times[event_idx][:, None]
    theta_row = theta.value[0]
    row_max = np.where(risk_mask, theta_row[None, :], -np.inf).max(axis=1)
    # Entries outside the risk set get an extra offset so exp underflows to
    # exact zero before the mask multiply; inside the risk set the shift is
    # the usual stabilizing maximum.
    offset = np.where(risk_mask, -row_max[:, None], -row_max[:, None] - _MASK_OFFSET
                      - np.abs(theta_row).max())

    tiled = matmul(constant(np.ones((event_idx.size, 1))), theta)
    masked = elementwise_mul(exp(add_const(tiled, offset)), constant(risk_mask.astype(float)))
    risk_sums = matmul(masked, constant(np.ones((n, 1))))
    log_sums = sum_all(log(risk_sums))

    event_vec = np.zeros((n, 1))
    event_vec[event_idx] = 1.0
    theta_events = matmul(theta, constant(event_vec))
    return add_const(sub(log_sums, theta_events), row_max.sum())


def mmo_loss(embeddings: list[Tensor], scaling: str = "difference") -> Tensor:
    """Nuclear-norm orthogonalization loss over per-modality embedding batches.

    With embeddings h_m of shape (l1, N) and their horizontal concatenation
    H of shape (l1, M*N):

        L = (1 / (M*N)) * [ sum_m max(1, ||h_m||_*) - ||H||_* ]

    The per-modality floor max(1, .) stops gradients through any branch whose
    norm has dropped below 1, preventing collapse of the embeddings. Because
    max(1, x) >= x and ||H||_* <= sum_m ||h_m||_*, the loss is nonnegative,
    reaching 0 when the embeddings' column spaces are mutually orthogonal
    (and every norm is at least 1).

    ``scaling`` selects how the 1/(M*N) factor is applied: "difference"
    scales the whole bracket (the default); "sum-only" scales only the
    per-modality sum, leaving the joint term unscaled, for fidelity
    experiments against the alternative reading of the objective.
    """
    if len(embeddings) == 0:
        raise ConfigError("mmo_loss requires at least one embedding")
    shape = embeddings[0].value.shape
    for h in embeddings:
        if h.value.ndim != 2 or h.value.shape != shape:
            raise ConfigError("mmo_loss embeddings must share one 2-d shape")
    if scaling not in ("difference", "sum-only"):
        raise ConfigError(f"unknown mmo scaling mode {scaling!r}")
    m = len(embeddings)
    n = shape[1]

    floored = [maximum_const(nuclear_norm(h), 1.0) for h in embeddings]
    total = floored[0]
    for term in floored[1:]:
        total = add(total, term)
    joint = nuclear_norm(concat_cols(list(embeddings)))
    if scaling == "difference":
        return mul_const(sub(total, joint), 1.0 / (m * n))
    return sub(mul_const(total, 1.0 / (m * n)), joint)


@dataclass(frozen=True)
class CombinedLoss:
    """Total training objective plus its parts for logging."""

    total: Tensor
    cox: float
    orthogonality: float | None

    @property
    def value(self) -> float:
        return self.total.item()


def combined_loss(theta: Tensor, survival, embeddings: list[Tensor] | None,
                  gamma: float, scaling: str = "difference") -> CombinedLoss:
    """Cox partial likelihood plus gamma times the orthogonalization loss.

    At gamma = 0 the orthogonalization term is skipped entirely (no SVDs are
    run) and the total equals the Cox loss exactly.
    """
    if gamma < 0:
        raise ConfigError(f"gamma must be nonnegative, got {gamma}")
    if gamma > 0 and not embeddings:
        raise ConfigError("gamma > 0 requires the per-modality embeddings")
    cox = cox_pl_loss(theta, survival)
    if gamma == 0:
        return CombinedLoss(total=cox, cox=cox.item(), orthogonality=None)
    ortho = mmo_loss(embeddings, scaling=scaling)
    total = add(cox, mul_const(ortho, gamma))
    return CombinedLoss(total=total, cox=cox.item(), orthogonality=ortho.item())
