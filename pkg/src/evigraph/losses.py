"""The three-term training objective.

- Dirichlet cross-entropy: the expected cross-entropy under the opinion's
  Dirichlet, in its digamma closed form.
- Evidence adjustment: KL from the misleading part of the opinion (true
  class removed) to the uniform Dirichlet, shrinking wrong evidence.
- Consistency: the three views' batch similarity (Gram) matrices are
  pushed toward one another in squared Frobenius norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import special
from .autodiff import Tensor, as_tensor, digamma, lgamma, row_l2_normalize, tensor_sum
from .errors import ContractError, ShapeError, ValidationError
from .evidential import DirichletParams


@dataclass
class LossWeights:
    lambda_e: float = 1.0
    lambda_c: float = 5.0
    annealing_epochs: Optional[int] = None

    def validate(self) -> None:
        if self.lambda_e < 0 or self.lambda_c < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.annealing_epochs is not None and self.annealing_epochs < 1:
            raise ValidationError("annealing_epochs must be a positive integer")

    def effective_lambda_e(self, epoch: int) -> float:
        if self.annealing_epochs is None:
            return self.lambda_e
        return self.lambda_e * min(1.0, epoch / self.annealing_epochs)


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ContractError("labels out of range for one-hot encoding")
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _check_one_hot(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != num_classes:
        raise ShapeError(f"one-hot labels must be [batch, {num_classes}], got {y.shape}")
    if not np.all((y == 0.0) | (y == 1.0)) or not np.all(y.sum(axis=1) == 1.0):
        raise ContractError("labels must be one-hot rows")
    return y


def edl_prediction_loss(alpha: DirichletParams, y) -> Tensor:
    """Expected cross-entropy sum_j y_j (psi(S) - psi(alpha_j)), batch-summed."""
    y = _check_one_hot(y, alpha.num_classes)
    a = alpha.alpha
    strength = tensor_sum(a, axis=-1, keepdims=True)
    per = Tensor(y) * (digamma(strength) - digamma(a))
    return tensor_sum(per)


def misleading_alpha(alpha: DirichletParams, y) -> DirichletParams:
    """Concentrations with the true class's evidence removed (set to 1)."""
    y = _check_one_hot(y, alpha.num_classes)
    y_t = Tensor(y)
    return DirichletParams(y_t + (1.0 - y_t) * alpha.alpha)


def kl_evidence_loss(alpha_tilde: DirichletParams) -> Tensor:
    """KL from Dirichlet(alpha_tilde) to the uniform Dirichlet, batch-summed."""
    a = alpha_tilde.alpha
    num_classes = alpha_tilde.num_classes
    strength = tensor_sum(a, axis=-1, keepdims=True)
    log_beta_uniform = special.lgamma(float(num_classes))  # ln B(1) = -ln Gamma(K)
    per = (
        lgamma(strength)
        - log_beta_uniform
        - tensor_sum(lgamma(a), axis=-1, keepdims=True)
        + tensor_sum((a - 1.0) * (digamma(a) - digamma(strength)), axis=-1, keepdims=True)
    )
    return tensor_sum(per)


def consistency_loss(h_hashtag: Tensor, h_entity: Tensor, h_user: Tensor) -> Tensor:
    """Pairwise squared Frobenius distance between the views' Gram matrices."""
    views = (as_tensor(h_hashtag), as_tensor(h_entity), as_tensor(h_user))
    shapes = {v.shape for v in views}
    if len(shapes) != 1:
        raise ShapeError(f"view embeddings differ in shape: {sorted(shapes)}")
    grams = []
    for v in views:
        normed = row_l2_normalize(v)
        grams.append(normed @ normed.T)
    loss = tensor_sum((grams[0] - grams[1]) ** 2)
    loss = loss + tensor_sum((grams[0] - grams[2]) ** 2)
    return loss + tensor_sum((grams[1] - grams[2]) ** 2)


def total_loss(
    per_view_alphas: Sequence[DirichletParams],
    combined_alpha: DirichletParams,
    y,
    embeddings: Sequence[Tensor],
    weights: LossWeights,
    epoch: int,
    scope: str = "per_view_and_combined",
) -> tuple[Tensor, dict]:
    """Weighted objective and its term breakdown.

    The prediction and KL terms cover the combined opinion and, unless
    scope="combined_only", each view's own opinion as well. Breakdown
    values are the raw (unweighted) terms; they satisfy
    total = loss_p + lambda_e_eff * loss_kl + lambda_c * loss_c.
    """
    if scope not in ("combined_only", "per_view_and_combined"):
        raise ContractError(f"unknown loss scope {scope!r}")
    weights.validate()
    y = _check_one_hot(y, combined_alpha.num_classes)

    targets = [combined_alpha]
    if scope == "per_view_and_combined":
        targets.extend(per_view_alphas)

    loss_p = None
    loss_kl = None
    for alpha in targets:
        pred = edl_prediction_loss(alpha, y)
        kl = kl_evidence_loss(misleading_alpha(alpha, y))
        loss_p = pred if loss_p is None else loss_p + pred
        loss_kl = kl if loss_kl is None else loss_kl + kl

    loss_c = consistency_loss(*embeddings)
    lambda_e_eff = weights.effective_lambda_e(epoch)
    total = loss_p + lambda_e_eff * loss_kl + weights.lambda_c * loss_c
    breakdown = {
        "total": float(total.data),
        "loss_p": float(loss_p.data),
        "loss_kl": float(loss_kl.data),
        "loss_c": float(loss_c.data),
        "lambda_e_eff": lambda_e_eff,
        "lambda_c": weights.lambda_c,
    }
    return total, breakdown
