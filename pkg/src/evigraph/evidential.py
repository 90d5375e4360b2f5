"""Evidence networks and subjective-logic mass functions.

A view's embedding is mapped to a non-negative per-class evidence vector
by a small ReLU network. Evidence induces a Dirichlet opinion: belief
per class plus one uncertainty mass, all summing to one; uncertainty is
inversely proportional to the total evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Param, Tensor, as_tensor, clamp_min, matmul, relu, tensor_sum
from .errors import ContractError, SaturationError

UNCERTAINTY_FLOOR = 1e-12
_MASS_ATOL = 1e-6


@dataclass
class EvidenceNetParams:
    W1: Param  # [embed_dim, hidden]
    b1: Param  # [hidden]
    W2: Param  # [hidden, num_classes]
    b2: Param  # [num_classes]

    @property
    def num_classes(self) -> int:
        return self.W2.shape[1]


def evidence(h, params: EvidenceNetParams) -> Tensor:
    """Non-negative evidence ReLU(W2 @ ReLU(W1 @ h + b1) + b2)."""
    h = as_tensor(h)
    hidden = relu(matmul(h, params.W1) + params.b1)
    return relu(matmul(hidden, params.W2) + params.b2)


@dataclass
class MassFunction:
    """Belief per class plus one uncertainty mass, summing to one."""

    beliefs: Tensor  # [K] or [n, K]
    uncertainty: Tensor  # [1] or [n, 1]

    def __post_init__(self):
        self.beliefs = as_tensor(self.beliefs)
        self.uncertainty = as_tensor(self.uncertainty)
        b, u = self.beliefs.data, self.uncertainty.data
        if u.ndim != b.ndim or u.shape[-1] != 1 or u.shape[:-1] != b.shape[:-1]:
            raise ContractError(
                f"uncertainty shape {u.shape} incompatible with beliefs {b.shape}"
            )
        if np.any(b < -_MASS_ATOL) or np.any(u < -_MASS_ATOL):
            raise ContractError("mass components must be non-negative")
        total = b.sum(axis=-1, keepdims=True) + u
        if np.any(np.abs(total - 1.0) > _MASS_ATOL):
            raise ContractError("belief masses and uncertainty must sum to one")

    @property
    def num_classes(self) -> int:
        return self.beliefs.shape[-1]


def vacuous_mass(num_classes: int, batch: int | None = None) -> MassFunction:
    """The total-ignorance opinion: zero belief, uncertainty one."""
    if batch is None:
        return MassFunction(Tensor(np.zeros(num_classes)), Tensor(np.ones(1)))
    return MassFunction(
        Tensor(np.zeros((batch, num_classes))), Tensor(np.ones((batch, 1)))
    )


@dataclass
class DirichletParams:
    """Concentration parameters, every component at least one."""

    alpha: Tensor  # [K] or [n, K]

    def __post_init__(self):
        self.alpha = as_tensor(self.alpha)
        if np.any(self.alpha.data < 1.0 - 1e-9):
            raise ContractError("concentration parameters must be >= 1")

    @property
    def num_classes(self) -> int:
        return self.alpha.shape[-1]

    def strength(self) -> Tensor:
        return tensor_sum(self.alpha, axis=-1, keepdims=True)

    def expected_probabilities(self) -> np.ndarray:
        a = self.alpha.data
        return a / a.sum(axis=-1, keepdims=True)


def mass_from_evidence(e) -> tuple[MassFunction, DirichletParams]:
    """Opinion and Dirichlet parameters induced by an evidence vector.

    alpha = e + 1, S = sum(alpha), belief = e / S, uncertainty = K / S.
    """
    e = as_tensor(e)
    if np.any(e.data < 0):
        raise ContractError("evidence must be non-negative")
    num_classes = e.shape[-1]
    alpha = e + 1.0
    strength = tensor_sum(alpha, axis=-1, keepdims=True)
    beliefs = e / strength
    uncertainty = float(num_classes) / strength
    return MassFunction(beliefs, uncertainty), DirichletParams(alpha)


def dirichlet_from_mass(
    mass: MassFunction, num_classes: int, clamp: bool = False
) -> DirichletParams:
    """Dirichlet parameters alpha_k = b_k * K / u + 1 of a (combined) opinion.

    A near-dogmatic opinion (u at or below the floor) raises
    SaturationError unless `clamp` is set, in which case u is floored and
    the caller should count the event.
    """
    u = mass.uncertainty.data
    if np.any(u <= UNCERTAINTY_FLOOR) and not clamp:
        raise SaturationError(
            "combined opinion is near-dogmatic (uncertainty at floor); "
            "pass clamp=True to proceed"
        )
    safe_u = clamp_min(mass.uncertainty, UNCERTAINTY_FLOOR)
    alpha = mass.beliefs * (float(num_classes) / safe_u) + 1.0
    return DirichletParams(alpha)


def saturation_count(mass: MassFunction) -> int:
    """How many rows of the opinion sit at or below the uncertainty floor."""
    return int(np.sum(mass.uncertainty.data <= UNCERTAINTY_FLOOR))
