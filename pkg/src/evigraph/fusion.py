"""Dempster's rule of combination over class-singleton opinions.

Two opinions are fused by multiplying agreeing focal elements and
renormalizing away the conflicting mass T. The fold over more than two
opinions is associative and commutative, so the fixed combination order
(hashtag, entity, user) is a reproducibility convention, not a modeling
choice. All arithmetic runs inside the recorded computation so gradients
flow through the combined opinion back into every view.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, mask_fill, tensor_sum
from .errors import ConflictError, ContractError
from .evidential import MassFunction

TOTAL_CONFLICT_TOL = 1e-12


@dataclass
class ConflictReport:
    """Conflict mass observed while combining opinions.

    `conflict` is the T of the final fold step (zeros for a single
    opinion); `pair_conflicts` holds one T array per fold step;
    `substituted` counts rows replaced by the vacuous opinion under
    `on_conflict="vacuous"`.
    """

    conflict: np.ndarray
    pair_conflicts: list = field(default_factory=list)
    substituted: int = 0


def combine_pair(
    m1: MassFunction, m2: MassFunction, on_conflict: str = "error"
) -> tuple[MassFunction, ConflictReport]:
    """Fuse two opinions with Dempster's rule.

    b_k = (b1_k b2_k + b1_k u2 + b2_k u1) / (1 - T), u = u1 u2 / (1 - T)
    with T the mass on disagreeing class pairs. Total conflict raises
    ConflictError, or substitutes the vacuous opinion per row when
    on_conflict="vacuous".
    """
    if on_conflict not in ("error", "vacuous"):
        raise ContractError(f"unknown conflict policy {on_conflict!r}")
    if m1.num_classes != m2.num_classes:
        raise ContractError(
            f"class counts differ: {m1.num_classes} vs {m2.num_classes}"
        )
    b1, u1 = m1.beliefs, m1.uncertainty
    b2, u2 = m2.beliefs, m2.uncertainty

    s1 = tensor_sum(b1, axis=-1, keepdims=True)
    s2 = tensor_sum(b2, axis=-1, keepdims=True)
    agree = tensor_sum(b1 * b2, axis=-1, keepdims=True)
    conflict = s1 * s2 - agree  # T, [.., 1]

    total = conflict.data >= 1.0 - TOTAL_CONFLICT_TOL
    substituted = int(np.sum(total))
    if substituted and on_conflict == "error":
        raise ConflictError(
            f"total conflict (T >= 1 - {TOTAL_CONFLICT_TOL}) in {substituted} row(s)"
        )

    denom = 1.0 - conflict
    if substituted:
        denom = mask_fill(denom, total, 1.0)
    beliefs = (b1 * b2 + b1 * u2 + b2 * u1) / denom
    uncertainty = (u1 * u2) / denom
    if substituted:
        row_mask = np.broadcast_to(total, beliefs.data.shape)
        beliefs = mask_fill(beliefs, row_mask, 0.0)
        uncertainty = mask_fill(uncertainty, total, 1.0)

    report = ConflictReport(
        conflict=conflict.data.copy(),
        pair_conflicts=[conflict.data.copy()],
        substituted=substituted,
    )
    return MassFunction(beliefs, uncertainty), report


def combine_all(
    masses: list, on_conflict: str = "error"
) -> tuple[MassFunction, ConflictReport]:
    """Left fold of combine_pair over the given opinions (at least one)."""
    if not masses:
        raise ContractError("combine_all requires at least one opinion")
    combined = masses[0]
    report = ConflictReport(conflict=np.zeros_like(combined.uncertainty.data))
    for other in masses[1:]:
        combined, step = combine_pair(combined, other, on_conflict=on_conflict)
        report.conflict = step.conflict
        report.pair_conflicts.extend(step.pair_conflicts)
        report.substituted += step.substituted
    return combined, report
