"""Time-decay attention message passing.

Each node owns an adaptive decay rate produced from its current
representation; neighbor weights fall off as exp(-rate * time_gap) and
are normalized over the neighborhood (which always includes the node
itself via an injected self-loop at time gap zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Param,
    Tensor,
    exp,
    gather_rows,
    matmul,
    relu,
    segment_sum,
    softplus,
)
from .data import ViewGraph
from .errors import ContractError, ShapeError


@dataclass
class TemporalLayerParams:
    W: Param  # shared transform, [d_in, d_out]
    decay_w: Param  # decay projection weight, [d_in, 1]
    decay_b: Param  # decay projection bias, [1]


@dataclass
class ViewEncoderParams:
    layer1: TemporalLayerParams
    layer2: TemporalLayerParams

    def __post_init__(self):
        if self.layer1.W.shape[1] != self.layer2.W.shape[0]:
            raise ShapeError(
                f"layer2 input dim {self.layer2.W.shape[0]} != layer1 "
                f"output dim {self.layer1.W.shape[1]}"
            )


def decay_rate(h, params: TemporalLayerParams) -> Tensor:
    """Strictly positive per-node decay rate softplus(h @ w + b)."""
    h = h if isinstance(h, Tensor) else Tensor(h)
    return softplus(matmul(h, params.decay_w) + params.decay_b)


def attention_weights(rate: float, dts) -> np.ndarray:
    """Normalized exp(-rate * dt) weights over one neighborhood."""
    dts = np.asarray(dts, dtype=np.float64)
    if dts.size == 0:
        raise ContractError("attention over an empty neighborhood")
    if np.any(dts < 0):
        raise ContractError("time gaps must be non-negative")
    scores = -float(rate) * dts
    scores = scores - scores.max()
    weights = np.exp(scores)
    return weights / weights.sum()


def _segment_max(values: np.ndarray, segment_ids: np.ndarray, n: int) -> np.ndarray:
    out = np.full(n, -np.inf)
    np.maximum.at(out, segment_ids, values)
    return out


def layer_forward(
    graph: ViewGraph, H: Tensor, params: TemporalLayerParams
) -> Tensor:
    """One round of time-decay attention aggregation with ReLU output."""
    if H.shape[0] != graph.node_count:
        raise ShapeError(
            f"feature rows {H.shape[0]} != graph nodes {graph.node_count}"
        )
    if H.shape[1] != params.W.shape[0]:
        raise ShapeError(
            f"feature dim {H.shape[1]} != transform input dim {params.W.shape[0]}"
        )
    n = graph.node_count
    src, tgt, dt = graph.message_edges()

    rate = decay_rate(H, params)  # [n, 1]
    scores = -(gather_rows(rate, tgt) * Tensor(dt[:, None]))  # [E, 1]
    # max-shift per target node (a constant offset cancels after normalization)
    shift = _segment_max(scores.data[:, 0], tgt, n)
    weights = exp(scores - Tensor(shift[tgt][:, None]))
    denom = segment_sum(weights, tgt, n)  # [n, 1]
    attention = weights / gather_rows(denom, tgt)  # [E, 1]

    transformed = matmul(H, params.W)  # [n, d_out]
    aggregated = segment_sum(attention * gather_rows(transformed, src), tgt, n)
    return relu(aggregated)


def layer_attention(
    graph: ViewGraph, H: Tensor, params: TemporalLayerParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Attention coefficients of one layer as plain arrays (edge, src, tgt)."""
    n = graph.node_count
    src, tgt, dt = graph.message_edges()
    rate = decay_rate(H, params).data[:, 0]
    scores = -rate[tgt] * dt
    shift = _segment_max(scores, tgt, n)
    weights = np.exp(scores - shift[tgt])
    denom = np.zeros(n)
    np.add.at(denom, tgt, weights)
    return weights / denom[tgt], src, tgt


def encode_view(graph: ViewGraph, X: Tensor, params: ViewEncoderParams) -> Tensor:
    """Two aggregation rounds producing the view embedding matrix."""
    X = X if isinstance(X, Tensor) else Tensor(X)
    return layer_forward(graph, layer_forward(graph, X, params.layer1), params.layer2)
