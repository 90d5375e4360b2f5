"""Model parameters and full-pipeline forward helpers.

One encoder and one evidence network per view; parameters are flat
`Param` leaves addressable by stable dotted names for optimization and
serialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Param, Tensor, gather_rows
from .data import VIEW_ORDER, MultiViewDataset, ViewKind
from .errors import ValidationError
from .evidential import (
    DirichletParams,
    EvidenceNetParams,
    MassFunction,
    dirichlet_from_mass,
    evidence,
    mass_from_evidence,
    saturation_count,
)
from .fusion import ConflictReport, combine_all
from .gnn import TemporalLayerParams, ViewEncoderParams, encode_view
from .rng import SeededRng


@dataclass
class ModelDims:
    feature_dim: int
    gnn_hidden: int = 512
    embed_dim: int = 256
    evidence_hidden: int = 128

    def validate(self) -> None:
        if min(self.feature_dim, self.gnn_hidden, self.embed_dim, self.evidence_hidden) < 1:
            raise ValidationError(f"all model dimensions must be positive: {self}")


@dataclass
class ModelParams:
    encoders: dict  # ViewKind -> ViewEncoderParams
    heads: dict  # ViewKind -> EvidenceNetParams
    num_classes: int
    dims: ModelDims

    def named_params(self) -> dict:
        """Flat name -> Param map in a stable order."""
        out: dict = {}
        for view in VIEW_ORDER:
            enc = self.encoders[view]
            for layer_name, layer in (("gnn1", enc.layer1), ("gnn2", enc.layer2)):
                out[f"{view.value}.{layer_name}.W"] = layer.W
                out[f"{view.value}.{layer_name}.decay_w"] = layer.decay_w
                out[f"{view.value}.{layer_name}.decay_b"] = layer.decay_b
            head = self.heads[view]
            out[f"{view.value}.head.W1"] = head.W1
            out[f"{view.value}.head.b1"] = head.b1
            out[f"{view.value}.head.W2"] = head.W2
            out[f"{view.value}.head.b2"] = head.b2
        return out

    def state_arrays(self) -> dict:
        return {name: p.data.copy() for name, p in self.named_params().items()}

    def load_state_arrays(self, state: dict) -> None:
        for name, param in self.named_params().items():
            param.data = np.array(state[name], dtype=np.float64)


def _glorot(rng: SeededRng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _init_layer(rng: SeededRng, d_in: int, d_out: int) -> TemporalLayerParams:
    return TemporalLayerParams(
        W=Param(_glorot(rng, d_in, d_out)),
        decay_w=Param(_glorot(rng, d_in, 1)),
        decay_b=Param(np.zeros(1)),
    )


def init_params(dims: ModelDims, num_classes: int, seed: int) -> ModelParams:
    """Fan-bounded uniform weights, zero biases, deterministic under seed."""
    dims.validate()
    if num_classes < 2:
        raise ValidationError(f"need at least 2 classes, got {num_classes}")
    rng = SeededRng(seed).spawn("init")
    encoders: dict = {}
    heads: dict = {}
    for view in VIEW_ORDER:
        encoders[view] = ViewEncoderParams(
            layer1=_init_layer(rng, dims.feature_dim, dims.gnn_hidden),
            layer2=_init_layer(rng, dims.gnn_hidden, dims.embed_dim),
        )
        heads[view] = EvidenceNetParams(
            W1=Param(_glorot(rng, dims.embed_dim, dims.evidence_hidden)),
            b1=Param(np.zeros(dims.evidence_hidden)),
            W2=Param(_glorot(rng, dims.evidence_hidden, num_classes)),
            b2=Param(np.zeros(num_classes)),
        )
    return ModelParams(encoders=encoders, heads=heads, num_classes=num_classes, dims=dims)


def encode_all_views(params: ModelParams, dataset: MultiViewDataset) -> dict:
    """Full-graph embeddings per view (ViewKind -> Tensor[n, embed_dim])."""
    X = Tensor(dataset.feature_matrix())
    return {
        view: encode_view(dataset.graphs[view], X, params.encoders[view])
        for view in VIEW_ORDER
    }


@dataclass
class ForwardOutput:
    view_masses: list  # MassFunction per view, VIEW_ORDER
    view_alphas: list  # DirichletParams per view
    combined_mass: MassFunction
    combined_alpha: DirichletParams
    conflict: ConflictReport
    saturated: int
    row_embeddings: list  # Tensor per view, rows of this batch


def forward_heads(
    params: ModelParams,
    embeddings: dict,
    rows: np.ndarray | None = None,
    on_conflict: str = "vacuous",
) -> ForwardOutput:
    """Evidence, opinions and the fused opinion for a batch of rows."""
    row_embeddings = []
    view_masses = []
    view_alphas = []
    for view in VIEW_ORDER:
        h = embeddings[view]
        if rows is not None:
            h = gather_rows(h, rows)
        mass, alpha = mass_from_evidence(evidence(h, params.heads[view]))
        row_embeddings.append(h)
        view_masses.append(mass)
        view_alphas.append(alpha)
    combined_mass, conflict = combine_all(view_masses, on_conflict=on_conflict)
    saturated = saturation_count(combined_mass)
    combined_alpha = dirichlet_from_mass(
        combined_mass, params.num_classes, clamp=True
    )
    return ForwardOutput(
        view_masses=view_masses,
        view_alphas=view_alphas,
        combined_mass=combined_mass,
        combined_alpha=combined_alpha,
        conflict=conflict,
        saturated=saturated,
        row_embeddings=row_embeddings,
    )
