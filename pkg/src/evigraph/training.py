"""End-to-end optimization loop, Adam, and checkpoint serialization.

Each epoch runs one full-graph forward per view, then batches the
training nodes for loss/backward/update steps. Validation accuracy is
tracked every epoch and the best-scoring parameters are returned.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .autodiff import Param
from .data import MultiViewDataset
from .errors import ContractError, DivergenceError, ValidationError
from .evidential import EvidenceNetParams
from .gnn import TemporalLayerParams, ViewEncoderParams
from .losses import LossWeights, one_hot, total_loss
from .model import (
    ForwardOutput,
    ModelDims,
    ModelParams,
    encode_all_views,
    forward_heads,
    init_params,
)
from .data import VIEW_ORDER
from .rng import SeededRng

HISTORY_COLUMNS = (
    "epoch",
    "loss_total",
    "loss_p",
    "loss_kl",
    "loss_c",
    "val_acc",
    "val_macro_f1",
    "mean_uncertainty",
    "conflict_events",
)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 2000
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    loss_scope: str = "per_view_and_combined"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: Optional[float] = 5.0
    gnn_hidden: int = 512
    embed_dim: int = 256
    evidence_hidden: int = 128

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be positive, got {self.batch_size}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValidationError("adam betas must lie in [0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValidationError("clip_norm must be positive or None")
        if self.loss_scope not in ("combined_only", "per_view_and_combined"):
            raise ValidationError(f"unknown loss_scope {self.loss_scope!r}")
        self.weights.validate()

    def model_dims(self, feature_dim: int) -> ModelDims:
        return ModelDims(
            feature_dim=feature_dim,
            gnn_hidden=self.gnn_hidden,
            embed_dim=self.embed_dim,
            evidence_hidden=self.evidence_hidden,
        )


class Adam:
    """Bias-corrected Adam over a named set of parameters."""

    def __init__(
        self,
        params: dict,
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            g = p.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / (1.0 - self.beta1**t)
            v_hat = self.v[name] / (1.0 - self.beta2**t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if not np.all(np.isfinite(p.data)):
                raise DivergenceError(f"parameter {name!r} became non-finite")


def clip_global_norm(params: dict, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params.values():
        total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params.values():
            p.grad = p.grad * scale
    return norm


@dataclass
class EpochStats:
    loss_total: float
    loss_p: float
    loss_kl: float
    loss_c: float
    conflict_events: int
    saturation_events: int


def _batch_slices(order: np.ndarray, batch_size: int) -> list:
    return [order[i : i + batch_size] for i in range(0, order.shape[0], batch_size)]


def train_epoch(
    params: ModelParams,
    dataset: MultiViewDataset,
    config: TrainConfig,
    epoch: int,
    adam: Adam,
    shuffle_rng: SeededRng,
) -> EpochStats:
    """One optimization epoch over shuffled training-node batches."""
    if dataset.split_masks is None:
        raise ContractError("dataset has no split masks")
    train_idx = dataset.split_masks.train
    labels = dataset.labels()

    embeddings = encode_all_views(params, dataset)
    order = train_idx[shuffle_rng.permutation(train_idx.shape[0])]

    totals = np.zeros(4)
    conflicts = 0
    saturations = 0
    batches = _batch_slices(order, config.batch_size)
    for batch_no, batch in enumerate(batches):
        fwd = forward_heads(params, embeddings, rows=batch, on_conflict="vacuous")
        y = one_hot(labels[batch], params.num_classes)
        loss, breakdown = total_loss(
            fwd.view_alphas,
            fwd.combined_alpha,
            y,
            fwd.row_embeddings,
            config.weights,
            epoch,
            scope=config.loss_scope,
        )
        if not np.isfinite(breakdown["total"]):
            raise DivergenceError(
                f"non-finite loss at epoch {epoch}, batch {batch_no}"
            )
        adam.zero_grad()
        loss.backward()
        if config.clip_norm is not None:
            clip_global_norm(adam.params, config.clip_norm)
        adam.step()
        totals += (
            breakdown["total"],
            breakdown["loss_p"],
            breakdown["loss_kl"],
            breakdown["loss_c"],
        )
        conflicts += fwd.conflict.substituted
        saturations += fwd.saturated
    means = totals / max(1, len(batches))
    return EpochStats(
        loss_total=float(means[0]),
        loss_p=float(means[1]),
        loss_kl=float(means[2]),
        loss_c=float(means[3]),
        conflict_events=conflicts,
        saturation_events=saturations,
    )


def evaluate_split(
    params: ModelParams, dataset: MultiViewDataset, rows: np.ndarray
) -> dict:
    """Accuracy, macro-F1 and mean combined uncertainty over given rows."""
    from .evaluate import metrics  # local import to avoid a cycle

    embeddings = encode_all_views(params, dataset)
    fwd = forward_heads(params, embeddings, rows=rows, on_conflict="vacuous")
    preds = np.argmax(fwd.combined_alpha.alpha.data, axis=1)
    labels = dataset.labels()[rows]
    scores = metrics(preds, labels, params.num_classes)
    scores["mean_uncertainty"] = float(np.mean(fwd.combined_mass.uncertainty.data))
    return scores


def fit(dataset: MultiViewDataset, config: TrainConfig) -> tuple[ModelParams, list]:
    """Train for config.epochs and return best-validation parameters + history."""
    config.validate()
    if dataset.split_masks is None:
        raise ContractError("fit requires a dataset with split masks")
    if dataset.num_classes < 2:
        raise ContractError("fit requires at least two classes")

    params = init_params(
        config.model_dims(dataset.feature_dim), dataset.num_classes, config.seed
    )
    adam = Adam(
        params.named_params(),
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
    )
    shuffle_rng = SeededRng(config.seed).spawn("shuffle")

    history: list = []
    best_acc = -1.0
    best_state = params.state_arrays()
    for epoch in range(config.epochs):
        stats = train_epoch(params, dataset, config, epoch, adam, shuffle_rng)
        val = evaluate_split(params, dataset, dataset.split_masks.val)
        history.append(
            {
                "epoch": epoch,
                "loss_total": stats.loss_total,
                "loss_p": stats.loss_p,
                "loss_kl": stats.loss_kl,
                "loss_c": stats.loss_c,
                "val_acc": val["accuracy"],
                "val_macro_f1": val["macro_f1"],
                "mean_uncertainty": val["mean_uncertainty"],
                "conflict_events": stats.conflict_events,
            }
        )
        if val["accuracy"] > best_acc:
            best_acc = val["accuracy"]
            best_state = params.state_arrays()
    params.load_state_arrays(best_state)
    return params, history


def write_history_csv(history: list, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow(
                [
                    row["epoch"],
                    repr(float(row["loss_total"])),
                    repr(float(row["loss_p"])),
                    repr(float(row["loss_kl"])),
                    repr(float(row["loss_c"])),
                    repr(float(row["val_acc"])),
                    repr(float(row["val_macro_f1"])),
                    repr(float(row["mean_uncertainty"])),
                    row["conflict_events"],
                ]
            )


# -- checkpoint serialization -------------------------------------------------

_CHECKPOINT_MAGIC = "evigraph-checkpoint v1"


def save_params(params: ModelParams, stem: Union[str, Path]) -> None:
    """Write `<stem>.manifest` (text) and `<stem>.bin` (little-endian f8)."""
    stem = Path(stem)
    named = params.named_params()
    offset = 0
    lines = [_CHECKPOINT_MAGIC]
    payload = bytearray()
    for name, p in named.items():
        arr = np.ascontiguousarray(p.data, dtype="<f8")
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"{name}\t{shape}\t{offset}")
        payload.extend(arr.tobytes())
        offset += arr.nbytes
    stem.with_suffix(".manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")
    stem.with_suffix(".bin").write_bytes(bytes(payload))


def _checkpoint_stem(path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.suffix in (".manifest", ".bin"):
        return path.with_suffix("")
    return path


def load_params(stem: Union[str, Path]) -> ModelParams:
    """Reconstruct ModelParams from the manifest + payload pair."""
    stem = _checkpoint_stem(stem)
    manifest = stem.with_suffix(".manifest").read_text(encoding="utf-8").splitlines()
    if not manifest or manifest[0] != _CHECKPOINT_MAGIC:
        raise ContractError(f"{stem}: not a checkpoint manifest")
    payload = stem.with_suffix(".bin").read_bytes()
    arrays: dict = {}
    for line in manifest[1:]:
        if not line:
            continue
        name, shape_text, offset_text = line.split("\t")
        shape = tuple(int(s) for s in shape_text.split(",") if s)
        count = int(np.prod(shape)) if shape else 1
        offset = int(offset_text)
        arr = np.frombuffer(
            payload, dtype="<f8", count=count, offset=offset
        ).reshape(shape)
        arrays[name] = np.array(arr, dtype=np.float64)

    views = {}
    for view in VIEW_ORDER:
        prefix = view.value
        try:
            enc = ViewEncoderParams(
                layer1=TemporalLayerParams(
                    W=Param(arrays[f"{prefix}.gnn1.W"]),
                    decay_w=Param(arrays[f"{prefix}.gnn1.decay_w"]),
                    decay_b=Param(arrays[f"{prefix}.gnn1.decay_b"]),
                ),
                layer2=TemporalLayerParams(
                    W=Param(arrays[f"{prefix}.gnn2.W"]),
                    decay_w=Param(arrays[f"{prefix}.gnn2.decay_w"]),
                    decay_b=Param(arrays[f"{prefix}.gnn2.decay_b"]),
                ),
            )
            head = EvidenceNetParams(
                W1=Param(arrays[f"{prefix}.head.W1"]),
                b1=Param(arrays[f"{prefix}.head.b1"]),
                W2=Param(arrays[f"{prefix}.head.W2"]),
                b2=Param(arrays[f"{prefix}.head.b2"]),
            )
        except KeyError as exc:
            raise ContractError(f"{stem}: checkpoint missing tensor {exc}") from None
        views[view] = (enc, head)

    first_enc, first_head = views[VIEW_ORDER[0]]
    dims = ModelDims(
        feature_dim=first_enc.layer1.W.shape[0],
        gnn_hidden=first_enc.layer1.W.shape[1],
        embed_dim=first_enc.layer2.W.shape[1],
        evidence_hidden=first_head.W1.shape[1],
    )
    return ModelParams(
        encoders={v: enc for v, (enc, _) in views.items()},
        heads={v: head for v, (_, head) in views.items()},
        num_classes=first_head.W2.shape[1],
        dims=dims,
    )
