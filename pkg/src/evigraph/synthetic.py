"""Synthetic event-stream generation.

Each event is a class with its own Gaussian feature cluster, a temporal
burst (messages trail off exponentially after the burst center) and
private per-view element pools. Cross-event element noise swaps an
element for another event's with a configurable probability, creating
spurious inter-event edges for the fusion studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Message, MultiViewDataset, _build_all_graphs
from .errors import ValidationError
from .rng import SeededRng

_VIEW_PREFIXES = ("tag", "ent", "usr")


@dataclass
class SyntheticConfig:
    num_events: int = 6
    messages_per_event: int = 100
    feature_dim: int = 64
    class_separation: float = 3.0
    element_pool_per_event: tuple[int, int, int] = (8, 8, 8)
    cross_event_element_noise: float = 0.1
    temporal_spread_days: float = 2.0
    max_elements_per_view: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.num_events < 1:
            raise ValidationError(f"num_events must be positive, got {self.num_events}")
        if self.messages_per_event < 1:
            raise ValidationError(
                f"messages_per_event must be positive, got {self.messages_per_event}"
            )
        if self.feature_dim < 1:
            raise ValidationError(f"feature_dim must be positive, got {self.feature_dim}")
        if self.class_separation < 0:
            raise ValidationError(
                f"class_separation must be non-negative, got {self.class_separation}"
            )
        if len(self.element_pool_per_event) != 3 or any(
            p < 1 for p in self.element_pool_per_event
        ):
            raise ValidationError(
                "element_pool_per_event must be three positive counts, got "
                f"{self.element_pool_per_event}"
            )
        if not 0.0 <= self.cross_event_element_noise <= 1.0:
            raise ValidationError(
                "cross_event_element_noise must be in [0, 1], got "
                f"{self.cross_event_element_noise}"
            )
        if self.temporal_spread_days <= 0:
            raise ValidationError(
                f"temporal_spread_days must be positive, got {self.temporal_spread_days}"
            )
        if self.max_elements_per_view < 1:
            raise ValidationError(
                f"max_elements_per_view must be positive, got {self.max_elements_per_view}"
            )


def generate_synthetic(config: SyntheticConfig) -> MultiViewDataset:
    """Deterministic synthetic multi-view dataset for the given config."""
    config.validate()
    rng = SeededRng(config.seed).spawn("synthetic")
    k_events = config.num_events
    d = config.feature_dim

    # Class means sit at distance `class_separation` from the origin in
    # random directions; per-message noise is unit Gaussian.
    means = np.zeros((k_events, d))
    for event in range(k_events):
        direction = rng.normal(size=d)
        norm = np.linalg.norm(direction)
        means[event] = config.class_separation * direction / max(norm, 1e-12)

    # Bursts are spaced two spreads apart so events overlap only in tails.
    burst_centers = 2.0 * config.temporal_spread_days * np.arange(k_events)

    pools = [
        [
            [f"{prefix}{event}_{i}" for i in range(pool_size)]
            for event in range(k_events)
        ]
        for prefix, pool_size in zip(_VIEW_PREFIXES, config.element_pool_per_event)
    ]

    messages: list = []
    for event in range(k_events):
        for j in range(config.messages_per_event):
            features = means[event] + rng.normal(size=d)
            offset = min(
                rng.exponential(config.temporal_spread_days / 3.0),
                config.temporal_spread_days,
            )
            element_sets = []
            for view_idx in range(3):
                pool = pools[view_idx][event]
                count = int(rng.integers(1, config.max_elements_per_view + 1))
                chosen = []
                for pick in rng.integers(0, len(pool), size=count):
                    element = pool[int(pick)]
                    if (
                        k_events > 1
                        and rng.random() < config.cross_event_element_noise
                    ):
                        other = int(rng.integers(0, k_events - 1))
                        if other >= event:
                            other += 1
                        other_pool = pools[view_idx][other]
                        element = other_pool[int(rng.integers(0, len(other_pool)))]
                    chosen.append(element)
                element_sets.append(frozenset(chosen))
            messages.append(
                Message(
                    id=f"m{len(messages)}",
                    time_days=float(burst_centers[event] + offset),
                    hashtags=element_sets[0],
                    entities=element_sets[1],
                    users=element_sets[2],
                    features=features,
                    label=event,
                )
            )

    return MultiViewDataset(
        messages=messages,
        graphs=_build_all_graphs(messages),
        num_classes=k_events,
        feature_dim=d,
    )
