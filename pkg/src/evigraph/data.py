"""Message records, view co-occurrence graphs and dataset handling.

A dataset is a list of messages plus one undirected graph per view
(hashtag / entity / user): two messages are connected in a view when
they share at least one element of that kind. Graphs are stored in
compressed sparse row form together with the absolute time gap of each
stored edge.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Optional, Union

import numpy as np

from .errors import ContractError, ParseError, SchemaError, ValidationError
from .rng import SeededRng

CLIQUE_WARN_THRESHOLD = 500


class ViewKind(Enum):
    HASHTAG = "hashtag"
    ENTITY = "entity"
    USER = "user"

    def elements_of(self, message: "Message") -> frozenset:
        if self is ViewKind.HASHTAG:
            return message.hashtags
        if self is ViewKind.ENTITY:
            return message.entities
        return message.users


#: Fixed view ordering used everywhere (iteration, fusion fold, output columns).
VIEW_ORDER = (ViewKind.HASHTAG, ViewKind.ENTITY, ViewKind.USER)


@dataclass
class Message:
    id: str
    time_days: float
    hashtags: frozenset
    entities: frozenset
    users: frozenset
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.hashtags = frozenset(self.hashtags)
        self.entities = frozenset(self.entities)
        self.users = frozenset(self.users)
        self.features = np.asarray(self.features, dtype=np.float64)
        if not np.isfinite(self.time_days):
            raise SchemaError(f"message {self.id!r}: non-finite timestamp")


@dataclass
class ViewGraph:
    """Undirected co-occurrence graph in CSR form, stored symmetrically."""

    view: ViewKind
    node_count: int
    indptr: np.ndarray  # int64, length node_count + 1
    indices: np.ndarray  # int64, both directions of every edge
    edge_dt: np.ndarray  # float64, |t_i - t_j| aligned with indices

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]

    def neighbor_dt(self, node: int) -> np.ndarray:
        return self.edge_dt[self.indptr[node] : self.indptr[node + 1]]

    @property
    def edge_count(self) -> int:
        """Number of undirected edges."""
        return int(self.indices.shape[0]) // 2

    def undirected_edges(self) -> Iterable[tuple[int, int, float]]:
        """Yield each undirected edge once as (i, j, dt) with i < j."""
        for i in range(self.node_count):
            for k in range(self.indptr[i], self.indptr[i + 1]):
                j = int(self.indices[k])
                if i < j:
                    yield i, j, float(self.edge_dt[k])

    def message_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Directed aggregation edges (source, target, dt) with self-loops.

        Self-loops (dt = 0) come first so every node has at least one
        incoming message; the stored CSR edges follow in target-major
        order. The result is cached.
        """
        cached = getattr(self, "_message_edges", None)
        if cached is None:
            n = self.node_count
            loops = np.arange(n, dtype=np.int64)
            degrees = np.diff(self.indptr)
            tgt = np.concatenate([loops, np.repeat(loops, degrees)])
            src = np.concatenate([loops, self.indices])
            dt = np.concatenate([np.zeros(n), self.edge_dt])
            cached = (src, tgt, dt)
            object.__setattr__(self, "_message_edges", cached)
        return cached


@dataclass
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass
class MultiViewDataset:
    messages: list
    graphs: dict
    num_classes: int
    feature_dim: int
    split_masks: Optional[SplitMasks] = None

    def __post_init__(self):
        for view, graph in self.graphs.items():
            if graph.node_count != len(self.messages):
                raise ContractError(
                    f"{view.value} graph has {graph.node_count} nodes for "
                    f"{len(self.messages)} messages"
                )

    def __len__(self) -> int:
        return len(self.messages)

    def feature_matrix(self) -> np.ndarray:
        if not self.messages:
            return np.zeros((0, self.feature_dim))
        return np.stack([m.features for m in self.messages])

    def labels(self) -> np.ndarray:
        """Per-message labels, -1 where unlabeled."""
        return np.array(
            [-1 if m.label is None else m.label for m in self.messages],
            dtype=np.int64,
        )

    def times(self) -> np.ndarray:
        return np.array([m.time_days for m in self.messages], dtype=np.float64)


def build_view_graph(
    messages: list,
    view: ViewKind,
    clique_warn_threshold: int = CLIQUE_WARN_THRESHOLD,
) -> ViewGraph:
    """Connect every pair of messages sharing an element of the given view.

    Builds an inverted index element -> message list, expands each
    element's clique, and dedupes pairs so that multiple shared elements
    still yield a single unweighted edge.
    """
    index: dict = {}
    for i, message in enumerate(messages):
        for element in sorted(view.elements_of(message)):
            index.setdefault(element, []).append(i)

    pairs: set = set()
    for element in sorted(index):
        members = index[element]
        if len(members) > clique_warn_threshold:
            warnings.warn(
                f"{view.value} element {element!r} connects {len(members)} "
                f"messages (> {clique_warn_threshold}); clique expansion may be large"
            )
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.add((members[a], members[b]))

    n = len(messages)
    neighbor_lists: list = [[] for _ in range(n)]
    for i, j in pairs:
        neighbor_lists[i].append(j)
        neighbor_lists[j].append(i)

    degrees = np.array([len(lst) for lst in neighbor_lists], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(degrees)])
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    for i, lst in enumerate(neighbor_lists):
        indices[indptr[i] : indptr[i + 1]] = sorted(lst)

    times = np.array([m.time_days for m in messages], dtype=np.float64)
    rows = np.repeat(np.arange(n, dtype=np.int64), degrees)
    edge_dt = np.abs(times[rows] - times[indices]) if n else np.zeros(0)
    return ViewGraph(view, n, indptr, indices, edge_dt)


def _build_all_graphs(messages: list) -> dict:
    return {view: build_view_graph(messages, view) for view in VIEW_ORDER}


_RECORD_FIELDS = {"id", "t", "hashtags", "entities", "users", "label", "x"}


def _parse_record(obj, line_no: int) -> Message:
    if not isinstance(obj, dict):
        raise SchemaError(f"line {line_no}: record is not an object")
    unknown = set(obj) - _RECORD_FIELDS
    if unknown:
        raise SchemaError(f"line {line_no}: unknown fields {sorted(unknown)}")
    missing = _RECORD_FIELDS - set(obj)
    if missing:
        raise SchemaError(f"line {line_no}: missing fields {sorted(missing)}")
    if not isinstance(obj["id"], str):
        raise SchemaError(f"line {line_no}: id must be a string")
    if not isinstance(obj["t"], (int, float)) or isinstance(obj["t"], bool):
        raise SchemaError(f"line {line_no}: t must be a number")
    for key in ("hashtags", "entities", "users"):
        values = obj[key]
        if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
            raise SchemaError(f"line {line_no}: {key} must be an array of strings")
    label = obj["label"]
    if label is not None and (not isinstance(label, int) or isinstance(label, bool)):
        raise SchemaError(f"line {line_no}: label must be an integer or null")
    if label is not None and label < 0:
        raise SchemaError(f"line {line_no}: label must be non-negative")
    x = obj["x"]
    if not isinstance(x, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        raise SchemaError(f"line {line_no}: x must be an array of numbers")
    try:
        return Message(
            id=obj["id"],
            time_days=float(obj["t"]),
            hashtags=frozenset(obj["hashtags"]),
            entities=frozenset(obj["entities"]),
            users=frozenset(obj["users"]),
            features=np.asarray(x, dtype=np.float64),
            label=label,
        )
    except SchemaError as exc:
        raise SchemaError(f"line {line_no}: {exc}") from None


def ingest_jsonl(path: Union[str, Path]) -> MultiViewDataset:
    """Load a line-delimited dataset file and build all three view graphs."""
    messages: list = []
    seen_ids: set = set()
    feature_dim: Optional[int] = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                raise ParseError(f"line {line_no}: blank line")
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            message = _parse_record(obj, line_no)
            if message.id in seen_ids:
                raise SchemaError(f"line {line_no}: duplicate id {message.id!r}")
            seen_ids.add(message.id)
            if feature_dim is None:
                feature_dim = message.features.shape[0]
            elif message.features.shape[0] != feature_dim:
                raise SchemaError(
                    f"line {line_no}: feature dimension {message.features.shape[0]} "
                    f"!= {feature_dim}"
                )
            messages.append(message)

    labels = [m.label for m in messages if m.label is not None]
    num_classes = max(labels) + 1 if labels else 0
    return MultiViewDataset(
        messages=messages,
        graphs=_build_all_graphs(messages),
        num_classes=num_classes,
        feature_dim=feature_dim if feature_dim is not None else 0,
    )


def write_jsonl(dataset: MultiViewDataset, path: Union[str, Path]) -> None:
    """Write the dataset in the ingestion schema (element sets sorted)."""
    with open(path, "w", encoding="utf-8") as handle:
        for message in dataset.messages:
            record = {
                "id": message.id,
                "t": float(message.time_days),
                "hashtags": sorted(message.hashtags),
                "entities": sorted(message.entities),
                "users": sorted(message.users),
                "label": message.label,
                "x": [float(v) for v in message.features],
            }
            handle.write(json.dumps(record) + "\n")


def export_edges(dataset: MultiViewDataset, handle: IO[str]) -> None:
    """Debug edge-list dump: one line per undirected edge, per view."""
    for view in VIEW_ORDER:
        graph = dataset.graphs[view]
        for i, j, dt in graph.undirected_edges():
            handle.write(
                f"{view.value}\t{dataset.messages[i].id}\t"
                f"{dataset.messages[j].id}\t{dt!r}\n"
            )


def split(
    dataset: MultiViewDataset,
    ratios: tuple[float, float, float],
    seed: int,
) -> SplitMasks:
    """Stratified train/val/test index masks over the labeled messages.

    Classes with at least 3 members contribute at least one member to
    every split; smaller classes go entirely to train.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got sum {sum(ratios)!r}")

    labels = dataset.labels()
    rng = SeededRng(seed).spawn("split")
    train: list = []
    val: list = []
    test: list = []
    for cls in range(dataset.num_classes):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            continue
        shuffled = members[rng.permutation(members.size)]
        n = members.size
        if n < 3:
            train.extend(shuffled.tolist())
            continue
        n_test = max(1, int(np.floor(n * ratios[2])))
        n_val = max(1, int(np.floor(n * ratios[1])))
        if n - n_val - n_test < 1:
            n_val = n - n_test - 1
        test.extend(shuffled[:n_test].tolist())
        val.extend(shuffled[n_test : n_test + n_val].tolist())
        train.extend(shuffled[n_test + n_val :].tolist())

    return SplitMasks(
        train=np.array(sorted(train), dtype=np.int64),
        val=np.array(sorted(val), dtype=np.int64),
        test=np.array(sorted(test), dtype=np.int64),
    )
