"""CRF parameters, potential computation and JSON serialisation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..conversation import LABELS, N_LABELS
from ..errors import StanceError
from .inference import Potentials, Topology

FORMAT_NAME = "stancetree-crf"
FORMAT_VERSION = 1
N_DEPTH_BUCKETS = 3  # edges leaving depth 0, depth 1, depth >= 2


class DimensionMismatch(StanceError, ValueError):
    pass


class ModelFormatError(StanceError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CrfModel:
    """Log-linear CRF weights.

    ``transition_weights`` is ``(L, L)`` indexed ``[parent_label, child_label]``,
    or ``(3, L, L)`` when transitions are bucketed by parent depth.
    """

    node_weights: np.ndarray
    transition_weights: np.ndarray
    bias: np.ndarray
    lam: float = 1.0
    feature_layout: tuple = ()
    label_order: tuple = field(default_factory=lambda: tuple(l.tag for l in LABELS))
    mode: str = "tree_crf"

    def __post_init__(self):
        L, F = self.node_weights.shape
        if self.bias.shape != (L,):
            raise DimensionMismatch(f"bias shape {self.bias.shape}, expected ({L},)")
        if self.transition_weights.shape not in ((L, L), (N_DEPTH_BUCKETS, L, L)):
            raise DimensionMismatch(f"transition shape {self.transition_weights.shape}")
        if self.feature_layout and sum(w for _, w in self.feature_layout) != F:
            raise DimensionMismatch("feature layout width does not match node weights")
        for a in (self.node_weights, self.transition_weights, self.bias):
            if not np.all(np.isfinite(a)):
                raise ValueError("model weights must be finite")

    @classmethod
    def zeros(cls, n_features: int, depth_buckets: bool = False, n_labels: int = N_LABELS, **kw):
        trans_shape = (N_DEPTH_BUCKETS, n_labels, n_labels) if depth_buckets else (n_labels, n_labels)
        return cls(np.zeros((n_labels, n_features)), np.zeros(trans_shape), np.zeros(n_labels), **kw)

    @property
    def n_features(self) -> int:
        return self.node_weights.shape[1]

    @property
    def n_labels(self) -> int:
        return self.node_weights.shape[0]

    @property
    def depth_buckets(self) -> bool:
        return self.transition_weights.ndim == 3

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "mode": self.mode,
            "label_order": list(self.label_order),
            "feature_layout": [[name, int(w)] for name, w in self.feature_layout],
            "lambda": float(self.lam),
            "node_weights": self.node_weights.tolist(),
            "transition_weights": self.transition_weights.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CrfModel":
        if d.get("format") != FORMAT_NAME:
            raise ModelFormatError(f"not a {FORMAT_NAME} document")
        if d.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model version {d.get('version')}")
        return cls(
            node_weights=np.asarray(d["node_weights"], dtype=np.float64).reshape(len(d["bias"]), -1),
            transition_weights=np.asarray(d["transition_weights"], dtype=np.float64),
            bias=np.asarray(d["bias"], dtype=np.float64),
            lam=float(d["lambda"]),
            feature_layout=tuple((name, int(w)) for name, w in d["feature_layout"]),
            label_order=tuple(d["label_order"]),
            mode=d["mode"],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CrfModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def edge_buckets(topology: Topology) -> np.ndarray:
    """Depth bucket of the edge above each node (roots get bucket 0)."""
    parent_depth = np.where(topology.parents >= 0, topology.depth - 1, 0)
    return np.minimum(parent_depth, N_DEPTH_BUCKETS - 1)


def compute_potentials(model: CrfModel, features: np.ndarray, topology: Topology) -> Potentials:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"features {X.shape} vs model width {model.n_features}")
    if X.shape[0] != len(topology):
        raise DimensionMismatch(f"{X.shape[0]} feature rows for {len(topology)} nodes")
    node = X @ model.node_weights.T + model.bias
    if model.depth_buckets:
        edge = model.transition_weights[edge_buckets(topology)]
    else:
        edge = model.transition_weights
    return Potentials(node, edge, topology)
