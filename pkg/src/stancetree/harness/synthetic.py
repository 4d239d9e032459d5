"""Planted-model conversation generator.

Labels are drawn top-down: the source from ``root_probs``, every reply from
the transition row of its parent's label.  Each tweet's text mixes words from
a label-specific vocabulary with words from a shared one, so local features
carry some (tunable) signal and the tree carries the rest.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..conversation import LABELS, N_LABELS, RumourDataset, Tweet, build_tree
from ..errors import StanceError


class InvalidSpec(StanceError, ValueError):
    pass


def diagonal_transitions(stay: float) -> tuple:
    off = (1.0 - stay) / (N_LABELS - 1)
    return tuple(tuple(stay if i == j else off for j in range(N_LABELS)) for i in range(N_LABELS))


@dataclass(frozen=True)
class SyntheticSpec:
    n_events: int = 8
    trees_per_event: int = 25
    max_depth: int = 5
    # P(number of replies = k) for k = 0, 1, 2, ...
    fanout_probs: tuple = (0.35, 0.35, 0.2, 0.1)
    max_nodes: int = 40
    root_probs: tuple = (0.55, 0.25, 0.1, 0.1)
    transitions: tuple = field(default_factory=lambda: diagonal_transitions(0.85))
    words_per_label: int = 15
    shared_words: int = 60
    label_word_prob: float = 0.3
    tweet_length: tuple = (5, 12)
    seed: int = 0

    def validate(self) -> None:
        if self.n_events < 1 or self.trees_per_event < 1:
            raise InvalidSpec("need at least one event and one tree per event")
        if self.max_depth < 0 or self.max_nodes < 1:
            raise InvalidSpec("max_depth must be >= 0 and max_nodes >= 1")
        _check_dist(self.fanout_probs, "fanout_probs")
        _check_dist(self.root_probs, "root_probs", N_LABELS)
        T = np.asarray(self.transitions, dtype=float)
        if T.shape != (N_LABELS, N_LABELS):
            raise InvalidSpec(f"transitions must be {N_LABELS}x{N_LABELS}")
        for row in T:
            _check_dist(row, "transitions row")
        if not 0.0 <= self.label_word_prob <= 1.0:
            raise InvalidSpec("label_word_prob must lie in [0, 1]")
        lo, hi = self.tweet_length
        if not 1 <= lo <= hi:
            raise InvalidSpec("tweet_length must be (lo, hi) with 1 <= lo <= hi")
        if self.words_per_label < 1 or self.shared_words < 1:
            raise InvalidSpec("vocabularies must be non-empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: [list(r) for r in v] if k == "transitions" else
                (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown synthetic spec keys: {sorted(extra)}")
        kw = {}
        for k, v in d.items():
            if k == "transitions":
                v = tuple(tuple(float(x) for x in row) for row in v)
            elif isinstance(v, list):
                v = tuple(v)
            kw[k] = v
        return cls(**kw)


def _check_dist(p, name, size: Optional[int] = None):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) == 0 or (size is not None and len(p) != size):
        raise InvalidSpec(f"{name} has the wrong shape")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidSpec(f"{name} must be a probability vector, got {p.tolist()}")


def _vocabulary(spec: SyntheticSpec):
    per_label = [[f"{l.tag}{i}" for i in range(spec.words_per_label)] for l in LABELS]
    shared = [f"w{i}" for i in range(spec.shared_words)]
    return per_label, shared


def _text(rng, label: int, per_label, shared, spec: SyntheticSpec) -> str:
    n = int(rng.integers(spec.tweet_length[0], spec.tweet_length[1] + 1))
    own = rng.random(n) < spec.label_word_prob
    words = [
        per_label[label][rng.integers(len(per_label[label]))] if o else shared[rng.integers(len(shared))]
        for o in own
    ]
    return " ".join(words)


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> RumourDataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    per_label, shared = _vocabulary(spec)
    T = np.asarray(spec.transitions, dtype=float)
    fanout = np.asarray(spec.fanout_probs, dtype=float)
    width = len(str(spec.n_events))
    trees = []
    for e in range(spec.n_events):
        event = f"event{e + 1:0{width}d}"
        for t in range(spec.trees_per_event):
            prefix = f"{event}-{t}"
            root_label = int(rng.choice(N_LABELS, p=spec.root_probs))
            tweets = [Tweet(f"{prefix}-0", _text(rng, root_label, per_label, shared, spec), None,
                            event, gold_label=LABELS[root_label], has_picture_metadata=False)]
            # breadth-first growth keeps max_nodes from starving late branches of depth
            frontier = [(tweets[0].id, root_label, 0)]
            while frontier and len(tweets) < spec.max_nodes:
                pid, plabel, depth = frontier.pop(0)
                if depth >= spec.max_depth:
                    continue
                k = int(rng.choice(len(fanout), p=fanout))
                for _ in range(k):
                    if len(tweets) >= spec.max_nodes:
                        break
                    label = int(rng.choice(N_LABELS, p=T[plabel]))
                    tid = f"{prefix}-{len(tweets)}"
                    tweets.append(Tweet(tid, _text(rng, label, per_label, shared, spec), pid, event,
                                        gold_label=LABELS[label], has_picture_metadata=False))
                    frontier.append((tid, label, depth + 1))
            trees.append(build_tree(tweets))
    return RumourDataset.from_trees(trees)


def edge_agreement(dataset: RumourDataset) -> float:
    """Fraction of reply edges whose child label equals the parent label."""
    same = total = 0
    for tree in dataset.trees():
        for parent, child in tree.edges():
            total += 1
            same += tree[parent].gold_label == tree[child].gold_label
    return same / total if total else float("nan")
