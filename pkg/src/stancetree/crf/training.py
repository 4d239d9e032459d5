"""Maximum-likelihood training and decoding for tree, chain and edge-free CRFs."""
from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from ..conversation import LABELS, Branch, StanceLabel
from ..errors import StanceError
from .inference import Topology, forest_max_product, forest_sum_product, labeling_score
from .model import CrfModel, DimensionMismatch, compute_potentials, edge_buckets

log = logging.getLogger(__name__)


class MissingGoldLabel(StanceError, ValueError):
    pass


class NonFiniteObjective(StanceError, FloatingPointError):
    pass


class EmptyInput(StanceError, ValueError):
    pass


class Mode(str, enum.Enum):
    TREE_CRF = "tree_crf"
    LINEAR_CRF = "linear_crf"
    MAXENT = "maxent"


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    max_iterations: int = 200
    gradient_tolerance: float = 1e-5
    step_rule: str = "backtracking"  # or "fixed"
    step_size: float = 1e-3  # used by the fixed rule only
    init: str = "zero"  # or "random"
    depth_buckets: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_iterations < 0 or self.gradient_tolerance <= 0 or self.step_size <= 0:
            raise ValueError("iteration count, tolerance and step size must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.init not in ("zero", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True, eq=False)
class Instance:
    """One labelled (or unlabelled) graph: a tree, a branch or a single tweet."""

    features: np.ndarray  # (n, F)
    parents: tuple[int, ...]
    labels: Optional[tuple[int, ...]] = None
    ids: tuple[str, ...] = ()

    def __len__(self):
        return len(self.parents)

    @classmethod
    def from_tree(cls, tree, features_by_id, labelled: bool = True) -> "Instance":
        tweets = tree.tweets()
        return cls(
            np.vstack([features_by_id[t.id] for t in tweets]),
            tuple(tree.parent_indices()),
            _labels(tweets) if labelled else None,
            tuple(t.id for t in tweets),
        )

    @classmethod
    def from_branch(cls, tree, branch: Branch, features_by_id, labelled: bool = True) -> "Instance":
        tweets = [tree[i] for i in branch.path]
        return cls(
            np.vstack([features_by_id[t.id] for t in tweets]),
            tuple(range(-1, len(tweets) - 1)),
            _labels(tweets) if labelled else None,
            tuple(branch.path),
        )

    def singletons(self) -> list["Instance"]:
        return [
            Instance(self.features[i:i + 1], (-1,),
                     None if self.labels is None else (self.labels[i],),
                     self.ids[i:i + 1])
            for i in range(len(self))
        ]


def _labels(tweets):
    if any(t.gold_label is None for t in tweets):
        return None
    return tuple(int(t.gold_label) for t in tweets)


def _strip_edges(instances: Sequence[Instance]) -> list[Instance]:
    return [s for inst in instances for s in inst.singletons()]


class _Batch:
    """All instances concatenated into one forest for vectorised passes."""

    def __init__(self, instances: Sequence[Instance], need_labels: bool = True):
        if not instances:
            raise EmptyInput("no instances")
        widths = {inst.features.shape[1] for inst in instances}
        if len(widths) != 1:
            raise DimensionMismatch(f"instances have differing feature widths {sorted(widths)}")
        self.X = np.vstack([inst.features for inst in instances]).astype(np.float64)
        self.topology = Topology.concat([inst.parents for inst in instances])
        self.sizes = [len(inst) for inst in instances]
        if need_labels:
            if any(inst.labels is None for inst in instances):
                raise MissingGoldLabel("every node needs a gold label")
            self.y = np.concatenate([np.asarray(inst.labels, dtype=np.int64) for inst in instances])
        else:
            self.y = None
        self.edge_children = self.topology.edge_children
        self.buckets = edge_buckets(self.topology)


def _objective_and_gradient(model: CrfModel, batch: _Batch, lam: float):
    pot = compute_potentials(model, batch.X, batch.topology)
    node, edge = pot.node_log_potentials, pot.edge_matrices()
    log_z, node_marg, edge_marg = forest_sum_product(node, edge, batch.topology)
    y, c = batch.y, batch.edge_children
    ll = labeling_score(node, edge, batch.topology, y) - float(log_z.sum())

    L = model.n_labels
    resid = -node_marg
    resid[np.arange(len(y)), y] += 1.0
    g_w = resid.T @ batch.X
    g_b = resid.sum(axis=0)
    g_t = np.zeros_like(model.transition_weights)
    if len(c):
        emp = np.zeros((len(c), L, L))
        emp[np.arange(len(c)), y[batch.topology.parents[c]], y[c]] = 1.0
        diff = emp - edge_marg[c]
        if model.depth_buckets:
            np.add.at(g_t, batch.buckets[c], diff)
        else:
            g_t = diff.sum(axis=0)

    sq = (np.sum(model.node_weights ** 2) + np.sum(model.transition_weights ** 2)
          + np.sum(model.bias ** 2))
    obj = ll - 0.5 * lam * sq
    grad = (g_w - lam * model.node_weights, g_t - lam * model.transition_weights,
            g_b - lam * model.bias)
    return obj, grad


@dataclass(frozen=True, eq=False)
class Gradient:
    node_weights: np.ndarray
    transition_weights: np.ndarray
    bias: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.node_weights.ravel(), self.transition_weights.ravel(),
                               self.bias.ravel()])

    def max_abs(self) -> float:
        return float(np.abs(self.flat()).max()) if self.flat().size else 0.0


def log_likelihood(model: CrfModel, instance: Instance) -> float:
    """log p(gold labels | features) under the model (no regularisation)."""
    batch = _Batch([instance])
    obj, _ = _objective_and_gradient(model, batch, 0.0)
    return obj


def objective(model: CrfModel, instances: Sequence[Instance], lam: Optional[float] = None) -> float:
    lam = model.lam if lam is None else lam
    if not instances:
        return -0.5 * lam * float(_pack(model) @ _pack(model))
    return _objective_and_gradient(model, _Batch(instances), lam)[0]


def gradient(model: CrfModel, instances: Sequence[Instance], lam: Optional[float] = None) -> Gradient:
    """Gradient of the regularised conditional log-likelihood."""
    lam = model.lam if lam is None else lam
    if not instances:
        return Gradient(-lam * model.node_weights, -lam * model.transition_weights, -lam * model.bias)
    _, (g_w, g_t, g_b) = _objective_and_gradient(model, _Batch(instances), lam)
    return Gradient(g_w, g_t, g_b)


def _pack(model: CrfModel) -> np.ndarray:
    return np.concatenate([model.node_weights.ravel(), model.transition_weights.ravel(),
                           model.bias.ravel()])


def _unpack(theta: np.ndarray, template: CrfModel) -> CrfModel:
    a = template.node_weights.size
    b = a + template.transition_weights.size
    return replace(
        template,
        node_weights=theta[:a].reshape(template.node_weights.shape),
        transition_weights=theta[a:b].reshape(template.transition_weights.shape),
        bias=theta[b:].reshape(template.bias.shape),
    )


def train(
    instances: Sequence[Instance],
    config: TrainConfig = TrainConfig(),
    mode: Mode = Mode.TREE_CRF,
    feature_layout: tuple = (),
    history: Optional[list] = None,
) -> CrfModel:
    """Fit by full-batch gradient ascent on the regularised log-likelihood.

    The backtracking rule tries a Barzilai-Borwein step first and halves it
    until the Armijo condition holds, so accepted steps never decrease the
    objective.  Stops when the gradient's infinity norm drops below the
    tolerance or after ``max_iterations`` steps.
    """
    mode = Mode(mode)
    instances = list(instances)
    if not instances:
        raise EmptyInput("cannot train on zero instances")
    if mode is Mode.MAXENT:
        instances = _strip_edges(instances)
    batch = _Batch(instances)
    template = CrfModel.zeros(
        batch.X.shape[1], depth_buckets=config.depth_buckets and mode is not Mode.MAXENT,
        lam=config.lam, feature_layout=tuple(feature_layout), mode=mode.value,
    )
    theta = _pack(template)
    if config.init == "random":
        theta = np.random.default_rng(config.seed).normal(scale=0.1, size=theta.shape)
        if mode is Mode.MAXENT:
            a = template.node_weights.size
            theta[a:a + template.transition_weights.size] = 0.0

    def evaluate(th):
        obj, grads = _objective_and_gradient(_unpack(th, template), batch, config.lam)
        g = np.concatenate([x.ravel() for x in grads])
        return obj, g

    f, g = evaluate(theta)
    if not np.isfinite(f):
        raise NonFiniteObjective("objective is not finite at the initial point")
    if history is not None:
        history.append(f)
    prev = None
    converged = False
    it = 0
    for it in range(config.max_iterations):
        gnorm = float(np.abs(g).max())
        if gnorm <= config.gradient_tolerance:
            converged = True
            break
        if config.step_rule == "fixed":
            theta_new = theta + config.step_size * g
            f_new, g_new = evaluate(theta_new)
            if not np.isfinite(f_new):
                raise NonFiniteObjective(f"objective diverged at iteration {it}")
        else:
            if prev is None:
                t = 1.0 / max(gnorm, 1.0)
            else:
                s, yv = theta - prev[0], g - prev[1]
                curv = -float(s @ yv)
                t = float(s @ s) / curv if curv > 0 else 2.0 * prev[2]
                t = min(t, 1e8)
            gg = float(g @ g)
            while True:
                theta_new = theta + t * g
                f_new, g_new = evaluate(theta_new)
                if np.isfinite(f_new) and f_new >= f + 1e-4 * t * gg:
                    break
                t *= 0.5
                if t * gnorm < 1e-15:
                    theta_new = None
                    break
            if theta_new is None:
                log.info("line search stalled at iteration %d (|g|=%.3g)", it, gnorm)
                break
            prev = (theta, g, t)
        theta, f, g = theta_new, f_new, g_new
        if history is not None:
            history.append(f)
    else:
        converged = float(np.abs(g).max()) <= config.gradient_tolerance
    log.info("%s training: %d iterations, objective %.6f, |g|=%.3g, converged=%s",
             mode.value, it, f, float(np.abs(g).max()), converged)
    return _unpack(theta, template)


def predict_many(model: CrfModel, instances: Sequence[Instance], mode: Mode) -> list[np.ndarray]:
    """Label indices for each instance, decoded jointly in one forest pass."""
    mode = Mode(mode)
    if not instances:
        return []
    batch = _Batch(instances, need_labels=False)
    if batch.X.shape[1] != model.n_features:
        raise DimensionMismatch(f"features width {batch.X.shape[1]} vs model {model.n_features}")
    pot = compute_potentials(model, batch.X, batch.topology)
    if mode is Mode.MAXENT:
        y = pot.node_log_potentials.argmax(axis=1)
    else:
        y = forest_max_product(pot.node_log_potentials, pot.edge_matrices(), batch.topology)
    out, start = [], 0
    for n in batch.sizes:
        out.append(y[start:start + n])
        start += n
    return out


def predict(model: CrfModel, instance: Instance, mode: Mode) -> list[StanceLabel]:
    return [LABELS[i] for i in predict_many(model, [instance], mode)[0]]


def aggregate_branch_predictions(
    branch_predictions: Iterable[tuple[Branch, Sequence[StanceLabel]]]
) -> tuple[dict[str, StanceLabel], int]:
    """Majority vote per tweet across the branches containing it.

    Returns the voted labels and the number of tweets whose branches disagreed.
    Ties go to the earliest label in the fixed order.
    """
    votes: dict[str, Counter] = {}
    for branch, labels in branch_predictions:
        if len(branch.path) != len(labels):
            raise ValueError("branch and label sequence differ in length")
        for tid, lab in zip(branch.path, labels):
            votes.setdefault(tid, Counter())[StanceLabel(lab)] += 1
    if not votes:
        raise EmptyInput("no branch predictions to aggregate")
    out, disagreements = {}, 0
    for tid, counter in votes.items():
        if len(counter) > 1:
            disagreements += 1
        best = max(counter.values())
        out[tid] = min(lab for lab, n in counter.items() if n == best)
    if disagreements:
        log.debug("branch predictions disagree on %d of %d tweets", disagreements, len(out))
    return out, disagreements
