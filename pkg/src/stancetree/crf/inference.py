"""Exact sum-product and max-product inference on label trees.

Everything works in the log domain.  Nodes are processed one depth level at a
time, so a forest of many small trees is handled by a handful of vectorised
numpy operations per level rather than a Python loop per node.

Edge potentials are indexed by the child node: ``edge[c, y_parent, y_child]``
scores the edge between ``c`` and its parent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..conversation import LABELS, StanceLabel
from ..errors import StanceError


class NotATree(StanceError):
    pass


def logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(a - m).sum(axis=axis))


@dataclass(frozen=True, eq=False)
class Topology:
    """Parent-pointer forest with precomputed depth levels.

    ``parents[i]`` is the index of node ``i``'s parent, or -1 for a root.
    """

    parents: np.ndarray
    depth: np.ndarray
    levels: tuple[np.ndarray, ...]
    roots: np.ndarray
    component: np.ndarray  # position in ``roots`` of each node's root

    @classmethod
    def from_parents(cls, parents: Sequence[int]) -> "Topology":
        parents = np.asarray(parents, dtype=np.int64).reshape(-1)
        n = len(parents)
        if n == 0:
            raise NotATree("empty topology")
        if np.any(parents < -1) or np.any(parents >= n):
            raise NotATree("parent index out of range")
        if np.any(parents == np.arange(n)):
            raise NotATree("self loop")
        children: list[list[int]] = [[] for _ in range(n)]
        for i, p in enumerate(parents.tolist()):
            if p >= 0:
                children[p].append(i)
        roots = np.flatnonzero(parents < 0)
        depth = np.full(n, -1, dtype=np.int64)
        component = np.full(n, -1, dtype=np.int64)
        for k, r in enumerate(roots.tolist()):
            depth[r] = 0
            component[r] = k
            stack = [r]
            while stack:
                u = stack.pop()
                for c in children[u]:
                    depth[c] = depth[u] + 1
                    component[c] = k
                    stack.append(c)
        if np.any(depth < 0):
            raise NotATree("cycle: some nodes are unreachable from any root")
        order = np.argsort(depth, kind="stable")
        bounds = np.searchsorted(depth[order], np.arange(depth.max() + 2))
        levels = tuple(order[bounds[d]:bounds[d + 1]] for d in range(depth.max() + 1))
        return cls(parents, depth, levels, roots, component)

    @classmethod
    def chain(cls, n: int) -> "Topology":
        return cls.from_parents(np.arange(n) - 1)

    @classmethod
    def concat(cls, parts: Sequence[Sequence[int]]) -> "Topology":
        out, offset = [], 0
        for p in parts:
            p = np.asarray(p, dtype=np.int64)
            out.append(np.where(p >= 0, p + offset, -1))
            offset += len(p)
        return cls.from_parents(np.concatenate(out))

    def __len__(self):
        return len(self.parents)

    @property
    def is_tree(self) -> bool:
        return len(self.roots) == 1

    @property
    def edge_children(self) -> np.ndarray:
        """Child index of every edge, in node order."""
        return np.flatnonzero(self.parents >= 0)


@dataclass(frozen=True, eq=False)
class Potentials:
    node_log_potentials: np.ndarray  # (n, L)
    edge_log_potentials: np.ndarray  # (L, L) shared, or (n, L, L) per child
    topology: Topology

    def __post_init__(self):
        n = len(self.topology)
        node = self.node_log_potentials
        if node.ndim != 2 or node.shape[0] != n:
            raise ValueError(f"node potentials shape {node.shape} for {n} nodes")
        L = node.shape[1]
        edge = self.edge_log_potentials
        if edge.shape not in ((L, L), (n, L, L)):
            raise ValueError(f"edge potentials shape {edge.shape} incompatible with {n}x{L}")

    @property
    def n_labels(self) -> int:
        return self.node_log_potentials.shape[1]

    def edge_matrices(self) -> np.ndarray:
        e = self.edge_log_potentials
        if e.ndim == 2:
            return np.broadcast_to(e, (len(self.topology),) + e.shape)
        return e


@dataclass(frozen=True, eq=False)
class InferenceResult:
    log_partition: float
    node_marginals: np.ndarray  # (n, L)
    edge_marginals: np.ndarray  # (n_edges, L_parent, L_child)
    edge_children: np.ndarray  # child node of each edge marginal
    component_log_partition: np.ndarray


def _upward(node, edge, topo, reduce):
    n, L = node.shape
    inside = np.zeros((n, L))
    msg = np.zeros((n, L))
    back = np.zeros((n, L), dtype=np.int64) if reduce == "max" else None
    for lev in reversed(topo.levels[1:]):
        scores = edge[lev] + (node[lev] + inside[lev])[:, None, :]
        if reduce == "max":
            back[lev] = scores.argmax(axis=2)
            msg[lev] = scores.max(axis=2)
        else:
            msg[lev] = logsumexp(scores, axis=2)
        np.add.at(inside, topo.parents[lev], msg[lev])
    return inside, msg, back


def forest_sum_product(node: np.ndarray, edge: np.ndarray, topo: Topology, edges: bool = True):
    """Two-pass sum-product over every tree of ``topo``.

    Returns ``(component_log_partition, node_marginals, edge_marginals)`` where
    ``edge_marginals[c]`` is the joint over (parent of c, c); root rows are zero.
    """
    n, L = node.shape
    inside, msg, _ = _upward(node, edge, topo, "sum")
    roots = topo.roots
    log_z = logsumexp(node[roots] + inside[roots], axis=1)
    z_node = log_z[topo.component]
    down = np.zeros((n, L))
    edge_marg = np.zeros((n, L, L)) if edges else None
    for lev in topo.levels[1:]:
        p = topo.parents[lev]
        outside = node[p] + down[p] + inside[p] - msg[lev]
        joint = edge[lev] + outside[:, :, None]
        down[lev] = logsumexp(joint, axis=1)
        if edges:
            below = node[lev] + inside[lev]
            edge_marg[lev] = np.exp(joint + below[:, None, :] - z_node[lev][:, None, None])
    node_marg = np.exp(node + down + inside - z_node[:, None])
    return log_z, node_marg, edge_marg


def forest_max_product(node: np.ndarray, edge: np.ndarray, topo: Topology) -> np.ndarray:
    """MAP label indices for every node; ties go to the lowest label index."""
    inside, _, back = _upward(node, edge, topo, "max")
    y = np.zeros(len(node), dtype=np.int64)
    roots = topo.roots
    y[roots] = (node[roots] + inside[roots]).argmax(axis=1)
    for lev in topo.levels[1:]:
        y[lev] = back[lev, y[topo.parents[lev]]]
    return y


def labeling_score(node: np.ndarray, edge: np.ndarray, topo: Topology, y: np.ndarray) -> float:
    """Unnormalised log-score of a full labelling."""
    y = np.asarray(y, dtype=np.int64)
    score = node[np.arange(len(y)), y].sum()
    c = topo.edge_children
    if len(c):
        score += edge[c, y[topo.parents[c]], y[c]].sum()
    return float(score)


def _require_tree(potentials: Potentials):
    if not potentials.topology.is_tree:
        raise NotATree(f"expected one tree, got {len(potentials.topology.roots)} components")


def sum_product(potentials: Potentials) -> InferenceResult:
    _require_tree(potentials)
    topo = potentials.topology
    log_z, node_marg, edge_marg = forest_sum_product(
        potentials.node_log_potentials, potentials.edge_matrices(), topo
    )
    c = topo.edge_children
    return InferenceResult(float(log_z.sum()), node_marg, edge_marg[c], c, log_z)


def max_product(potentials: Potentials) -> tuple[list[StanceLabel], float]:
    _require_tree(potentials)
    node, edge = potentials.node_log_potentials, potentials.edge_matrices()
    y = forest_max_product(node, edge, potentials.topology)
    score = labeling_score(node, edge, potentials.topology, y)
    if potentials.n_labels == len(LABELS):
        return [LABELS[i] for i in y], score
    return [int(i) for i in y], score


def chain_sum_product(node: np.ndarray, edge: np.ndarray) -> InferenceResult:
    """Forward-backward on a single sequence.

    Performs the same floating-point operations, in the same order, as the tree
    routine applied to a path, so results agree bit for bit.
    """
    node = np.asarray(node, dtype=np.float64)
    T, L = node.shape
    E = np.broadcast_to(edge, (T, L, L)) if edge.ndim == 2 else edge
    inside = np.zeros((T, L))
    msg = np.zeros((T, L))
    for t in range(T - 1, 0, -1):
        s = slice(t, t + 1)
        msg[s] = logsumexp(E[s] + (node[s] + inside[s])[:, None, :], axis=2)
        inside[t - 1:t] += msg[s]
    log_z = logsumexp(node[0:1] + inside[0:1], axis=1)
    down = np.zeros((T, L))
    edge_marg = np.zeros((max(T - 1, 0), L, L))
    for t in range(1, T):
        s, p = slice(t, t + 1), slice(t - 1, t)
        outside = node[p] + down[p] + inside[p] - msg[s]
        joint = E[s] + outside[:, :, None]
        down[s] = logsumexp(joint, axis=1)
        edge_marg[t - 1] = np.exp(joint + (node[s] + inside[s])[:, None, :] - log_z[0])[0]
    node_marg = np.exp(node + down + inside - log_z[0])
    return InferenceResult(float(log_z[0]), node_marg, edge_marg, np.arange(1, T), log_z)


def chain_max_product(node: np.ndarray, edge: np.ndarray) -> np.ndarray:
    """Viterbi on a single sequence (lowest label wins ties)."""
    T, L = node.shape
    E = np.broadcast_to(edge, (T, L, L)) if edge.ndim == 2 else edge
    best = np.zeros((T, L))
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(T - 1, 0, -1):
        scores = E[t] + (node[t] + best[t])[None, :]
        back[t] = scores.argmax(axis=1)
        best[t - 1] += scores.max(axis=1)
    y = np.zeros(T, dtype=np.int64)
    y[0] = (node[0] + best[0]).argmax()
    for t in range(1, T):
        y[t] = back[t, y[t - 1]]
    return y
