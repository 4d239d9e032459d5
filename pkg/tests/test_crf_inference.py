import math

import numpy as np
import pytest

from stancetree.conversation import StanceLabel
from stancetree.crf import (
    NotATree,
    Potentials,
    Topology,
    chain_max_product,
    chain_sum_product,
    max_product,
    sum_product,
)
from stancetree.crf.inference import forest_max_product, forest_sum_product, labeling_score

from oracles import enumerate_labelings, random_parents

THREAD_PARENTS = [-1, 0, 0, 0, 3, 4]


def test_uniform_potentials():
    n = 5
    res = sum_product(Potentials(np.zeros((n, 4)), np.zeros((4, 4)), Topology.chain(n)))
    assert res.log_partition == pytest.approx(n * math.log(4), abs=1e-12)
    np.testing.assert_allclose(res.node_marginals, 0.25, atol=1e-12)


def test_single_node_normalisation():
    theta = np.log([[1.0, 2.0, 3.0, 4.0]])
    res = sum_product(Potentials(theta, np.zeros((4, 4)), Topology.from_parents([-1])))
    assert math.exp(res.log_partition) == pytest.approx(10.0, rel=1e-12)
    np.testing.assert_allclose(res.node_marginals[0], [0.1, 0.2, 0.3, 0.4], atol=1e-12)
    assert res.edge_marginals.shape == (0, 4, 4)


def test_thread_topology_matches_enumeration():
    rng = np.random.default_rng(11)
    node = rng.normal(size=(6, 4))
    edge = rng.normal(size=(4, 4))
    res = sum_product(Potentials(node, edge, Topology.from_parents(THREAD_PARENTS)))
    ref = enumerate_labelings(node, edge, THREAD_PARENTS)
    assert abs(res.log_partition - ref["log_z"]) <= 1e-8
    np.testing.assert_allclose(res.node_marginals, ref["node"], atol=1e-8)
    for c, m in zip(res.edge_children, res.edge_marginals):
        np.testing.assert_allclose(m, ref["edge"][c], atol=1e-8)


@pytest.mark.parametrize("seed", range(40))
def test_random_trees_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    parents = random_parents(rng, n)
    node = rng.normal(scale=2.0, size=(n, 4))
    edge = rng.normal(scale=2.0, size=(n, 4, 4)) if seed % 3 == 0 else rng.normal(size=(4, 4))
    pot = Potentials(node, edge, Topology.from_parents(parents))
    res = sum_product(pot)
    ref = enumerate_labelings(node, edge, parents)
    assert abs(res.log_partition - ref["log_z"]) <= 1e-8
    np.testing.assert_allclose(res.node_marginals, ref["node"], atol=1e-8)
    for c, m in zip(res.edge_children, res.edge_marginals):
        np.testing.assert_allclose(m, ref["edge"][c], atol=1e-8)
    labels, score = max_product(pot)
    assert score == pytest.approx(ref["max_score"], abs=1e-8)
    y = tuple(int(l) for l in labels)
    assert ref["scores"][y] == pytest.approx(ref["max_score"], abs=1e-8)


def test_marginal_invariants():
    rng = np.random.default_rng(3)
    parents = random_parents(rng, 30)
    res = sum_product(Potentials(rng.normal(size=(30, 4)), rng.normal(size=(4, 4)),
                                 Topology.from_parents(parents)))
    np.testing.assert_allclose(res.node_marginals.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(res.edge_marginals.sum(axis=(1, 2)), 1.0, atol=1e-9)
    for c, m in zip(res.edge_children, res.edge_marginals):
        np.testing.assert_allclose(m.sum(axis=0), res.node_marginals[c], atol=1e-9)
        np.testing.assert_allclose(m.sum(axis=1), res.node_marginals[parents[c]], atol=1e-9)


def test_max_product_zero_potentials_picks_first_label():
    labels, score = max_product(Potentials(np.zeros((4, 4)), np.zeros((4, 4)),
                                           Topology.from_parents([-1, 0, 0, 1])))
    assert labels == [StanceLabel.SUPPORTING] * 4
    assert score == 0.0


def test_strong_diagonal_propagates_clamped_label():
    n = 6
    node = np.zeros((n, 4))
    node[4, StanceLabel.DENYING] = 5.0
    pot = Potentials(node, 10.0 * np.eye(4), Topology.from_parents(THREAD_PARENTS))
    labels, _ = max_product(pot)
    assert labels == [StanceLabel.DENYING] * n
    ref = enumerate_labelings(node, 10.0 * np.eye(4), THREAD_PARENTS)
    assert ref["scores"][(1,) * n] == pytest.approx(ref["max_score"])


def test_forest_equals_sum_of_trees():
    rng = np.random.default_rng(5)
    parts = [random_parents(rng, int(rng.integers(1, 6))) for _ in range(7)]
    topo = Topology.concat(parts)
    node = rng.normal(size=(len(topo), 4))
    edge = rng.normal(size=(4, 4))
    log_z, marg, _ = forest_sum_product(node, np.broadcast_to(edge, (len(topo), 4, 4)), topo)
    y = forest_max_product(node, np.broadcast_to(edge, (len(topo), 4, 4)), topo)
    start = 0
    for k, p in enumerate(parts):
        sl = slice(start, start + len(p))
        ref = enumerate_labelings(node[sl], edge, p)
        assert log_z[k] == pytest.approx(ref["log_z"], abs=1e-8)
        np.testing.assert_allclose(marg[sl], ref["node"], atol=1e-8)
        sub = Topology.from_parents(p)
        assert labeling_score(node[sl], np.broadcast_to(edge, (len(p), 4, 4)), sub, y[sl]) \
            == pytest.approx(ref["max_score"], abs=1e-8)
        start += len(p)


def test_tree_on_path_equals_chain_bitwise():
    rng = np.random.default_rng(8)
    for _ in range(20):
        T = int(rng.integers(1, 12))
        node = rng.normal(scale=3, size=(T, 4))
        edge = rng.normal(scale=3, size=(4, 4))
        tree = sum_product(Potentials(node, edge, Topology.chain(T)))
        chain = chain_sum_product(node, edge)
        assert tree.log_partition == chain.log_partition
        assert np.array_equal(tree.node_marginals, chain.node_marginals)
        assert np.array_equal(tree.edge_marginals, chain.edge_marginals)
        labels, _ = max_product(Potentials(node, edge, Topology.chain(T)))
        assert [int(l) for l in labels] == chain_max_product(node, edge).tolist()


@pytest.mark.parametrize("parents", [[0], [1, 0], [-1, 2, 1], [-1, -1], [-1, 5]])
def test_not_a_tree(parents):
    with pytest.raises(NotATree):
        n = len(parents)
        sum_product(Potentials(np.zeros((n, 4)), np.zeros((4, 4)), Topology.from_parents(parents)))


def test_path_order_independent_of_indexing():
    # children listed before their parent must still be handled
    parents = [2, 2, -1, 1]
    rng = np.random.default_rng(0)
    node = rng.normal(size=(4, 4))
    edge = rng.normal(size=(4, 4))
    res = sum_product(Potentials(node, edge, Topology.from_parents(parents)))
    ref = enumerate_labelings(node, edge, parents)
    assert res.log_partition == pytest.approx(ref["log_z"], abs=1e-10)
    np.testing.assert_allclose(res.node_marginals, ref["node"], atol=1e-10)


def test_label_permutation_equivariance():
    rng = np.random.default_rng(21)
    parents = random_parents(rng, 7)
    node = rng.normal(size=(7, 4))
    edge = rng.normal(size=(4, 4))
    perm = np.array([2, 0, 3, 1])
    topo = Topology.from_parents(parents)
    y, _ = max_product(Potentials(node, edge, topo))
    y_perm, _ = max_product(Potentials(node[:, perm], edge[np.ix_(perm, perm)], topo))
    assert [int(perm[int(l)]) for l in y_perm] == [int(l) for l in y]
    a = sum_product(Potentials(node, edge, topo))
    b = sum_product(Potentials(node[:, perm], edge[np.ix_(perm, perm)], topo))
    np.testing.assert_allclose(b.node_marginals, a.node_marginals[:, perm], atol=1e-12)
