import math

import numpy as np
import pytest

from stancetree.conversation import Branch, StanceLabel
from stancetree.crf import (
    CrfModel,
    DimensionMismatch,
    Instance,
    Mode,
    TrainConfig,
    aggregate_branch_predictions,
    compute_potentials,
    gradient,
    log_likelihood,
    objective,
    predict,
    predict_many,
    train,
)
from stancetree.crf.inference import Topology
from stancetree.crf.training import MissingGoldLabel, _pack, _unpack

from oracles import central_difference, enumerate_labelings, random_parents

S, D, Q, C = StanceLabel


def random_model(rng, F, depth_buckets=False, scale=1.0, lam=0.5):
    m = CrfModel.zeros(F, depth_buckets=depth_buckets, lam=lam)
    return _unpack(rng.normal(scale=scale, size=_pack(m).shape), m)


def random_instance(rng, n, F, labelled=True):
    return Instance(
        rng.normal(size=(n, F)),
        tuple(random_parents(rng, n)),
        tuple(int(x) for x in rng.integers(0, 4, n)) if labelled else None,
        tuple(f"t{i}" for i in range(n)),
    )


def test_compute_potentials_arithmetic():
    m = CrfModel.zeros(1)
    m.node_weights[S, 0] = 2.0
    pot = compute_potentials(m, np.array([[1.0]]), Topology.from_parents([-1]))
    assert pot.node_log_potentials[0, S] == 2.0
    assert np.all(pot.node_log_potentials[0, 1:] == 0.0)
    zero = compute_potentials(CrfModel.zeros(3), np.ones((5, 3)), Topology.chain(5))
    assert zero.node_log_potentials.shape == (5, 4)
    assert not zero.node_log_potentials.any()
    with pytest.raises(DimensionMismatch):
        compute_potentials(CrfModel.zeros(3), np.ones((5, 2)), Topology.chain(5))


def test_log_likelihood_single_node_uniform():
    inst = Instance(np.zeros((1, 2)), (-1,), (2,))
    assert log_likelihood(CrfModel.zeros(2), inst) == pytest.approx(math.log(0.25))


def test_log_likelihood_large_margin_near_zero():
    m = CrfModel.zeros(1)
    m.bias[Q] = 60.0
    inst = Instance(np.zeros((3, 1)), (-1, 0, 1), (Q, Q, Q))
    assert log_likelihood(m, inst) >= -1e-6


@pytest.mark.parametrize("seed", range(6))
def test_log_likelihood_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    F = 3
    model = random_model(rng, F)
    inst = random_instance(rng, 5, F)
    pot = compute_potentials(model, inst.features, Topology.from_parents(inst.parents))
    ref = enumerate_labelings(pot.node_log_potentials, pot.edge_log_potentials, list(inst.parents))
    expected = ref["scores"][inst.labels] - ref["log_z"]
    assert log_likelihood(model, inst) == pytest.approx(expected, abs=1e-9)
    assert log_likelihood(model, inst) <= 0


def test_missing_gold_label():
    with pytest.raises(MissingGoldLabel):
        log_likelihood(CrfModel.zeros(1), Instance(np.zeros((1, 1)), (-1,), None))


@pytest.mark.parametrize("depth_buckets", [False, True])
def test_gradient_matches_finite_differences(depth_buckets):
    rng = np.random.default_rng(1 + depth_buckets)
    for _ in range(10):
        F = int(rng.integers(1, 4))
        model = random_model(rng, F, depth_buckets=depth_buckets)
        insts = [random_instance(rng, int(rng.integers(1, 7)), F) for _ in range(3)]
        analytic = gradient(model, insts).flat()
        numeric = central_difference(lambda th: objective(_unpack(th, model), insts), _pack(model))
        big = np.abs(numeric) >= 1e-8
        rel = np.abs(analytic - numeric)[big] / np.abs(numeric)[big]
        assert rel.max(initial=0.0) <= 1e-5
        assert np.all(np.abs(analytic - numeric)[~big] <= 1e-8)


def test_gradient_without_data_is_weight_decay():
    rng = np.random.default_rng(0)
    model = random_model(rng, 3, lam=2.5)
    g = gradient(model, [])
    assert np.array_equal(g.node_weights, -2.5 * model.node_weights)
    assert np.array_equal(g.transition_weights, -2.5 * model.transition_weights)
    assert np.array_equal(g.bias, -2.5 * model.bias)


def test_stationary_at_optimum_of_trivial_dataset():
    # one feature-less node labelled Q, unregularised counterpart has no optimum,
    # but with lam > 0 the trained bias is stationary
    insts = [Instance(np.zeros((1, 1)), (-1,), (Q,))]
    model = train(insts, TrainConfig(lam=1.0, max_iterations=500, gradient_tolerance=1e-10))
    assert gradient(model, insts).max_abs() <= 1e-8


def test_separable_maxent_reaches_full_accuracy():
    rng = np.random.default_rng(4)
    centers = np.array([[4, 0], [-4, 0], [0, 4], [0, -4]], dtype=float)
    y = rng.integers(0, 4, 80)
    X = centers[y] + rng.normal(scale=0.5, size=(80, 2))
    insts = [Instance(X[i:i + 1], (-1,), (int(y[i]),)) for i in range(80)]
    model = train(insts, TrainConfig(lam=1e-4, max_iterations=300), Mode.MAXENT)
    pred = np.concatenate(predict_many(model, insts, Mode.MAXENT))
    assert np.array_equal(pred, y)
    assert not model.transition_weights.any()


def test_objective_non_decreasing():
    rng = np.random.default_rng(2)
    insts = [random_instance(rng, 6, 3) for _ in range(10)]
    history = []
    train(insts, TrainConfig(lam=0.1, max_iterations=60), Mode.TREE_CRF, history=history)
    assert len(history) > 5
    assert all(b >= a for a, b in zip(history, history[1:]))


def test_fixed_step_rule_runs():
    rng = np.random.default_rng(2)
    insts = [random_instance(rng, 4, 2) for _ in range(5)]
    history = []
    train(insts, TrainConfig(step_rule="fixed", step_size=1e-2, max_iterations=20), history=history)
    assert history[-1] > history[0]


def test_two_initialisations_reach_same_optimum():
    rng = np.random.default_rng(9)
    insts = [random_instance(rng, int(rng.integers(2, 7)), 3) for _ in range(15)]
    cfg = dict(lam=1.0, max_iterations=2000, gradient_tolerance=1e-7)
    a = train(insts, TrainConfig(init="zero", **cfg))
    b = train(insts, TrainConfig(init="random", seed=3, **cfg))
    assert abs(objective(a, insts) - objective(b, insts)) <= 1e-4
    for pa, pb in zip(predict_many(a, insts, Mode.TREE_CRF), predict_many(b, insts, Mode.TREE_CRF)):
        assert np.array_equal(pa, pb)


def _sample_planted_chains(rng, trans, n_chains, length, noise):
    insts = []
    for _ in range(n_chains):
        y = [int(rng.integers(0, 4))]
        for _ in range(length - 1):
            y.append(int(rng.choice(4, p=trans[y[-1]])))
        X = np.eye(4)[y] * 1.0 + rng.normal(scale=noise, size=(length, 4))
        insts.append(Instance(X, tuple(range(-1, length - 1)), tuple(y)))
    return insts


def test_planted_transitions_recovered():
    rng = np.random.default_rng(12)
    # one dominant pair: rows are uniform except D, which moves to C w.p. 0.9
    trans = np.full((4, 4), 0.25)
    trans[D] = [0.1 / 3, 0.1 / 3, 0.1 / 3, 0.9]
    insts = _sample_planted_chains(rng, trans, 150, 8, noise=1.0)
    model = train(insts, TrainConfig(lam=0.1), Mode.LINEAR_CRF)
    counts = np.zeros((4, 4))
    for inst in insts:
        for a, b in zip(inst.labels, inst.labels[1:]):
            counts[a, b] += 1
    top_true = np.unravel_index(counts.argmax(), counts.shape)
    top_learned = np.unravel_index(model.transition_weights.argmax(), (4, 4))
    assert top_learned == top_true == (D, C)


def test_maxent_equals_tree_crf_on_single_nodes():
    rng = np.random.default_rng(6)
    insts = [random_instance(rng, 1, 3) for _ in range(40)]
    cfg = TrainConfig(lam=0.5, max_iterations=100)
    me = train(insts, cfg, Mode.MAXENT)
    tc = train(insts, cfg, Mode.TREE_CRF)
    np.testing.assert_array_equal(me.node_weights, tc.node_weights)
    np.testing.assert_array_equal(me.bias, tc.bias)
    for a, b in zip(predict_many(me, insts, Mode.MAXENT), predict_many(tc, insts, Mode.TREE_CRF)):
        assert np.array_equal(a, b)


def test_predict_maxent_argmax():
    m = CrfModel.zeros(1)
    m.bias[:] = [1, 5, 2, 0]
    assert predict(m, Instance(np.zeros((1, 1)), (-1,)), Mode.MAXENT) == [D]


def test_tree_crf_with_zero_transitions_equals_maxent():
    rng = np.random.default_rng(7)
    m = random_model(rng, 3)
    m = CrfModel(m.node_weights, np.zeros((4, 4)), m.bias)
    inst = random_instance(rng, 8, 3, labelled=False)
    assert predict(m, inst, Mode.TREE_CRF) == predict(m, inst, Mode.MAXENT)


@pytest.mark.parametrize("seed", range(10))
def test_predict_equals_brute_force(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_model(rng, 2, scale=2.0)
    inst = random_instance(rng, int(rng.integers(1, 7)), 2, labelled=False)
    pot = compute_potentials(m, inst.features, Topology.from_parents(inst.parents))
    ref = enumerate_labelings(pot.node_log_potentials, pot.edge_log_potentials, list(inst.parents))
    y = tuple(int(l) for l in predict(m, inst, Mode.TREE_CRF))
    assert ref["scores"][y] == pytest.approx(ref["max_score"], abs=1e-9)


def test_model_serialisation_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for db in (False, True):
        m = random_model(rng, 5, depth_buckets=db)
        m = CrfModel(m.node_weights, m.transition_weights, m.bias, lam=0.3,
                     feature_layout=(("a", 2), ("b", 3)), mode="linear_crf")
        m.save(tmp_path / "m.json")
        back = CrfModel.load(tmp_path / "m.json")
        assert np.array_equal(back.node_weights, m.node_weights)
        assert np.array_equal(back.transition_weights, m.transition_weights)
        assert np.array_equal(back.bias, m.bias)
        assert back.lam == 0.3 and back.feature_layout == m.feature_layout
        assert back.dumps() == m.dumps()


def test_aggregate_branch_predictions():
    b1, b2, b3 = Branch(("r", "a")), Branch(("r", "b")), Branch(("r", "c"))
    labels, n = aggregate_branch_predictions([(b1, [S, C]), (b2, [S, C]), (b3, [D, Q])])
    assert labels["r"] == S and n == 1
    labels, n = aggregate_branch_predictions([(b1, [D, C]), (b2, [S, C])])
    assert labels["r"] == S and n == 1
    labels, n = aggregate_branch_predictions([(b1, [Q, C]), (b2, [Q, D])])
    assert labels == {"r": Q, "a": C, "b": D} and n == 0
    with pytest.raises(ValueError):
        aggregate_branch_predictions([])
