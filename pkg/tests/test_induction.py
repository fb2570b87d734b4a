import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, classic_id3, rel_err, tree_shape
from neuid3.data.cards import make_eleusis_dataset
from neuid3.dataset import Dataset
from neuid3.errors import EmptyLeafError, NotTrainableError
from neuid3.induction import (
    InductionConfig,
    NodeContext,
    best_test,
    class_weights,
    conditional_test_prob,
    entropy,
    estimate_probability,
    information_gain,
    make_root,
    neuid3,
    split_node,
    train_tests,
    weighted_ce_loss,
)
from neuid3.nn import forward, init_net
from neuid3.pool import (
    Comparator,
    DeterministicFact,
    NeuralFact,
    NeuralPredicate,
    NeuralRule,
    ProbabilisticFact,
    make_test,
)
from neuid3.tree import Internal, Leaf, predict, to_json


def bool_rule(name, preds, relation):
    """Rule over K=2 predicates; ``preds`` is a list of (net, input, key)."""
    return NeuralRule(name, [NeuralPredicate(n, i, (0, 1), k) for n, i, k in preds], Comparator(relation))


def uv_data(n=12, seed=0, labels=None):
    rng = np.random.default_rng(seed)
    labels = rng.random(n) < 0.5 if labels is None else labels
    return Dataset({"u": rng.normal(size=(n, 3)), "v": rng.normal(size=(n, 3))}, labels)


def shared_pair(seed=0):
    """Path rule ``a(u) != a(v)`` and a candidate ``a(u) == b(v)`` sharing ``a(u)``."""
    net_a = init_net((3, 4, 2), "softmax", seed)
    net_b = init_net((3, 4, 2), "softmax", seed + 1)
    path = bool_rule("path", [(net_a, "u", "a"), (net_a, "v", "a")], "neq")
    cand = bool_rule("cand", [(net_a, "u", "a"), (net_b, "v", "b")], "eq")
    return path, cand


# --- estimates -------------------------------------------------------------------

def test_estimate_probability_examples():
    labels = [1, 1, 0, 1, 0]
    assert estimate_probability(labels, np.ones(5), 0.0) == pytest.approx(0.6)
    assert estimate_probability([1] * 10, np.ones(10), 1.0) == pytest.approx(11 / 12)
    assert estimate_probability([1, 0], [0.9, 0.1], 0.0) == pytest.approx(0.9)
    assert estimate_probability([], [], 1.0) == 0.5
    with pytest.raises(EmptyLeafError):
        estimate_probability([], [], 0.0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.floats(0.01, 1.0)), min_size=2, max_size=40))
def test_class_balance_identity(rows):
    labels = np.array([r[0] for r in rows])
    path = np.array([r[1] for r in rows])
    if labels.all() or not labels.any():
        return
    delta = estimate_probability(labels, path, 0.0)
    w_pos, w_neg = class_weights(labels, path, delta)
    half = path.sum() / 2
    assert w_pos[labels].sum() == pytest.approx(half, rel=1e-9)
    assert w_neg[~labels].sum() == pytest.approx(half, rel=1e-9)


def test_unit_weights_at_balanced_node():
    w_pos, w_neg = class_weights([1, 0, 1, 0], np.ones(4), 0.5)
    assert w_pos.tolist() == [1.0] * 4 and w_neg.tolist() == [1.0] * 4


def test_single_class_weights_are_zero_for_missing_class():
    w_pos, w_neg = class_weights([1, 1], np.ones(2), 1.0)
    assert w_pos.tolist() == [0.5, 0.5] and w_neg.tolist() == [0.0, 0.0]


# --- conditional probability -------------------------------------------------------

def test_empty_path_uses_own_probability():
    data = uv_data()
    _, cand = shared_pair()
    node = make_root(data)
    assert np.allclose(conditional_test_prob(node, cand), cand.evaluate(data), atol=1e-15)


def test_independent_path_literals_cancel():
    data = uv_data(seed=2)
    path, _ = shared_pair()
    other = ProbabilisticFact("p", 0.3)
    node = make_root(data, [(path, True)])
    assert np.allclose(conditional_test_prob(node, other), 0.3)


@pytest.mark.parametrize("polarity", [True, False])
def test_shared_variable_conditional_matches_enumeration(polarity):
    data = uv_data(n=7, seed=4)
    path, cand = shared_pair(seed=3)
    node = make_root(data, [(path, polarity)])
    au = forward(path.predicates[0].net, data.feature("u"))
    av = forward(path.predicates[1].net, data.feature("v"))
    bv = forward(cand.predicates[1].net, data.feature("v"))
    num = np.zeros(7)
    den = np.zeros(7)
    for x, y, z in itertools.product((0, 1), repeat=3):
        p = au[:, x] * av[:, y] * bv[:, z]
        if (x != y) == polarity:
            den += p
            if x == z:
                num += p
    assert np.allclose(node.path_prob, den, atol=1e-14)
    assert np.allclose(conditional_test_prob(node, cand), num / den, atol=1e-12)


# --- loss ------------------------------------------------------------------------------

def test_perfect_test_has_tiny_loss():
    n = 50
    labels = np.arange(n) % 2 == 0
    data = Dataset({}, labels, [{"y"} if b else set() for b in labels])
    loss = weighted_ce_loss(make_root(data), DeterministicFact("y"))
    assert 0.0 < loss <= 2e-7 * n


def test_loss_at_balanced_node_is_plain_cross_entropy():
    data = uv_data(n=10, seed=5, labels=np.arange(10) < 5)
    t = NeuralFact("nf", init_net((3, 4, 1), "sigmoid", 1), ["u"])
    q = t.evaluate(data)
    y = data.labels
    plain = -(np.log(q[y]).sum() + np.log(1 - q[~y]).sum())
    assert weighted_ce_loss(make_root(data), t) == pytest.approx(plain, rel=1e-12)


def test_loss_gradient_matches_central_differences():
    data = uv_data(n=9, seed=6)
    path, cand = shared_pair(seed=7)
    node = make_root(data, [(path, True)])
    base = cand.get_params()

    def f(p):
        cand.set_params(p)
        return weighted_ce_loss(node, cand, delta=0.4)

    _, grad = weighted_ce_loss(node, cand, delta=0.4, with_grad=True)
    fd = central_diff(f, base)
    assert rel_err(grad, fd) < 1e-6
    # the shared predicate net takes its distribution from the path, so only
    # the second net moves the loss
    n_a = cand.predicates[0].net.params.size
    assert np.all(grad[:n_a] == 0.0)


def test_gradient_of_stateless_test_is_rejected():
    data = Dataset({}, [True, False], [{"a"}, set()])
    with pytest.raises(NotTrainableError):
        weighted_ce_loss(make_root(data), DeterministicFact("a"), with_grad=True)


# --- training ----------------------------------------------------------------------------

def separable_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    return Dataset({"x": x}, x[:, 0] > 0, [set()] * n)


def test_training_reduces_loss_and_leaves_pool_untouched():
    data = separable_data()
    nf = NeuralFact("nf", init_net((3, 8, 1), "sigmoid", 2), ["x"])
    pool = [DeterministicFact("a"), ProbabilisticFact("p", 0.5), nf]
    before = nf.get_params().copy()
    node = make_root(data)
    cfg = InductionConfig(learning_rate=0.01, epochs_per_test=10)
    trained = train_tests(node, pool, cfg)
    assert trained[0] is pool[0]
    assert trained[1].prob == pytest.approx(data.labels.mean())
    assert trained[2].id == "nf@1" and trained[2] is not nf
    assert np.array_equal(nf.get_params(), before)
    assert weighted_ce_loss(node, trained[2]) < 0.5 * weighted_ce_loss(node, nf)


def test_frozen_tests_pass_through():
    t = make_test("gt_rank", seed=0)
    t.frozen = True
    train, _, _ = make_eleusis_dataset("rank_order", seed=0, sizes=(20, 2, 2))
    assert train_tests(make_root(train), [t], InductionConfig())[0] is t


def test_training_is_independent_of_thread_count():
    train, _, _ = make_eleusis_dataset("suit_order", seed=1, sizes=(40, 2, 2))
    pool = [make_test(n, seed=0) for n in ("gt_suit", "equal_suits", "rel_suit")]
    cfg = InductionConfig(epochs_per_test=2, min_examples=5)
    a = neuid3(train, pool, cfg)
    b = neuid3(train, pool, InductionConfig(epochs_per_test=2, min_examples=5, jobs=4))
    assert to_json(a) == to_json(b)


# --- information gain ------------------------------------------------------------------------

def test_label_copy_gains_full_entropy():
    labels = np.array([1, 1, 0, 0, 1], dtype=bool)
    path = np.array([1.0, 0.5, 0.25, 1.0, 0.75])
    data = Dataset({}, labels, [{"y"} if b else set() for b in labels])
    node = NodeContext([], data, path)
    share = path[labels].sum() / path.sum()
    assert information_gain(node, DeterministicFact("y")) == pytest.approx(entropy(share), abs=1e-12)
    assert information_gain(node, ProbabilisticFact("p", 0.3)) == pytest.approx(0.0, abs=1e-12)


def test_gain_against_straight_line_computation():
    labels = np.array([1, 1, 0, 0], dtype=bool)
    path = np.array([1.0, 0.5, 1.0, 0.8])
    data = uv_data(n=4, seed=8, labels=labels)
    t = NeuralFact("nf", init_net((3, 4, 1), "sigmoid", 9), ["u"])
    q = t.evaluate(data)

    def h(p):
        return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))

    total = path.sum()
    gain = h(path[:2].sum() / total)
    for m in (path * q, path * (1 - q)):
        gain -= m.sum() / total * h(m[:2].sum() / m.sum())
    assert information_gain(NodeContext([], data, path), t) == pytest.approx(gain, abs=1e-12)


def test_entropy_sign_and_edges():
    assert entropy(0.5) == 1.0
    assert entropy(0.0) == entropy(1.0) == 0.0
    assert 0 < entropy(0.1) < 1


def test_best_test_ties_go_first():
    labels = np.array([1, 0, 1, 0], dtype=bool)
    facts = [{"a", "b"}, set(), {"a", "b"}, set()]
    node = make_root(Dataset({}, labels, facts))
    assert best_test(node, [DeterministicFact("c"), DeterministicFact("a"), DeterministicFact("b")]) == (1, 1.0)
    with pytest.raises(ValueError):
        best_test(node, [])


# --- splitting and recursion ---------------------------------------------------------------------

def test_split_conserves_mass():
    data = uv_data(n=20, seed=10)
    path, cand = shared_pair(seed=11)
    node = make_root(data, [(path, True)])
    left, right = split_node(node, cand, 1e-300)
    assert len(left.data) == len(right.data) == 20
    assert np.allclose(left.path_prob + right.path_prob, node.path_prob, atol=1e-15)
    assert (left.node_id, right.node_id) == ("10", "11")
    assert left.kappa[-1] == (cand, True) and right.kappa[-1] == (cand, False)


def test_split_filters_small_mass():
    labels = np.array([1, 0, 1], dtype=bool)
    data = Dataset({}, labels, [{"a"}, set(), {"a"}])
    left, right = split_node(make_root(data), DeterministicFact("a"), 0.01)
    assert left.data.labels.tolist() == [True, True]
    assert right.data.labels.tolist() == [False]


def test_pure_data_gives_one_smoothed_leaf():
    data = Dataset({}, [True] * 7, [{"a"}] * 7)
    tree = neuid3(data, [DeterministicFact("a")])
    assert isinstance(tree.root, Leaf)
    assert tree.root.delta == pytest.approx((1 + 7) / (2 + 7))
    assert (tree.root.pos_mass, tree.root.mass) == (7.0, 7.0)


def test_conjunction_grows_two_levels():
    rows = [(a, b, c) for a, b, c in itertools.product((0, 1), repeat=3) for _ in range(5)]
    facts = [{n for n, v in zip("abc", r) if v} for r in rows]
    labels = [bool(r[0] and r[1]) for r in rows]
    tree = neuid3(Dataset({}, labels, facts), [DeterministicFact(n) for n in "cab"])
    assert tree_shape(tree.root) == classic_id3(facts, labels, list("cab"))
    assert tree.root.test.atom in {"a", "b"}
    assert max(len(leaf_path) for leaf_path in paths(tree.root)) == 2


def test_empty_children_inherit_parent_estimate():
    # a frozen coin flip at epsilon 0.6 sends no example anywhere
    data = Dataset({}, [True, True, False, False, True], [set()] * 5)
    coin = ProbabilisticFact("coin", 0.5, frozen=True)
    tree = neuid3(data, [coin], InductionConfig(epsilon=0.6, min_gain=0.0, min_examples=1))
    assert isinstance(tree.root, Internal)
    parent = (1 + 3) / (2 + 5)
    for leaf in (tree.root.left, tree.root.right):
        assert (leaf.delta, leaf.pos_mass, leaf.mass) == (pytest.approx(parent), 0.0, 0.0)


def paths(node, prefix=()):
    if isinstance(node, Leaf):
        yield prefix
        return
    yield from paths(node.left, prefix + (node.test.id,))
    yield from paths(node.right, prefix + (node.test.id,))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), max_depth=st.integers(1, 4))
def test_tree_structure_invariants(seed, max_depth):
    rng = np.random.default_rng(seed)
    n, atoms = 60, list("abcde")
    X = rng.random((n, 5)) < 0.5
    labels = (X[:, 0] & X[:, 1]) | (rng.random(n) < 0.15)
    facts = [{a for a, v in zip(atoms, row) if v} for row in X]
    tree = neuid3(Dataset({}, labels, facts), [DeterministicFact(a) for a in atoms],
                  InductionConfig(max_depth=max_depth, min_examples=4))
    for p in paths(tree.root):
        assert len(p) <= max_depth
        assert len(set(p)) == len(p)
    assert sum(leaf.mass for leaf in tree.leaves()) == pytest.approx(n)
    assert tree_shape(tree.root) == classic_id3(facts, labels.tolist(), atoms, max_depth, 4)


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        InductionConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        InductionConfig(max_depth=0)
    cfg = InductionConfig(epsilon=0.05, batch_size=0, jobs=3)
    d = cfg.to_dict()
    assert "jobs" not in d
    assert InductionConfig.from_dict(d) == InductionConfig(epsilon=0.05, batch_size=0)
    with pytest.raises(ValueError):
        InductionConfig.from_dict({"nope": 1})


def test_no_examples_rejected():
    with pytest.raises(ValueError):
        neuid3(Dataset({}, [], []), [DeterministicFact("a")])


def xor_data(counts):
    """``counts[(a, b)]`` copies of each row, labelled ``a xor b``."""
    facts, labels = [], []
    for (a, b), c in counts.items():
        facts += [{n for n, v in (("a", a), ("b", b)) if v}] * c
        labels += [a != b] * c
    return facts, labels


def test_unbalanced_xor_grows_a_perfect_depth_two_tree():
    facts, labels = xor_data({(1, 1): 10, (1, 0): 20, (0, 1): 10, (0, 0): 30})
    data = Dataset({}, labels, facts)
    tree = neuid3(data, [DeterministicFact("a"), DeterministicFact("b")], InductionConfig(max_depth=3))
    assert tree.depth == 2
    assert np.array_equal(predict(tree, data), data.labels)
    assert tree_shape(tree.root) == classic_id3(facts, labels, ["a", "b"], max_depth=3)


def test_balanced_xor_stops_at_the_root():
    # every single-atom split of a balanced XOR has zero gain
    facts, labels = xor_data({k: 10 for k in itertools.product((0, 1), repeat=2)})
    tree = neuid3(Dataset({}, labels, facts), [DeterministicFact("a"), DeterministicFact("b")],
                  InductionConfig(max_depth=3))
    assert isinstance(tree.root, Leaf)
    assert tree_shape(tree.root) == classic_id3(facts, labels, ["a", "b"], max_depth=3)
