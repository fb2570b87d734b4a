import numpy as np


def central_diff(f, x, h=1e-5, coords=None):
    """Central finite-difference gradient of scalar ``f`` at vector ``x``.

    With ``coords`` only those coordinates are probed; the rest stay zero.
    """
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size) if coords is None else coords:
        old = x[i]
        x[i] = old + h
        hi = f(x)
        x[i] = old - h
        lo = f(x)
        x[i] = old
        g[i] = (hi - lo) / (2 * h)
    return g


def rel_err(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    scale = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if scale < 1e-12 else float(np.linalg.norm(a - b) / scale)


def random_tree(rng, n_tests=10, max_leaves=8, feature_dim=3):
    """Random tree over a mix of test kinds plus a dataset generator for it.

    Tests may repeat across branches but never on one path. Returns
    ``(tree, make_data)`` where ``make_data(n)`` draws examples the tests
    can read.
    """
    from neuid3.dataset import Dataset
    from neuid3.nn import init_net
    from neuid3.pool import DeterministicFact, NeuralFact, ProbabilisticFact
    from neuid3.tree import NLDT, Internal, Leaf, number_leaves

    tests = []
    for i in range(n_tests):
        kind = rng.integers(3)
        if kind == 0:
            tests.append(DeterministicFact(f"f{i}"))
        elif kind == 1:
            tests.append(ProbabilisticFact(f"p{i}", float(rng.uniform(0.05, 0.95))))
        else:
            net = init_net((feature_dim, 4, 1), "sigmoid", int(rng.integers(1 << 30)))
            net.params *= 3.0
            tests.append(NeuralFact(f"nf{i}", net, ["x"]))
    budget = [max_leaves]

    def grow(path, depth):
        free = [t for t in tests if t not in path]
        # a split turns one leaf into two, so it needs one spare leaf
        if not free or budget[0] < 2 or rng.random() < 0.25 + 0.1 * depth:
            return Leaf(0, float(rng.choice([rng.random(), 0.0, 1.0], p=[0.8, 0.1, 0.1])))
        budget[0] -= 1
        t = free[rng.integers(len(free))]
        return Internal(t, grow(path + [t], depth + 1), grow(path + [t], depth + 1))

    tree = NLDT(number_leaves(grow([], 0)))

    def make_data(n, seed=0):
        r = np.random.default_rng(seed)
        facts = [{f"f{i}" for i in range(n_tests) if r.random() < 0.5} for _ in range(n)]
        return Dataset({"x": r.normal(size=(n, feature_dim))}, r.random(n) < 0.5, facts)

    return tree, make_data


def _h(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def classic_id3(facts, labels, atoms, max_depth=4, min_examples=10, min_gain=1e-3, alpha=1.0, depth=0):
    """Textbook ID3 on crisp examples, written without the package.

    Leaves are ``("leaf", delta, n_pos, n)``; internal nodes are
    ``("node", atom, true_subtree, false_subtree)``. Ties between equal
    gains go to the earliest atom.
    """
    n, n_pos = len(labels), sum(labels)
    leaf = ("leaf", (alpha + n_pos) / (2 * alpha + n), float(n_pos), float(n))
    if depth >= max_depth or n < min_examples or n_pos in (0, n) or not atoms:
        return leaf
    base = _h(n_pos / n)
    best, best_gain = None, -np.inf
    for a in atoms:
        gain = base
        for side in (True, False):
            ys = [y for f, y in zip(facts, labels) if (a in f) == side]
            if ys:
                gain -= len(ys) / n * _h(sum(ys) / len(ys))
        if gain > best_gain + 1e-12:
            best, best_gain = a, gain
    if best_gain < min_gain:
        return leaf
    rest = [a for a in atoms if a != best]
    kids = []
    for side in (True, False):
        idx = [i for i, f in enumerate(facts) if (best in f) == side]
        kids.append(classic_id3([facts[i] for i in idx], [labels[i] for i in idx], rest,
                                max_depth, min_examples, min_gain, alpha, depth + 1))
    return ("node", best, kids[0], kids[1])


def tree_shape(node):
    """NLDT node in the format of :func:`classic_id3`."""
    from neuid3.tree import Leaf
    if isinstance(node, Leaf):
        return ("leaf", node.delta, node.pos_mass, node.mass)
    return ("node", node.test.atom, tree_shape(node.left), tree_shape(node.right))
