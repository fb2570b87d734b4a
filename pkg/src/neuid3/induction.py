"""Top-down induction of neurosymbolic decision trees.

At each node every candidate test is cloned and trained on the node's
examples with a class-balanced, mass-weighted cross-entropy; the clone with
the highest soft information gain becomes the node's test. Examples flow to
both children with their path probability multiplied by the test's
conditional probability (or its complement) and are dropped once it falls
below ``epsilon``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import EmptyLeafError, NotTrainableError, ZeroPathMassError
from .nn import PROB_EPS, AdamState, adam_update
from .pool import DeterministicFact, Factor, ProbabilisticFact, Test, joint_prob
from .seeding import derive_seed
from .tree import NLDT, Internal, Leaf, Node, number_leaves

log = logging.getLogger(__name__)

GAIN_TIE_TOL = 1e-12


@dataclass(frozen=True)
class InductionConfig:
    epsilon: float = 0.01
    max_depth: int = 4
    min_examples: int = 10
    min_gain: float = 1e-3
    epochs_per_test: int = 20
    learning_rate: float = 1e-3
    smoothing_alpha: float = 1.0
    batch_size: int = 4         # 0 means full batch
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.batch_size < 0 or self.epochs_per_test < 0 or self.jobs < 1:
            raise ValueError("batch_size, epochs_per_test must be >= 0 and jobs >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs")  # does not affect results
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InductionConfig":
        names = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise ValueError(f"unknown induction settings: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            default = getattr(cls, k)
            kw[k] = type(default)(v)
        return cls(**kw)


# --- node state ------------------------------------------------------------------

class PathCache:
    """Factors of the path tests evaluated once on a node's examples."""

    def __init__(self, kappa: Sequence[tuple[Test, bool]], data: Dataset):
        self.kappa = list(kappa)
        self.factors = [(t.factor(data), pol) for t, pol in self.kappa]

    def literals(self, idx=None) -> list[tuple[Factor, bool]]:
        if idx is None:
            return self.factors
        return [(_slice_factor(f, idx), pol) for f, pol in self.factors]


def _slice_factor(f: Factor, idx) -> Factor:
    return Factor(f.test, f.keys, [d[idx] for d in f.dists], f.table,
                  None if f.const is None else f.const[idx])


def _component(path_lits, factor: Factor):
    """Path literals connected to ``factor`` through shared variables.

    Literals outside the component are independent of the candidate and
    cancel in ``P(kappa and t) / P(kappa)``.
    """
    keys = set(factor.keys)
    chosen = [False] * len(path_lits)
    changed = bool(keys)
    while changed:
        changed = False
        for i, (f, _) in enumerate(path_lits):
            if not chosen[i] and keys & set(f.keys):
                chosen[i] = True
                keys |= set(f.keys)
                changed = True
    return [lit for lit, c in zip(path_lits, chosen) if c]


@dataclass
class NodeContext:
    """Examples reaching a node together with ``P(kappa | e)`` for each."""

    kappa: list
    data: Dataset
    path_prob: np.ndarray
    depth: int = 0
    delta: float = 0.5
    node_id: str = "1"

    def __post_init__(self):
        self.path_prob = np.asarray(self.path_prob, dtype=np.float64)
        self._cache = None

    @property
    def cache(self) -> PathCache:
        if self._cache is None:
            self._cache = PathCache(self.kappa, self.data)
        return self._cache

    @property
    def labels(self) -> np.ndarray:
        return self.data.labels

    @property
    def mass(self) -> float:
        return float(self.path_prob.sum())


def make_root(data: Dataset, kappa=()) -> NodeContext:
    ctx = NodeContext(list(kappa), data, np.ones(len(data)))
    if kappa:
        ctx.path_prob = joint_prob(ctx.cache.literals())
    return ctx


# --- estimates ---------------------------------------------------------------------

def estimate_probability(labels, path_prob, alpha: float = 1.0) -> float:
    """Mass-weighted positive fraction with ``alpha`` pseudo-counts per class."""
    labels = np.asarray(labels, dtype=bool)
    path_prob = np.asarray(path_prob, dtype=np.float64)
    denom = 2.0 * alpha + path_prob.sum()
    if denom <= 0.0:
        raise EmptyLeafError("no example mass and no smoothing")
    return float((alpha + path_prob[labels].sum()) / denom)


def class_weights(labels, path_prob, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(w_pos, w_neg)``: path mass divided by twice the class share.

    A class with zero share has no examples, so its weights are set to 0.
    """
    path_prob = np.asarray(path_prob, dtype=np.float64)
    w_pos = path_prob / (2.0 * delta) if delta > 0 else np.zeros_like(path_prob)
    w_neg = path_prob / (2.0 * (1.0 - delta)) if delta < 1 else np.zeros_like(path_prob)
    return w_pos, w_neg


def conditional_test_prob(node: NodeContext, test: Test, data=None, idx=None,
                          with_grad: bool = False):
    """``P(test | kappa, e)`` for every example at the node.

    Without shared variables this is just the test's own probability; when
    the test reads a variable already on the path, the shared outcomes are
    summed out jointly. With ``with_grad`` also returns the factor and
    ``d q / d dists`` for the variables the test introduces.
    """
    if data is None:
        data = node.data if idx is None else node.data.subset(idx)
    factor = test.factor(data)
    comp = _component(node.cache.literals(idx), factor)
    if not comp:
        if with_grad:
            q, grads = joint_prob([(factor, True)], grad_factor=factor)
            return q, factor, grads
        return joint_prob([(factor, True)])
    marginal = joint_prob(comp)
    if np.any(marginal <= 0.0):
        raise ZeroPathMassError(f"path of node {node.node_id} has zero probability for some example")
    if with_grad:
        J, grads = joint_prob(comp + [(factor, True)], grad_factor=factor)
        return J / marginal, factor, {a: g / marginal[:, None] for a, g in grads.items()}
    return joint_prob(comp + [(factor, True)]) / marginal


def _ce(q, labels, w_pos, w_neg):
    qc = np.clip(q, PROB_EPS, 1.0 - PROB_EPS)
    loss = -(np.sum(w_pos[labels] * np.log(qc[labels]))
             + np.sum(w_neg[~labels] * np.log(1.0 - qc[~labels])))
    inside = (q > PROB_EPS) & (q < 1.0 - PROB_EPS)
    dq = np.where(labels, -w_pos / qc, w_neg / (1.0 - qc)) * inside
    return float(loss), dq


def weighted_ce_loss(node: NodeContext, test: Test, idx=None, delta: float | None = None,
                     with_grad: bool = False):
    """Class-balanced weighted cross-entropy of ``test`` at ``node``.

    Returns the loss, and with ``with_grad`` also its gradient with respect
    to the test's parameters. ``delta`` defaults to the unsmoothed positive
    share at the node so that both classes carry equal total weight.
    """
    if with_grad and not test.trainable:
        raise NotTrainableError(f"test {test.id!r} ({test.kind}) has no parameters")
    if delta is None:
        delta = estimate_probability(node.labels, node.path_prob, 0.0)
    sel = slice(None) if idx is None else idx
    labels = node.labels[sel]
    w_pos, w_neg = class_weights(labels, node.path_prob[sel], delta)
    if not with_grad:
        q = conditional_test_prob(node, test, idx=idx)
        return _ce(q, labels, w_pos, w_neg)[0]
    q, factor, grads = conditional_test_prob(node, test, idx=idx, with_grad=True)
    loss, dq = _ce(q, labels, w_pos, w_neg)
    upstream = {a: g * dq[:, None] for a, g in grads.items()}
    return loss, test.backward(factor, upstream)


# --- training ------------------------------------------------------------------------

def train_test(node: NodeContext, test: Test, config: InductionConfig, seed: int) -> Test:
    """Train a clone of ``test`` at ``node``; frozen and stateless tests pass through."""
    if test.frozen or isinstance(test, DeterministicFact):
        return test
    clone = test.clone(node.node_id)
    if isinstance(clone, ProbabilisticFact):
        clone.set_params([estimate_probability(node.labels, node.path_prob, 0.0)])
        return clone
    if not clone.trainable:
        return clone
    n = len(node.data)
    delta = estimate_probability(node.labels, node.path_prob, 0.0)
    if delta in (0.0, 1.0) or config.epochs_per_test == 0:
        return clone
    params = clone.get_params()
    state = AdamState.for_params(params.size, config.learning_rate)
    rng = np.random.default_rng(seed)
    bs = config.batch_size or n
    for _ in range(config.epochs_per_test):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = np.sort(order[start:start + bs])
            _, grad = weighted_ce_loss(node, clone, idx=idx, delta=delta, with_grad=True)
            params, state = adam_update(params, state, grad)
            clone.set_params(params)
    return clone


def train_tests(node: NodeContext, pool: Sequence[Test], config: InductionConfig,
                executor: ThreadPoolExecutor | None = None) -> list[Test]:
    """Trained clones of every pool entry, in pool order."""
    node.cache  # build once before any worker reads it
    seeds = [derive_seed(config.seed, "train", node.node_id, t.name) for t in pool]
    if executor is None:
        return [train_test(node, t, config, s) for t, s in zip(pool, seeds)]
    return list(executor.map(lambda t, s: train_test(node, t, config, s), pool, seeds))


# --- scoring -------------------------------------------------------------------------

def entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-(p * np.log2(p) + (1.0 - p) * np.log2(1.0 - p)))


def gain_from_masses(labels, mass, mass_true, mass_false) -> float:
    """Soft information gain of a split given per-example masses."""
    labels = np.asarray(labels, dtype=bool)
    S = float(np.sum(mass))
    if S <= 0.0:
        raise ZeroPathMassError("node has no example mass")
    gain = entropy(float(np.sum(mass[labels])) / S)
    for m in (mass_true, mass_false):
        s = float(np.sum(m))
        if s > 0.0:
            gain -= (s / S) * entropy(float(np.sum(m[labels])) / s)
    return gain


def information_gain(node: NodeContext, test: Test) -> float:
    q = conditional_test_prob(node, test)
    m_true = node.path_prob * q
    m_false = node.path_prob * (1.0 - q)
    return gain_from_masses(node.labels, node.path_prob, m_true, m_false)


def best_test(node: NodeContext, candidates: Sequence[Test]) -> tuple[int, float]:
    """Index and gain of the highest-gain candidate; ties go to the lowest index."""
    if not candidates:
        raise ValueError("no candidate tests")
    best_i, best_g = 0, -np.inf
    for i, t in enumerate(candidates):
        g = information_gain(node, t)
        if g > best_g + GAIN_TIE_TOL:
            best_i, best_g = i, g
    return best_i, best_g


# --- recursion -------------------------------------------------------------------------

def _is_pure(labels) -> bool:
    return bool(labels.all() or (~labels).all())


def _leaf(node: NodeContext, config: InductionConfig) -> Leaf:
    return Leaf(0, estimate_probability(node.labels, node.path_prob, config.smoothing_alpha),
                float(node.path_prob[node.labels].sum()), node.mass)


def split_node(node: NodeContext, test: Test, epsilon: float) -> tuple[NodeContext, NodeContext]:
    """Children for ``kappa and test`` and ``kappa and not test`` after the epsilon filter."""
    q = conditional_test_prob(node, test)
    out = []
    for polarity, suffix in ((True, "0"), (False, "1")):
        mass = node.path_prob * (q if polarity else 1.0 - q)
        keep = np.flatnonzero(mass >= epsilon)
        out.append(NodeContext(node.kappa + [(test, polarity)], node.data.subset(keep), mass[keep],
                               node.depth + 1, node_id=node.node_id + suffix))
    return out[0], out[1]


def _grow(node: NodeContext, pool: list[Test], config: InductionConfig, executor) -> Node:
    node.delta = estimate_probability(node.labels, node.path_prob, config.smoothing_alpha)
    if (node.depth >= config.max_depth or len(node.data) < config.min_examples
            or _is_pure(node.labels) or not pool):
        return _leaf(node, config)
    trained = train_tests(node, pool, config, executor)
    i, gain = best_test(node, trained)
    log.debug("node %s depth %d: best %s gain %.4f over %d examples",
              node.node_id, node.depth, trained[i].id, gain, len(node.data))
    if gain < config.min_gain:
        return _leaf(node, config)
    chosen = trained[i]
    rest = pool[:i] + pool[i + 1:]
    children = []
    for child in split_node(node, chosen, config.epsilon):
        if len(child.data) == 0:
            children.append(Leaf(0, node.delta, 0.0, 0.0))
        else:
            children.append(_grow(child, rest, config, executor))
    return Internal(chosen, children[0], children[1])


def neuid3(data: Dataset, pool: Sequence[Test], config: InductionConfig | None = None,
           kappa=()) -> NLDT:
    """Induce a tree from ``data`` with candidate tests from ``pool``.

    The pool entries themselves are never modified; every node trains its
    own clones. ``config.jobs > 1`` trains a node's candidates concurrently
    with identical results.
    """
    config = config or InductionConfig()
    if len(data) == 0:
        raise ValueError("cannot induce a tree from zero examples")
    root_ctx = make_root(data, kappa)
    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as ex:
            root = _grow(root_ctx, list(pool), config, ex)
    else:
        root = _grow(root_ctx, list(pool), config, None)
    return NLDT(number_leaves(root), config.to_dict(), config.seed)
