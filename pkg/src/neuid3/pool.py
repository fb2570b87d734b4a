"""Candidate tests for decision-tree nodes and the experiment pools.

A test is one of four kinds:

* ``DeterministicFact``: true iff an atom is among the example's facts;
* ``ProbabilisticFact``: true with a fixed probability;
* ``NeuralFact``: true with a probability predicted by a sigmoid network
  from one or more feature vectors;
* ``NeuralRule``: a comparison over the outputs of categorical neural
  predicates, e.g. ``rank(img0) < rank(img1)``. Its probability is the total
  mass of the predicate assignments that satisfy the comparison.

Every test exposes its randomness as a :class:`Factor`: the random variables
it reads (each a categorical distribution per example), plus a boolean table
over their joint values saying when the test is true. Conjunctions of tests
that share variables are then evaluated exactly by summing over the shared
variables (see :func:`joint_prob`).
"""
from __future__ import annotations

import copy
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data.cards import CONCEPTS, N_SUITS, RANK_FEATURES, SUIT_FEATURES
from .data.glyphs import RANK_DIM, SUIT_DIM
from .dataset import Dataset, Example
from .errors import MissingFeatureError, NotTrainableError, ParseError, UnknownConceptError
from .nn import Evaluation, NeuralNet, init_net
from .seeding import derive_seed

FACT_HIDDEN = 16
PREDICATE_HIDDEN = 64
OUTPUT_INIT_SCALE = 0.01
BOOL_DOMAIN = (0, 1)


# --- comparators ------------------------------------------------------------

RELATIONS = ("lt", "neq", "eq", "modsucc", "succ", "attr_eq", "attr_neq")


@dataclass(frozen=True)
class Comparator:
    relation: str
    modulus: int | None = None
    arity: int = 2

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.relation == "modsucc" and not self.modulus:
            raise ValueError("modsucc needs a modulus")

    def __call__(self, *vals) -> bool:
        a, b = vals
        r = self.relation
        if r == "lt":
            return a < b
        if r in ("neq", "attr_neq"):
            return a != b
        if r in ("eq", "attr_eq"):
            return a == b
        if r == "succ":
            return a + 1 == b
        return (a + 1) % self.modulus == b

    def table(self, domains) -> np.ndarray:
        grids = np.meshgrid(*[np.asarray(d) for d in domains], indexing="ij")
        out = np.zeros(grids[0].shape, dtype=bool)
        for idx in np.ndindex(out.shape):
            out[idx] = self(*(g[idx] for g in grids))
        return out

    def to_dict(self):
        d = {"relation": self.relation, "arity": self.arity}
        if self.modulus is not None:
            d["modulus"] = self.modulus
        return d


# --- factors -----------------------------------------------------------------

@dataclass
class Factor:
    """Random variables a test reads on a batch, and when it is true.

    ``keys[i]`` identifies variable ``i`` (tests sharing a key read the same
    variable), ``dists[i]`` is its ``(n, K_i)`` distribution as computed by
    this test, and ``table`` is a boolean array over ``K_0 x K_1 x ...``.
    Deterministic facts have no variables and a 0/1 ``const`` instead.
    """

    test: "Test"
    keys: tuple
    dists: list
    table: np.ndarray | None = None
    const: np.ndarray | None = None
    trace: object = None


def joint_prob(literals, grad_factor: Factor | None = None):
    """``P(l_1 and ... and l_k | e)`` for each example.

    ``literals`` is a sequence of ``(Factor, polarity)`` pairs. A variable
    takes its distribution from the first factor that mentions it. If
    ``grad_factor`` is given, also returns ``{axis: dP/d dists[axis]}`` for
    the axes of that factor whose variable it introduces.
    """
    letters = iter(string.ascii_letters.replace("n", ""))
    var_letter: dict = {}
    var_dist: dict = {}
    owner: dict = {}
    n = None
    const = None
    tables = []
    for f, polarity in literals:
        if f.const is not None:
            c = f.const if polarity else 1.0 - f.const
            const = c if const is None else const * c
            n = len(c)
            continue
        subs = ""
        for axis, (key, dist) in enumerate(zip(f.keys, f.dists)):
            if key not in var_letter:
                var_letter[key] = next(letters)
                var_dist[key] = dist
                owner[key] = (f, axis)
            subs += var_letter[key]
            n = len(dist)
        t = f.table if polarity else ~f.table
        tables.append((t.astype(np.float64), subs))

    if not var_letter:
        out = const if const is not None else np.ones(n or 0)
        return (out, {}) if grad_factor is not None else out

    operands, sub_list = [], []
    for key, L in var_letter.items():
        operands.append(var_dist[key])
        sub_list.append("n" + L)
    for t, subs in tables:
        operands.append(t)
        sub_list.append(subs)
    spec = ",".join(sub_list)
    J = np.einsum(spec + "->n", *operands, optimize=True)
    if const is not None:
        J = J * const
    if grad_factor is None:
        return J

    grads = {}
    keys = list(var_letter)
    for axis, key in enumerate(grad_factor.keys):
        if owner.get(key, (None,))[0] is not grad_factor or owner[key][1] != axis:
            continue
        i = keys.index(key)
        # the ones vector keeps the batch index when no other variable remains
        ops = operands[:i] + operands[i + 1:] + [np.ones(n)]
        subs = sub_list[:i] + sub_list[i + 1:] + ["n"]
        g = np.einsum(",".join(subs) + "->n" + var_letter[key], *ops, optimize=True)
        if const is not None:
            g = g * const[:, None]
        grads[axis] = g
    return J, grads


# --- tests -------------------------------------------------------------------

def _as_batch(data) -> Dataset:
    if isinstance(data, Example):
        return Dataset.from_examples([data])
    return data


def _base_id(test_id: str) -> str:
    return test_id.split("@", 1)[0]


class Test:
    __test__ = False  # not a pytest class
    kind = "test"
    trainable = False

    def __init__(self, id: str, name: str | None = None, frozen: bool = False):
        self.id = id
        self.name = name or _base_id(id)
        self.frozen = frozen

    def factor(self, data) -> Factor:
        raise NotImplementedError

    def evaluate(self, data) -> np.ndarray:
        """``P(test | e)`` for every example of a batch."""
        return joint_prob([(self.factor(_as_batch(data)), True)])

    def backward(self, factor: Factor, dists_grad: dict) -> np.ndarray:
        raise NotTrainableError(f"test {self.id!r} ({self.kind}) has no parameters")

    def get_params(self) -> np.ndarray:
        raise NotTrainableError(f"test {self.id!r} ({self.kind}) has no parameters")

    def set_params(self, params) -> None:
        raise NotTrainableError(f"test {self.id!r} ({self.kind}) has no parameters")

    def clone(self, suffix: str | None = None) -> "Test":
        t = copy.deepcopy(self)
        if suffix is not None:
            t.id = f"{_base_id(self.id)}@{suffix}"
        return t

    def _base_dict(self) -> dict:
        return {"kind": self.kind, "id": self.id, "name": self.name, "frozen": self.frozen}

    def to_dict(self) -> dict:
        return self._base_dict()

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    __hash__ = object.__hash__

    def __repr__(self):
        return f"{type(self).__name__}({self.id!r})"


class DeterministicFact(Test):
    kind = "deterministic_fact"

    def __init__(self, id: str, atom: str | None = None, name=None, frozen=False):
        super().__init__(id, name, frozen)
        self.atom = atom or self.name

    def factor(self, data) -> Factor:
        data = _as_batch(data)
        return Factor(self, (), [], const=data.fact_column(self.atom).astype(np.float64))

    def clone(self, suffix=None):
        return self

    def to_dict(self):
        return {**self._base_dict(), "atom": self.atom}


class ProbabilisticFact(Test):
    kind = "probabilistic_fact"
    trainable = True

    def __init__(self, id: str, prob: float = 0.5, atom: str | None = None, name=None, frozen=False):
        super().__init__(id, name, frozen)
        self.atom = atom or self.name
        self.prob = float(prob)

    def factor(self, data) -> Factor:
        n = len(_as_batch(data))
        dist = np.tile([1.0 - self.prob, self.prob], (n, 1))
        return Factor(self, (("bern", self.id),), [dist], np.array([False, True]))

    def backward(self, factor, dists_grad):
        g = dists_grad.get(0)
        if g is None:
            return np.zeros(1)
        return np.array([float((g[:, 1] - g[:, 0]).sum())])

    def get_params(self):
        return np.array([self.prob])

    def set_params(self, params):
        self.prob = float(np.clip(params[0], 0.0, 1.0))

    def to_dict(self):
        return {**self._base_dict(), "atom": self.atom, "prob": self.prob}


class NeuralFact(Test):
    kind = "neural_fact"
    trainable = True

    def __init__(self, id: str, net: NeuralNet, inputs: Sequence[str], name=None, frozen=False):
        super().__init__(id, name, frozen)
        if net.head != "sigmoid":
            raise ValueError("a neural fact needs a sigmoid network")
        self.net = net
        self.inputs = tuple(inputs)

    def _input(self, data: Dataset) -> np.ndarray:
        return np.concatenate([data.feature(k) for k in self.inputs], axis=1)

    def factor(self, data) -> Factor:
        data = _as_batch(data)
        ev = Evaluation(self.net, self._input(data))
        p = ev.out[:, 0]
        dist = np.stack([1.0 - p, p], axis=1)
        return Factor(self, (("bern", self.id),), [dist], np.array([False, True]), trace=ev)

    def backward(self, factor, dists_grad):
        g = dists_grad.get(0)
        if g is None:
            return np.zeros_like(self.net.params)
        return factor.trace.backward((g[:, 1] - g[:, 0])[:, None])

    def get_params(self):
        return self.net.params.copy()

    def set_params(self, params):
        self.net = NeuralNet(self.net.layer_sizes, np.array(params, dtype=np.float64), self.net.head)

    def to_dict(self):
        return {**self._base_dict(), "net": self.net.to_dict(), "inputs": list(self.inputs)}


@dataclass
class NeuralPredicate:
    """A categorical network applied to one feature: ``P(value | input)``.

    Predicates holding the same ``net`` object share parameters. ``key``
    names the predicate as a random-variable family: two predicates with
    equal ``key`` applied to the same ``input`` are the same variable.
    """

    net: NeuralNet
    input: str
    domain: tuple
    key: str

    def __post_init__(self):
        self.domain = tuple(self.domain)
        if self.net.head != "softmax" or self.net.n_out != len(self.domain):
            raise ValueError(f"predicate {self.key!r}: need softmax net with {len(self.domain)} outputs")


class NeuralRule(Test):
    kind = "neural_rule"
    trainable = True

    def __init__(self, id: str, predicates: Sequence[NeuralPredicate], comparator: Comparator,
                 name=None, frozen=False):
        super().__init__(id, name, frozen)
        self.predicates = list(predicates)
        self.comparator = comparator
        if len(self.predicates) != comparator.arity:
            raise ValueError("comparator arity does not match predicate count")
        self._table = comparator.table([p.domain for p in self.predicates])

    def nets(self) -> list[NeuralNet]:
        """Distinct networks in order of first use."""
        out = []
        for p in self.predicates:
            if not any(p.net is n for n in out):
                out.append(p.net)
        return out

    def factor(self, data) -> Factor:
        data = _as_batch(data)
        evals = [Evaluation(p.net, data.feature(p.input)) for p in self.predicates]
        keys = tuple((p.key, p.input) for p in self.predicates)
        return Factor(self, keys, [ev.out for ev in evals], self._table, trace=evals)

    def backward(self, factor, dists_grad):
        nets = self.nets()
        grads = [np.zeros_like(n.params) for n in nets]
        for axis, g in dists_grad.items():
            j = next(i for i, n in enumerate(nets) if n is self.predicates[axis].net)
            grads[j] += factor.trace[axis].backward(g)
        return np.concatenate(grads)

    def get_params(self):
        return np.concatenate([n.params for n in self.nets()])

    def set_params(self, params):
        params = np.asarray(params, dtype=np.float64)
        off = 0
        replaced = {}
        for n in self.nets():
            size = n.params.size
            replaced[id(n)] = NeuralNet(n.layer_sizes, params[off:off + size].copy(), n.head)
            off += size
        for p in self.predicates:
            p.net = replaced[id(p.net)]

    def to_dict(self):
        nets = self.nets()
        net_names = {}
        for p in self.predicates:
            if id(p.net) not in net_names:
                net_names[id(p.net)] = f"net{len(net_names)}"
        return {
            **self._base_dict(),
            "comparator": self.comparator.to_dict(),
            "nets": {net_names[id(n)]: n.to_dict() for n in nets},
            "predicates": [
                {"net": net_names[id(p.net)], "input": p.input, "domain": list(p.domain), "key": p.key}
                for p in self.predicates
            ],
        }


def load_test(d: dict) -> Test:
    try:
        kind = d["kind"]
        common = dict(name=d["name"], frozen=bool(d.get("frozen", False)))
        if kind == DeterministicFact.kind:
            return DeterministicFact(d["id"], d["atom"], **common)
        if kind == ProbabilisticFact.kind:
            return ProbabilisticFact(d["id"], float(d["prob"]), d["atom"], **common)
        if kind == NeuralFact.kind:
            return NeuralFact(d["id"], NeuralNet.from_dict(d["net"]), d["inputs"], **common)
        if kind == NeuralRule.kind:
            nets = {k: NeuralNet.from_dict(v) for k, v in d["nets"].items()}
            preds = [
                NeuralPredicate(nets[p["net"]], p["input"], tuple(p["domain"]), p["key"])
                for p in d["predicates"]
            ]
            c = d["comparator"]
            comp = Comparator(c["relation"], c.get("modulus"), c.get("arity", 2))
            return NeuralRule(d["id"], preds, comp, **common)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed test {d.get('id', '?') if isinstance(d, dict) else d!r}: {exc}") from None
    raise ParseError(f"unknown test kind {kind!r}")


# --- single-example API --------------------------------------------------------

def eval_test(test: Test, example) -> float | np.ndarray:
    """``P(test | e)``; a float for one example, an array for a batch."""
    out = test.evaluate(example)
    return float(out[0]) if isinstance(example, Example) else out


def eval_test_grad(test: Test, example, upstream: float) -> np.ndarray:
    """Gradient of ``upstream * P(test | e)`` with respect to the test's parameters."""
    if not test.trainable:
        raise NotTrainableError(f"test {test.id!r} ({test.kind}) has no parameters")
    f = test.factor(_as_batch(example))
    _, grads = joint_prob([(f, True)], grad_factor=f)
    grads = {axis: g * upstream for axis, g in grads.items()}
    return test.backward(f, grads)


def clone_test(test: Test, suffix: str | None = None) -> Test:
    return test.clone(suffix)


# --- pools -------------------------------------------------------------------

@dataclass(frozen=True)
class PoolSpec:
    kind: str
    concept: str | None = None

    def __post_init__(self):
        if self.kind not in ("nf", "opt", "opt_union", "bad"):
            raise ValueError(f"unknown pool kind {self.kind!r}")
        if self.kind in ("opt", "bad") and self.concept is None:
            raise ValueError(f"pool {self.kind!r} needs a concept")


# Concept -> tests that can express it. attr_match is a cross-modal rule
# added for color_parity.
OPTIMAL_TESTS = {
    "suit_order": ("gt_suit",),
    "rank_order": ("gt_rank",),
    "increase_suits": ("increment_suit", "modulo_suit"),
    "alternating_faces": ("alternate_attr_rank",),
    "alternating_parity": ("alternate_attr_rank",),
    "hidden_modulo_simple": ("modulo_rank", "modulo_suit"),
    "hidden_order_simple": ("gt_rank", "gt_suit"),
    "color_parity": ("attr_match",),
}
NF_TESTS = ("rel_rank", "rel_suit")

# name -> (left predicate, right predicate, relation, separate nets?)
# A predicate is (family, image feature index); families: rank, suit,
# rank_attribute, suit_attribute.
RULES = {
    "alternate_attr_rank": ("rank_attribute", 0, "rank_attribute", 1, "attr_neq", False),
    "equal_ranks": ("rank", 0, "rank", 1, "neq", False),
    "modulo_rank": ("rank", 0, "rank", 1, "modsucc", False),
    "increment_rank": ("rank", 0, "rank", 1, "succ", False),
    "gt_rank": ("rank", 0, "rank", 1, "lt", False),
    "eq_rank_attrs": ("rank", 0, "rank", 1, "eq", True),
    "alternate_attr_suit": ("suit_attribute", 0, "suit_attribute", 1, "attr_neq", False),
    "equal_suits": ("suit", 0, "suit", 1, "neq", False),
    "modulo_suit": ("suit", 0, "suit", 1, "modsucc", False),
    "increment_suit": ("suit", 0, "suit", 1, "succ", False),
    "gt_suit": ("suit", 0, "suit", 1, "lt", False),
    "eq_suit_attrs": ("suit", 0, "suit", 1, "eq", True),
    "attr_match": ("rank_attribute", 0, "suit_attribute", 1, "attr_neq", True),
}


def _family(name: str, ranks: int):
    """(feature prefix, input dim, domain) for a predicate family."""
    if name == "rank":
        return "rank", RANK_DIM, tuple(range(1, ranks + 1))
    if name == "suit":
        return "suit", SUIT_DIM, tuple(range(1, N_SUITS + 1))
    if name == "rank_attribute":
        return "rank", RANK_DIM, BOOL_DOMAIN
    if name == "suit_attribute":
        return "suit", SUIT_DIM, BOOL_DOMAIN
    raise KeyError(name)


def predicate_net(input_dim: int, n_values: int, seed: int) -> NeuralNet:
    """Softmax network whose output weights start near zero.

    Every value then starts almost equally likely, which keeps rarely
    predicted values trainable; full-size random output weights often let an
    ordering rule settle on a solution that merges neighbouring values.
    Exactly zero weights would be a stationary point for symmetric relations
    such as inequality, hence the small random scale.
    """
    net = init_net((input_dim, PREDICATE_HIDDEN, n_values), "softmax", seed)
    W, _ = list(net.layers())[-1]
    W *= OUTPUT_INIT_SCALE
    return net


def make_rule(name: str, ranks: int = 8, seed: int = 0, shared_predicates: bool = False) -> NeuralRule:
    """Build one of the card rules with freshly initialised predicate nets.

    With ``shared_predicates`` the predicate key is the family name, so rules
    that use e.g. ``rank`` on the same image read the same random variable.
    """
    lf, li, rf, ri, rel, separate = RULES[name]
    modulus = None
    if rel == "modsucc":
        modulus = ranks if lf == "rank" else N_SUITS
    preds = []
    nets: dict = {}
    for pos_, (fam, idx) in enumerate(((lf, li), (rf, ri))):
        prefix, dim, domain = _family(fam, ranks)
        local = f"{fam}{pos_ + 1}" if separate else fam
        if local not in nets:
            nets[local] = predicate_net(dim, len(domain), derive_seed(seed, name, local))
        key = local if shared_predicates else f"{name}.{local}"
        feats = RANK_FEATURES if prefix == "rank" else SUIT_FEATURES
        preds.append(NeuralPredicate(nets[local], feats[idx], domain, key))
    return NeuralRule(name, preds, Comparator(rel, modulus))


def make_neural_fact(name: str, seed: int = 0) -> NeuralFact:
    if name == "rel_rank":
        inputs, dim = RANK_FEATURES, 2 * RANK_DIM
    elif name == "rel_suit":
        inputs, dim = SUIT_FEATURES, 2 * SUIT_DIM
    else:
        raise KeyError(name)
    return NeuralFact(name, init_net((dim, FACT_HIDDEN, 1), "sigmoid", derive_seed(seed, name)), inputs)


def make_test(name: str, ranks: int = 8, seed: int = 0, shared_predicates: bool = False) -> Test:
    if name in NF_TESTS:
        return make_neural_fact(name, seed)
    if name in RULES:
        return make_rule(name, ranks, seed, shared_predicates)
    raise KeyError(f"unknown test {name!r}")


def pool_names(spec: PoolSpec) -> list[str]:
    if spec.concept is not None and spec.concept not in OPTIMAL_TESTS:
        raise UnknownConceptError(f"unknown concept {spec.concept!r}")
    union = []
    for c in CONCEPTS:
        for t in OPTIMAL_TESTS[c]:
            if t not in union:
                union.append(t)
    if spec.kind == "nf":
        return list(NF_TESTS)
    if spec.kind == "opt":
        return list(OPTIMAL_TESTS[spec.concept])
    if spec.kind == "opt_union":
        return union
    excluded = set(OPTIMAL_TESTS[spec.concept])
    return [t for t in union + list(NF_TESTS) if t not in excluded]


def build_pool(spec: PoolSpec, ranks: int = 8, seed: int = 0, shared_predicates: bool = False) -> list[Test]:
    """Freshly initialised tests for one of the experiment pools.

    A test's initial parameters depend only on ``seed`` and its name, so the
    same test starts identically in every pool.
    """
    return [make_test(n, ranks, seed, shared_predicates) for n in pool_names(spec)]


def symbolic_pool(atoms: Sequence[str]) -> list[Test]:
    return [DeterministicFact(a) for a in atoms]


def neural_fact_pool(feature_keys: Sequence[str], input_dim: int, seed: int = 0) -> list[Test]:
    """One neural fact per image feature (the tabular glyph setting)."""
    return [
        NeuralFact(k, init_net((input_dim, FACT_HIDDEN, 1), "sigmoid", derive_seed(seed, k)), [k])
        for k in feature_keys
    ]


def check_features(tests: Sequence[Test], data: Dataset) -> None:
    for t in tests:
        keys = []
        if isinstance(t, NeuralFact):
            keys = t.inputs
        elif isinstance(t, NeuralRule):
            keys = [p.input for p in t.predicates]
        for k in keys:
            if k not in data.features:
                raise MissingFeatureError(f"test {t.id!r} needs feature {k!r}")
