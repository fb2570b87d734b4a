"""Neurosymbolic decision trees: classification, logic translation, I/O."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from .dataset import Dataset, Example
from .errors import ParseError
from .logic import Atom, Conjunction, Literal, LogicProgram, ProbFact, Rule
from .pool import ProbabilisticFact, Test, joint_prob, load_test

FORMAT_VERSION = 1


@dataclass(eq=False)
class Leaf:
    id: int
    delta: float
    pos_mass: float = 0.0   # soft count of positive training examples
    mass: float = 0.0       # soft count of all training examples

    def __eq__(self, other):
        return isinstance(other, Leaf) and (self.id, self.delta, self.pos_mass, self.mass) == (
            other.id, other.delta, other.pos_mass, other.mass)


@dataclass(eq=False)
class Internal:
    test: Test
    left: "Node"    # test true
    right: "Node"   # test false

    def __eq__(self, other):
        return (isinstance(other, Internal) and self.test == other.test
                and self.left == other.left and self.right == other.right)


Node = Union[Leaf, Internal]


@dataclass(eq=False)
class NLDT:
    root: Node
    config: dict = field(default_factory=dict)
    seed: int = 0

    def __eq__(self, other):
        return (isinstance(other, NLDT) and self.root == other.root
                and self.config == other.config and self.seed == other.seed)

    @property
    def pool_metadata(self) -> list[dict]:
        seen, out = set(), []
        for t in tests_of(self.root):
            if t.name not in seen:
                seen.add(t.name)
                out.append({"name": t.name, "kind": t.kind})
        return out

    def leaves(self) -> list[Leaf]:
        return list(leaves_of(self.root))

    @property
    def depth(self) -> int:
        return depth_of(self.root)


def leaves_of(node: Node) -> Iterator[Leaf]:
    if isinstance(node, Leaf):
        yield node
    else:
        yield from leaves_of(node.left)
        yield from leaves_of(node.right)


def tests_of(node: Node) -> Iterator[Test]:
    if isinstance(node, Internal):
        yield node.test
        yield from tests_of(node.left)
        yield from tests_of(node.right)


def depth_of(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(depth_of(node.left), depth_of(node.right))


def paths(node: Node, kappa=()) -> Iterator[tuple[tuple, Leaf]]:
    """``(path, leaf)`` pairs; a path is a tuple of ``(Internal, polarity)``."""
    if isinstance(node, Leaf):
        yield kappa, node
    else:
        yield from paths(node.left, kappa + ((node, True),))
        yield from paths(node.right, kappa + ((node, False),))


def number_leaves(node: Node) -> Node:
    """Renumber leaves 1..n in left-to-right order, in place."""
    for i, leaf in enumerate(leaves_of(node), 1):
        leaf.id = i
    return node


def _batch(data) -> tuple[Dataset, bool]:
    if isinstance(data, Example):
        return Dataset.from_examples([data]), True
    return data, False


# --- inference -------------------------------------------------------------------

def leaf_prob_matrix(tree: NLDT | Node, data: Dataset) -> tuple[list[Leaf], np.ndarray]:
    """Leaves and the ``(n, n_leaves)`` matrix of ``P(leaf | e)``.

    Each internal test is evaluated once; a leaf's mass is the joint
    probability of its path literals, so tests sharing neural predicates are
    summed out exactly.
    """
    root = tree.root if isinstance(tree, NLDT) else tree
    factors = {}
    for node in _internals(root):
        factors[id(node)] = node.test.factor(data)
    leaves, cols = [], []
    for kappa, leaf in paths(root):
        lits = [(factors[id(n)], pol) for n, pol in kappa]
        cols.append(joint_prob(lits) if lits else np.ones(len(data)))
        leaves.append(leaf)
    return leaves, np.stack(cols, axis=1)


def _internals(node):
    if isinstance(node, Internal):
        yield node
        yield from _internals(node.left)
        yield from _internals(node.right)


def leaf_probs(tree: NLDT | Node, example) -> dict[int, float] | list[dict[int, float]]:
    """``{leaf id: P(leaf | e)}``; a list of such maps for a dataset."""
    data, single = _batch(example)
    leaves, M = leaf_prob_matrix(tree, data)
    rows = [{leaf.id: float(p) for leaf, p in zip(leaves, row)} for row in M]
    return rows[0] if single else rows


def classify(tree: NLDT | Node, example) -> float | np.ndarray:
    """``P(pos | e) = sum_i delta_i * P(leaf_i | e)``."""
    data, single = _batch(example)
    leaves, M = leaf_prob_matrix(tree, data)
    out = M @ np.array([leaf.delta for leaf in leaves])
    return float(out[0]) if single else out


def predict(tree: NLDT | Node, data) -> np.ndarray:
    return np.asarray(classify(tree, data)) >= 0.5


# --- translation -------------------------------------------------------------------

def test_atom(test: Test) -> Atom:
    return Atom("t_" + re.sub(r"[^A-Za-z0-9_]", "_", test.id))


def translate(tree: NLDT | Node, example=None) -> LogicProgram:
    """Logic program equivalent to the tree.

    Each leaf becomes ``leaf_i :- path literals``, a decision fact
    ``delta_i :: d_i`` and the rules ``pos :- d_i, leaf_i`` and
    ``neg :- \\+d_i, leaf_i``. Every distinct test becomes one probabilistic
    fact; with an ``example`` its probability is the test's evaluation on
    that example, otherwise probabilistic facts keep their own probability
    and other tests get 0.5 (rebind with ``LogicProgram.with_facts``).
    Tests that share neural predicates are treated as independent facts here.
    """
    root = tree.root if isinstance(tree, NLDT) else tree
    data = _batch(example)[0] if example is not None else None
    test_probs: dict[Atom, float] = {}
    for t in tests_of(root):
        a = test_atom(t)
        if a in test_probs:
            continue
        if data is not None:
            test_probs[a] = float(t.evaluate(data)[0])
        elif isinstance(t, ProbabilisticFact):
            test_probs[a] = t.prob
        else:
            test_probs[a] = 0.5
    facts = [ProbFact(a, p) for a, p in test_probs.items()]
    rules = []
    pos_atom, neg_atom = Atom("pos"), Atom("neg")
    for kappa, leaf in paths(root):
        leaf_atom = Atom(f"leaf_{leaf.id}")
        d = Atom(f"d_{leaf.id}")
        body = Conjunction(tuple(Literal(test_atom(n.test), not pol) for n, pol in kappa))
        rules.append(Rule(leaf_atom, tuple(body)))
        facts.append(ProbFact(d, float(leaf.delta)))
        rules.append(Rule(pos_atom, (Literal(d), Literal(leaf_atom))))
        rules.append(Rule(neg_atom, (Literal(d, True), Literal(leaf_atom))))
    return LogicProgram(tuple(rules), tuple(facts))


# --- serialisation -----------------------------------------------------------------

def node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"type": "leaf", "id": node.id, "delta": node.delta,
                "pos_mass": node.pos_mass, "mass": node.mass}
    return {"type": "internal", "test": node.test.to_dict(),
            "left": node_to_dict(node.left), "right": node_to_dict(node.right)}


def node_from_dict(d: dict, where: str = "root") -> Node:
    if not isinstance(d, dict):
        raise ParseError(f"{where}: expected an object")
    kind = d.get("type")
    try:
        if kind == "leaf":
            return Leaf(int(d["id"]), float(d["delta"]), float(d.get("pos_mass", 0.0)),
                        float(d.get("mass", 0.0)))
        if kind == "internal":
            return Internal(load_test(d["test"]),
                            node_from_dict(d["left"], where + ".left"),
                            node_from_dict(d["right"], where + ".right"))
    except KeyError as exc:
        raise ParseError(f"{where}: missing field {exc}") from None
    except ParseError as exc:
        raise ParseError(f"{where}: {exc}") from None
    raise ParseError(f"{where}: unknown node type {kind!r}")


def to_json(tree: NLDT) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": tree.config,
        "seed": tree.seed,
        "pool_metadata": tree.pool_metadata,
        "root": node_to_dict(tree.root),
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def from_json(text: str) -> NLDT:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "root" not in doc:
        raise ParseError("not a tree document (no 'root')")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {doc.get('format_version')!r}")
    return NLDT(node_from_dict(doc["root"]), doc.get("config", {}), int(doc.get("seed", 0)))


def save_tree(tree: NLDT, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(tree))


def load_tree(path) -> NLDT:
    with open(path, encoding="utf-8") as fh:
        return from_json(fh.read())


def to_dot(tree: NLDT | Node) -> str:
    """Graphviz description: boxes for tests, ellipses for leaves."""
    root = tree.root if isinstance(tree, NLDT) else tree
    lines = ["digraph nldt {", "  node [fontname=\"Helvetica\"];"]
    counter = iter(range(10 ** 9))

    def emit(node) -> str:
        name = f"n{next(counter)}"
        if isinstance(node, Leaf):
            lines.append(f'  {name} [shape=ellipse, label="leaf {node.id}\\nδ={node.delta:.3f}"];')
            return name
        label = node.test.name.replace('"', '\\"')
        lines.append(f'  {name} [shape=box, label="{label}"];')
        left, right = emit(node.left), emit(node.right)
        lines.append(f'  {name} -> {left} [label="true"];')
        lines.append(f'  {name} -> {right} [label="false", style=dashed];')
        return name

    emit(root)
    lines.append("}")
    return "\n".join(lines) + "\n"
