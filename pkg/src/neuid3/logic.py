"""Propositional logic programs with probabilistic facts.

Programs here are small and acyclic: the rule sets produced by translating a
decision tree, or hand-written toy programs. Deterministic entailment follows
negation as failure; probabilities are computed by exhaustive weighted model
counting, which is exact and serves as the oracle for the faster tree
evaluation in :mod:`neuid3.tree`.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import CyclicProgramError, ParseError, UnknownAtomError, WMCTooLargeError

DEFAULT_WMC_CAP = 20
_CHUNK_BITS = 16


class Atom:
    """An interned proposition. ``Atom("a") is Atom("a")`` holds."""

    __slots__ = ("name",)
    _table: dict[str, "Atom"] = {}

    def __new__(cls, name: str):
        atom = cls._table.get(name)
        if atom is None:
            if not isinstance(name, str) or not name:
                raise ValueError(f"atom name must be a non-empty string, got {name!r}")
            atom = object.__new__(cls)
            object.__setattr__(atom, "name", sys.intern(name))
            cls._table[name] = atom
        return atom

    def __setattr__(self, key, value):
        raise AttributeError("Atom is immutable")

    def __reduce__(self):
        return (Atom, (self.name,))

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __repr__(self):
        return f"Atom({self.name!r})"

    def __str__(self):
        return self.name

    def __lt__(self, other):
        return self.name < other.name


def _atom(a) -> Atom:
    return a if isinstance(a, Atom) else Atom(a)


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "atom", _atom(self.atom))

    def __invert__(self) -> "Literal":
        return Literal(self.atom, not self.negated)

    def __str__(self):
        return ("\\+" if self.negated else "") + self.atom.name


def pos(name) -> Literal:
    return Literal(_atom(name), False)


def neg(name) -> Literal:
    return Literal(_atom(name), True)


@dataclass(frozen=True)
class Conjunction:
    """Ordered conjunction of literals; the empty conjunction is ``true``."""

    literals: tuple[Literal, ...] = ()

    def __post_init__(self):
        lits = tuple(self.literals)
        seen = set()
        for lit in lits:
            if lit.atom in seen:
                raise ValueError(f"atom {lit.atom.name!r} occurs twice in conjunction")
            seen.add(lit.atom)
        object.__setattr__(self, "literals", lits)

    def __and__(self, lit: Literal) -> "Conjunction":
        return Conjunction(self.literals + (lit,))

    def __len__(self):
        return len(self.literals)

    def __iter__(self):
        return iter(self.literals)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Literal, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "head", _atom(self.head))
        object.__setattr__(self, "body", tuple(self.body))
        if any(lit.atom is self.head for lit in self.body):
            raise CyclicProgramError(f"rule for {self.head.name!r} refers to itself")


@dataclass(frozen=True)
class ProbFact:
    atom: Atom
    prob: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "atom", _atom(self.atom))
        p = float(self.prob)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability of {self.atom.name!r} outside [0, 1]: {p}")
        object.__setattr__(self, "prob", p)


@dataclass(frozen=True)
class LogicProgram:
    rules: tuple[Rule, ...] = ()
    prob_facts: tuple[ProbFact, ...] = ()
    _order: tuple[Atom, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "prob_facts", tuple(self.prob_facts))
        fact_atoms = set()
        for f in self.prob_facts:
            if f.atom in fact_atoms:
                raise ValueError(f"duplicate probabilistic fact {f.atom.name!r}")
            fact_atoms.add(f.atom)
        for r in self.rules:
            if r.head in fact_atoms:
                raise ValueError(f"atom {r.head.name!r} is both a fact and a rule head")
        object.__setattr__(self, "_order", _topological_heads(self.rules))

    @property
    def heads(self) -> tuple[Atom, ...]:
        """Rule heads in dependency order (bodies before heads)."""
        return self._order

    def fact_probs(self) -> dict[Atom, float]:
        return {f.atom: f.prob for f in self.prob_facts}

    def with_facts(self, probs: Mapping) -> "LogicProgram":
        """Return a copy with the given fact probabilities replaced or added."""
        probs = {_atom(k): float(v) for k, v in probs.items()}
        facts = [ProbFact(f.atom, probs.pop(f.atom, f.prob)) for f in self.prob_facts]
        facts += [ProbFact(a, p) for a, p in probs.items()]
        return LogicProgram(self.rules, facts)


def _topological_heads(rules: Iterable[Rule]) -> tuple[Atom, ...]:
    by_head: dict[Atom, list[Rule]] = {}
    for r in rules:
        by_head.setdefault(r.head, []).append(r)
    order: list[Atom] = []
    state: dict[Atom, int] = {}  # 1 = on stack, 2 = done

    for root in by_head:
        if state.get(root) == 2:
            continue
        stack = [(root, iter(_deps(by_head[root])))]
        state[root] = 1
        while stack:
            head, it = stack[-1]
            for dep in it:
                if dep not in by_head:
                    continue
                s = state.get(dep)
                if s == 1:
                    raise CyclicProgramError(f"cycle through {dep.name!r}")
                if s is None:
                    state[dep] = 1
                    stack.append((dep, iter(_deps(by_head[dep]))))
                    break
            else:
                stack.pop()
                state[head] = 2
                order.append(head)
    return tuple(order)


def _deps(rules):
    for r in rules:
        for lit in r.body:
            yield lit.atom


def entails(program: LogicProgram, query) -> bool:
    """Deterministic entailment under negation as failure.

    All facts must have probability 0 or 1. Atoms that are not derivable are
    false; the program is evaluated stratum by stratum to a fixpoint.
    """
    query = _atom(query)
    true: set[Atom] = set()
    for f in program.prob_facts:
        if f.prob not in (0.0, 1.0):
            raise ValueError(f"fact {f.atom.name!r} is not deterministic (p={f.prob})")
        if f.prob == 1.0:
            true.add(f.atom)
    # Every atom's stratum is one above the highest stratum in its rule bodies.
    stratum: dict[Atom, int] = {}
    for h in program.heads:
        stratum[h] = 1 + max(
            (stratum.get(lit.atom, 0) for r in program.rules if r.head is h for lit in r.body),
            default=0,
        )
    for level in sorted(set(stratum.values())):
        rules = [r for r in program.rules if stratum[r.head] == level]
        changed = True
        while changed:
            changed = False
            for r in rules:
                if r.head in true:
                    continue
                if all((lit.atom in true) != lit.negated for lit in r.body):
                    true.add(r.head)
                    changed = True
    return query in true


def conjunction_prob(kappa: Conjunction, fact_probs: Mapping) -> float:
    """Probability of a conjunction of independent facts."""
    result = 1.0
    for lit in kappa:
        if lit.atom in fact_probs:
            p = fact_probs[lit.atom]
        elif lit.atom.name in fact_probs:
            p = fact_probs[lit.atom.name]
        else:
            raise UnknownAtomError(f"no probability for atom {lit.atom.name!r}")
        result *= (1.0 - p) if lit.negated else p
    return result


def wmc_query(program: LogicProgram, query, cap: int = DEFAULT_WMC_CAP) -> float:
    """Exact query probability by enumerating every possible world.

    Facts with probability 0 or 1 are fixed; the remaining ``n`` facts are
    enumerated (``2**n`` worlds), so ``n`` may not exceed ``cap``. Worlds are
    evaluated in vectorised chunks: each atom's truth value is a boolean
    array over the chunk, computed in dependency order.
    """
    query = _atom(query)
    uncertain = [f for f in program.prob_facts if 0.0 < f.prob < 1.0]
    fixed = {f.atom: f.prob == 1.0 for f in program.prob_facts if f.prob in (0.0, 1.0)}
    n = len(uncertain)
    if n > cap:
        raise WMCTooLargeError(f"{n} uncertain facts exceeds cap {cap}")
    by_head: dict[Atom, list[Rule]] = {}
    for r in program.rules:
        by_head.setdefault(r.head, []).append(r)

    total = 0.0
    chunk = 1 << min(n, _CHUNK_BITS)
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        value: dict[Atom, np.ndarray] = {}
        weight = np.ones(chunk)
        for j, f in enumerate(uncertain):
            bit = ((idx >> j) & 1).astype(bool)
            value[f.atom] = bit
            weight *= np.where(bit, f.prob, 1.0 - f.prob)
        for a, v in fixed.items():
            value[a] = np.full(chunk, v)
        false = np.zeros(chunk, dtype=bool)
        for h in program.heads:
            acc = false.copy()
            for r in by_head[h]:
                body = np.ones(chunk, dtype=bool)
                for lit in r.body:
                    v = value.get(lit.atom, false)
                    body &= ~v if lit.negated else v
                acc |= body
            value[h] = acc
        q = value.get(query)
        if q is not None:
            total += float(weight[q].sum())
    return total


# --- textual format -------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_FACT_RE = re.compile(rf"^\s*(?P<p>[-+0-9.eE]+)\s*::\s*(?P<a>{_NAME})\s*\.\s*$")
_RULE_RE = re.compile(rf"^\s*(?P<h>{_NAME})\s*:-\s*(?P<b>.+?)\s*\.\s*$")
_LIT_RE = re.compile(rf"^(?P<n>\\\+)?\s*(?P<a>{_NAME})$")


def format_program(program: LogicProgram) -> str:
    """Render ``program`` one clause per line: facts first, then rules."""
    lines = [f"{f.prob!r} :: {f.atom.name}." for f in program.prob_facts]
    for r in program.rules:
        body = ", ".join(str(lit) for lit in r.body) if r.body else "true"
        lines.append(f"{r.head.name} :- {body}.")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_program(text: str) -> LogicProgram:
    """Inverse of :func:`format_program`. ``%`` starts a comment line."""
    facts, rules = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        m = _FACT_RE.match(line)
        if m:
            try:
                facts.append(ProbFact(Atom(m["a"]), float(m["p"])))
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise ParseError(f"line {lineno}: cannot parse clause {line.strip()!r}")
        body = []
        if m["b"].strip() != "true":
            for part in m["b"].split(","):
                lm = _LIT_RE.match(part.strip())
                if not lm:
                    raise ParseError(f"line {lineno}: bad literal {part.strip()!r}")
                body.append(Literal(Atom(lm["a"]), bool(lm["n"])))
        rules.append(Rule(Atom(m["h"]), tuple(body)))
    return LogicProgram(rules, facts)
