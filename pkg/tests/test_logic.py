import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuid3.errors import CyclicProgramError, ParseError, UnknownAtomError, WMCTooLargeError
from neuid3.logic import (
    Atom,
    Conjunction,
    LogicProgram,
    ProbFact,
    Rule,
    conjunction_prob,
    entails,
    format_program,
    neg,
    parse_program,
    pos,
    wmc_query,
)

# burglary? (alarm? pos : neg) : (earthquake? (alarm? pos : neg) : neg)
ALARM_RULES = (
    Rule("pos", (pos("burglary"), pos("alarm"))),
    Rule("neg", (pos("burglary"), neg("alarm"))),
    Rule("pos", (neg("burglary"), pos("earthquake"), pos("alarm"))),
    Rule("neg", (neg("burglary"), pos("earthquake"), neg("alarm"))),
    Rule("neg", (neg("burglary"), neg("earthquake"))),
)


def alarm_program(burglary, earthquake, alarm):
    facts = [ProbFact("burglary", burglary), ProbFact("earthquake", earthquake),
             ProbFact("alarm", alarm)]
    return LogicProgram(ALARM_RULES, facts)


def test_atoms_are_interned():
    assert Atom("rain") is Atom("rain")
    assert Atom("rain") is not Atom("snow")
    with pytest.raises(AttributeError):
        Atom("rain").name = "x"


def test_entails_alarm_examples():
    assert entails(alarm_program(1, 0, 1), "pos")
    assert not entails(alarm_program(1, 0, 1), "neg")
    assert entails(alarm_program(0, 0, 0), "neg")
    assert not entails(alarm_program(0, 0, 0), "pos")


def test_entails_empty_program():
    assert not entails(LogicProgram(), "anything")


def test_entails_rejects_uncertain_facts():
    with pytest.raises(ValueError):
        entails(alarm_program(0.5, 0, 1), "pos")


def test_negation_as_failure_over_derived_atoms():
    prog = LogicProgram(
        [Rule("b", (pos("a"),)), Rule("c", (neg("b"),))],
        [ProbFact("a", 0.0)],
    )
    assert entails(prog, "c")
    assert not entails(prog.with_facts({"a": 1.0}), "c")


def test_cycles_rejected():
    with pytest.raises(CyclicProgramError):
        Rule("a", (pos("a"),))
    with pytest.raises(CyclicProgramError):
        LogicProgram([Rule("a", (pos("b"),)), Rule("b", (neg("a"),))])


def test_fact_cannot_be_rule_head():
    with pytest.raises(ValueError):
        LogicProgram([Rule("f", ())], [ProbFact("f", 0.5)])


def test_probfact_range():
    with pytest.raises(ValueError):
        ProbFact("f", 1.5)


def test_conjunction_prob_examples():
    assert conjunction_prob(Conjunction(), {}) == 1.0
    kappa = Conjunction((neg("burglary"), pos("earthquake"), pos("alarm")))
    probs = {"burglary": 0.7, "earthquake": 0.1, "alarm": 0.9}
    assert conjunction_prob(kappa, probs) == pytest.approx(0.027, abs=1e-15)


def test_contradictory_conjunction_rejected():
    with pytest.raises(ValueError):
        Conjunction((pos("a"), neg("a")))


def test_conjunction_prob_unknown_atom():
    with pytest.raises(UnknownAtomError):
        conjunction_prob(Conjunction((pos("zzz"),)), {})


def test_wmc_single_fact():
    prog = LogicProgram((), [ProbFact("f", 0.3)])
    assert wmc_query(prog, "f") == pytest.approx(0.3, abs=1e-15)
    assert wmc_query(prog, "missing") == 0.0


def test_wmc_cap_counts_uncertain_facts_only():
    facts = [ProbFact(f"u{i}", 0.5) for i in range(4)]
    facts += [ProbFact(f"d{i}", 1.0) for i in range(30)]
    prog = LogicProgram([Rule("q", (pos("u0"), pos("d3")))], facts)
    assert wmc_query(prog, "q", cap=4) == pytest.approx(0.5)
    with pytest.raises(WMCTooLargeError):
        wmc_query(prog, "q", cap=3)


def test_wmc_alarm_leaf_mass():
    prog = alarm_program(0.7, 0.1, 0.9)
    prog = LogicProgram(prog.rules + (Rule("leaf3", (neg("burglary"), pos("earthquake"), pos("alarm"))),),
                        prog.prob_facts)
    assert wmc_query(prog, "leaf3") == pytest.approx(0.027, abs=1e-12)


def brute_force(program, query):
    """Independent enumeration: a world per subset, entails per world."""
    facts = program.prob_facts
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(facts)):
        weight = 1.0
        for f, b in zip(facts, bits):
            weight *= f.prob if b else 1.0 - f.prob
        world = program.with_facts({f.atom: float(b) for f, b in zip(facts, bits)})
        if entails(world, query):
            total += weight
    return total


probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.tuples(probs, probs, probs))
def test_pos_and_neg_are_complementary(p):
    prog = alarm_program(*p)
    assert wmc_query(prog, "pos") + wmc_query(prog, "neg") == pytest.approx(1.0, abs=1e-9)
    assert wmc_query(prog, "pos") == pytest.approx(brute_force(prog, "pos"), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.tuples(probs, probs, probs), st.floats(0.0, 1.0))
def test_wmc_monotone_in_positive_fact(p, bump):
    low = alarm_program(*p)
    higher_alarm = min(1.0, p[2] + bump)
    high = alarm_program(p[0], p[1], higher_alarm)
    assert wmc_query(high, "pos") >= wmc_query(low, "pos") - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.tuples(*(st.sampled_from((0.0, 1.0)) for _ in range(3))))
def test_wmc_agrees_with_entails_on_deterministic_facts(bits):
    prog = alarm_program(*bits)
    for q in ("pos", "neg"):
        assert wmc_query(prog, q) == (1.0 if entails(prog, q) else 0.0)


@settings(max_examples=40, deadline=None)
@given(st.tuples(probs, probs, probs))
def test_leaf_paths_partition_unit_mass(p):
    fp = dict(zip(("burglary", "earthquake", "alarm"), p))
    bodies = [Conjunction(r.body) for r in ALARM_RULES]
    assert sum(conjunction_prob(b, fp) for b in bodies) == pytest.approx(1.0, abs=1e-9)


def test_program_text_round_trip():
    prog = alarm_program(0.7, 0.1, 0.9)
    prog = LogicProgram(prog.rules + (Rule("always", ()),), prog.prob_facts)
    text = format_program(prog)
    assert "0.7 :: burglary." in text
    assert "neg :- \\+burglary, \\+earthquake." in text
    again = parse_program(text)
    assert again == prog
    assert format_program(again) == text


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        parse_program("0.5 :: a.\nthis is not a clause\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_program("2.0 :: a.\n")
