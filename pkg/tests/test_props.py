import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioheal.props import (
    Always,
    And,
    Cmp,
    Eventually,
    Golden,
    Implies,
    Lit,
    Not,
    PropertyError,
    Rising,
    Sig,
    check_property,
    parse_property,
)
from bioheal.scenario import Scenario
from bioheal.sim import Trace, sort_rows


def trace_of(waves, until):
    rows = [(t, "SIGNAL", n, str(v)) for n, pts in waves.items() for t, v in pts]
    return Trace(sort_rows(rows), {}, until)


def test_parse_structure():
    p = parse_property("G( a && b -> F[3]( rising(c) && d == golden(d) ) )")
    assert p == Always(Implies(
        And(Cmp("!=", Sig("a"), Lit(0)), Cmp("!=", Sig("b"), Lit(0))),
        Eventually(3, And(Rising("c"), Cmp("==", Sig("d"), Golden("d")))),
    ))


def test_unicode_operators_parse_the_same():
    assert parse_property("G(a ∧ ¬b ⟹ c ∨ d)") == parse_property("G(a && !b -> c || d)")


def test_comments_and_hex():
    assert parse_property("# c\nG(x == 0x10)\n") == Always(Cmp("==", Sig("x"), Lit(16)))


@pytest.mark.parametrize("text, msg", [
    ("G(a", "expected"),
    ("F(a)", "explicit horizon"),
    ("F[x](a)", "horizon"),
    ("a $ b", "unexpected character"),
    ("", "empty"),
    ("a b", "trailing"),
])
def test_parse_errors(text, msg):
    with pytest.raises(PropertyError, match=msg):
        parse_property(text)


def test_unknown_signal():
    with pytest.raises(PropertyError, match="unknown signal"):
        check_property(trace_of({"a": [(0, 1)]}, 20), "G(b)")


def test_golden_needs_trace():
    with pytest.raises(PropertyError, match="golden"):
        check_property(trace_of({"a": [(0, 1)]}, 20), "G(a == golden(a))")


def test_always_and_violation_time():
    tr = trace_of({"a": [(0, 1), (15, 0), (25, 1)]}, 40)
    assert str(check_property(tr, "G(a)")) == "VIOLATED(15)"
    assert str(check_property(tr, "G(a || !a)")) == "HOLDS"


def test_rising_is_a_single_half_tick():
    tr = trace_of({"a": [(0, 0), (10, 1)], "b": [(0, 0), (10, 1), (15, 0)]}, 30)
    assert str(check_property(tr, "G(rising(a) -> b)")) == "HOLDS"
    assert str(check_property(tr, "G(a -> b)")) == "VIOLATED(15)"


def test_bounded_eventually():
    tr = trace_of({"req": [(0, 0), (10, 1), (15, 0)], "ack": [(0, 0), (25, 1), (30, 0)]}, 60)
    assert str(check_property(tr, "G(req -> F[3](ack))")) == "HOLDS"
    assert str(check_property(tr, "G(req -> F[2](ack))")) == "VIOLATED(10)"


def test_open_obligation_at_end_is_inconclusive():
    tr = trace_of({"req": [(0, 0), (50, 1)], "ack": [(0, 0)]}, 60)
    assert str(check_property(tr, "G(req -> F[8](ack))")) == "INCONCLUSIVE"


def test_violation_beats_later_unknown():
    tr = trace_of({"req": [(0, 1), (5, 0), (50, 1)], "ack": [(0, 0)]}, 60)
    assert str(check_property(tr, "G(req -> F[2](ack))")) == "VIOLATED(0)"


def test_non_temporal_formula_judged_at_zero():
    tr = trace_of({"a": [(0, 3)]}, 10)
    assert str(check_property(tr, "a > 2")) == "HOLDS"
    assert str(check_property(tr, "a < 2")) == "VIOLATED(0)"


def test_shipped_properties(assets, ccs_golden):
    done_correct = (assets / "done_correct.prop").read_text()
    latched = (assets / "latched_then_done.prop").read_text()
    value = (assets / "done_value.prop").read_text()
    assert str(check_property(ccs_golden, done_correct, ccs_golden)) == "HOLDS"
    assert str(check_property(ccs_golden, value)) == "HOLDS"
    tr = Scenario.load("ccs_transients").run()
    assert str(check_property(tr, latched, ccs_golden)) == "HOLDS"
    cex = Trace.from_csv((assets / "counterexample.csv").read_text())
    assert str(check_property(cex, value)) == "VIOLATED(75)"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 24), st.text("xyz", min_size=1, max_size=3),
                          st.integers(0, 9)), max_size=20))
def test_irrelevant_rows_do_not_change_g_verdicts(extra):
    base = trace_of({"a": [(0, 1), (35, 0), (40, 1)], "b": [(0, 0), (30, 1)]}, 120)
    padded = Trace(sort_rows(base.rows + [(5 * k, "SIGNAL", f"zz_{n}", str(v)) for k, n, v in extra]
                             + [(5 * k, "EVENT", "noise", "x") for k, _, _ in extra]), {}, 120)
    for prop in ("G(a)", "G(b -> a)", "G(rising(b) -> F[4](a))", "G(a || b)"):
        assert check_property(padded, prop) == check_property(base, prop)
