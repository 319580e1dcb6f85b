import random
from fractions import Fraction

import pytest

from chansmc.errors import PropertyError, TraceError
from chansmc.kernel import EventKind, EventRecord, Observation
from chansmc.mtl import (
    And,
    EventAtom,
    Eventually,
    Globally,
    Historically,
    Monitor,
    Not,
    Once,
    Prop,
    Since,
    Until,
    Verdict,
    check_atoms,
    end_of_trace,
    evaluate,
    load_properties,
    online_update,
    parse_formula,
    to_sexpr,
)

from oracles import naive_eval
from random_mtl import random_formula, random_trace

p, q = Prop("p"), Prop("q")


def obs(t, *labels, event=None):
    return Observation(frozenset(labels), event, t)


# offline evaluate


def test_eventually_witness():
    tr = [obs(0), obs(1), obs(2, "p"), obs(4)]
    assert evaluate(Eventually(0, 3, p), tr) is Verdict.TRUE


def test_unbounded_globally_unknown_until_complete():
    tr = [obs(0, "p"), obs(1, "p")]
    assert evaluate(Globally(0, None, p), tr) is Verdict.UNKNOWN
    assert evaluate(Globally(0, None, p), tr, complete=True) is Verdict.TRUE


def test_until_semantics():
    tr = [obs(0, "p"), obs(1, "p"), obs(2, "q"), obs(3)]
    assert evaluate(Until(0, 5, p, q), tr) is Verdict.TRUE
    assert evaluate(Until(0, 1, p, q), tr) is Verdict.FALSE
    assert evaluate(Until(3, 5, p, q), tr) is Verdict.FALSE
    assert evaluate(Until(0, None, p, q), [obs(0, "p"), obs(1, "p")]) is Verdict.UNKNOWN
    assert evaluate(Until(0, None, p, q), [obs(0, "p"), obs(1, "p")], complete=True) is Verdict.FALSE


def test_bounded_window_closes_on_later_observation():
    tr = [obs(0), obs(1), obs(5)]
    assert evaluate(Eventually(0, 3, p), tr) is Verdict.FALSE
    assert evaluate(Eventually(0, 3, p), tr[:2]) is Verdict.UNKNOWN


def test_equal_timestamps_are_distinct_positions():
    tr = [obs(0), obs(0, "p"), obs(0)]
    assert evaluate(Eventually(0, 0, p), tr) is Verdict.TRUE
    assert evaluate(Since(0, 0, Prop("r"), p), tr, 2) is Verdict.FALSE
    assert evaluate(Once(0, 0, p), tr, 2) is Verdict.TRUE


def test_past_operators():
    tr = [obs(0, "q"), obs(1, "p"), obs(2, "p")]
    assert evaluate(Since(0, None, p, q), tr, 2) is Verdict.TRUE
    assert evaluate(Since(0, 1, p, q), tr, 2) is Verdict.FALSE
    assert evaluate(Historically(0, 1, p), tr, 2) is Verdict.TRUE
    assert evaluate(Once(2, 2, q), tr, 2) is Verdict.TRUE


def test_event_atoms():
    send = EventRecord(EventKind.SEND, "c", (1, 2), "A", "B")
    hs = EventRecord(EventKind.HANDSHAKE, "h", 4, "A", "B")
    tr = [obs(0), obs(1, event=send), obs(2, event=hs)]
    assert evaluate(Eventually(0, None, EventAtom("c", "send", 1, "==", 2)), tr) is Verdict.TRUE
    assert evaluate(Eventually(0, 2, EventAtom("c", "receive")), tr) is Verdict.UNKNOWN
    assert evaluate(EventAtom("h", "receive", None, ">", 3), tr, 2) is Verdict.TRUE
    assert evaluate(EventAtom("h", "send", None, "<", 3), tr, 2) is Verdict.FALSE
    with pytest.raises(PropertyError):
        EventAtom("c", "sideways")
    with pytest.raises(PropertyError):
        EventAtom("c", None, None, "==", None)


def test_interval_validation():
    with pytest.raises(PropertyError):
        Eventually(3, 1, p)
    with pytest.raises(PropertyError):
        Eventually(-1, None, p)


# online monitoring


def test_online_eventually():
    m = Monitor(Eventually(0, 5, p))
    assert online_update(m, obs(0)) == (m, None)
    assert online_update(m, obs(1)) == (m, None)
    assert online_update(m, obs(2, "p")) == (m, Verdict.TRUE)


def test_online_globally_violation():
    m = Monitor(Globally(0, 5, p))
    assert m.update(obs(0, "p")) is Verdict.UNKNOWN
    assert m.update(obs(3)) is Verdict.FALSE


def test_end_of_trace_completion():
    m = Monitor(Globally(0, None, p))
    for t in range(3):
        m.update(obs(t, "p"))
    assert end_of_trace(m) is Verdict.TRUE
    m = Monitor(Eventually(0, None, p))
    m.update(obs(0))
    assert m.end_of_trace() is Verdict.FALSE
    m = Monitor(Until(0, None, p, q))
    m.update(obs(0, "p"))
    m.update(obs(1, "p"))
    assert m.end_of_trace() is Verdict.FALSE


def test_out_of_order_rejected():
    m = Monitor(Eventually(0, None, p))
    m.update(obs(2))
    with pytest.raises(TraceError):
        m.update(obs(1))
    m.end_of_trace()
    with pytest.raises(TraceError):
        m.update(obs(3))


def test_monitor_window_is_bounded():
    m = Monitor(Globally(0, None, Eventually(0, 2, p)))
    for t in range(5000):
        m.update(obs(t, *(("p",) if t % 2 else ())))
    assert m.verdict is Verdict.UNKNOWN
    assert m.retained < 200


def agree(phi, trace):
    """Online verdicts on every prefix and after completion match the naive evaluator."""
    m = Monitor(phi)
    for k, o in enumerate(trace, 1):
        got = m.update(o)
        want = Verdict.of(naive_eval(phi, trace[:k], 0, False))
        if got is not want:
            return f"prefix {k}: online {got}, naive {want}"
    got = m.end_of_trace()
    want = Verdict.of(naive_eval(phi, trace, 0, True))
    return None if got is want else f"complete: online {got}, naive {want}"


def test_online_matches_naive_random():
    r = random.Random(11)
    for _ in range(2000):
        phi, tr = random_formula(r), random_trace(r)
        assert agree(phi, tr) is None, (to_sexpr(phi), tr)


def test_offline_matches_naive_every_position():
    r = random.Random(12)
    for _ in range(1000):
        phi, tr = random_formula(r), random_trace(r)
        for complete in (False, True):
            for i in range(len(tr)):
                assert evaluate(phi, tr, i, complete).as_bool() == naive_eval(phi, tr, i, complete)


def test_monotone_under_extension():
    r = random.Random(13)
    for _ in range(1000):
        phi, tr = random_formula(r), random_trace(r)
        for k in range(1, len(tr)):
            v = evaluate(phi, tr[:k])
            if v.conclusive:
                assert evaluate(phi, tr) is v
                assert evaluate(phi, tr, complete=True) is v


def test_derived_identities():
    r = random.Random(14)
    for _ in range(500):
        phi, tr = random_formula(r, 2), random_trace(r)
        lo, hi = Fraction(r.randrange(3)), r.choice([None, 3])
        for i in range(len(tr)):
            for c in (False, True):
                assert evaluate(Not(Eventually(lo, hi, Not(phi))), tr, i, c) is evaluate(Globally(lo, hi, phi), tr, i, c)
                assert evaluate(Until(lo, hi, parse_formula("true"), phi), tr, i, c) is evaluate(Eventually(lo, hi, phi), tr, i, c)


def test_past_never_unknown():
    r = random.Random(15)
    for _ in range(500):
        tr = random_trace(r)
        phi = Since(0, r.choice([None, 1, 2]), Prop("p"), Prop("q"))
        for i in range(len(tr)):
            assert evaluate(phi, tr, i).conclusive
            assert evaluate(Historically(0, None, p), tr, i).conclusive


# syntax


def test_sexpr_round_trip():
    r = random.Random(16)
    for _ in range(300):
        phi = random_formula(r)
        assert parse_formula(to_sexpr(phi)) == phi


def test_parse_errors():
    for bad in ["", "(F 0 1)", "(F 2 1 (prop p))", "(G 0 inf p)", "(prop p))", "(zz 1)", "(event c 0 == #nope)"]:
        with pytest.raises(PropertyError):
            parse_formula(bad)


def test_symbols():
    phi = parse_formula("(event q 0 == #ping)", {"ping": 3})
    assert phi == EventAtom("q", None, 0, "==", 3)


def test_property_file():
    pf = load_properties(
        '<properties><proposition name="big">x &gt; 1</proposition>'
        '<property name="a"><formula>(F 0 inf (prop big))</formula></property></properties>'
    )
    assert pf.propositions == {"big": "x > 1"} and pf.properties[0].name == "a"
    for bad in [
        "<properties/>",
        "<props/>",
        "<properties><property><formula>true</formula></property></properties>",
        '<properties><property name="a"/></properties>',
        '<properties><property name="a"><formula>true</formula></property>'
        '<property name="a"><formula>true</formula></property></properties>',
        "<properties>",
    ]:
        with pytest.raises(PropertyError):
            load_properties(bad)


def test_check_atoms():
    phi = parse_formula("(and (prop p) (event c))")
    check_atoms(phi, ["c"], ["p"])
    with pytest.raises(PropertyError):
        check_atoms(phi, ["d"], ["p"])
    with pytest.raises(PropertyError):
        check_atoms(phi, ["c"], ["q"])
