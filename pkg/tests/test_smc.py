import math
from fractions import Fraction

import pytest

from chansmc.channel_system import ChannelSystem, single
from chansmc.errors import ArgumentError
from chansmc.expr import parse_expr as E
from chansmc.kernel import Boolean, BoundedInt, ClockGe, clock_eq
from chansmc.mtl import Property, Verdict, parse_formula
from chansmc.program_graph import Effect, PgTransition, ProgramGraph
from chansmc.smc import (
    COMPLETE,
    LENGTH_CAP,
    RESOLVED,
    TIME_LOCK,
    SmcConfig,
    estimate,
    required_samples,
    run_trial,
)


def prop(name, text):
    return Property(name, parse_formula(text))


def coin(p="1/2"):
    """One flip with success probability ``p``, then deadlock."""
    p = Fraction(p)
    branches = ((p, (("h", E("true")),)), (1 - p, (("h", E("false")),)))
    t = PgTransition("l", "flip", "done", effect=Effect(tuple(b for b in branches if b[0])))
    pg = ProgramGraph("C", ("l", "done"), ("l",), {"h": Boolean()}, (t,), initial_valuation={"h": False})
    return single(pg, propositions={"heads": E("h")})


# required_samples


def test_worst_case_bound():
    assert required_samples(Fraction(1, 20), Fraction(1, 20)) == 738
    assert required_samples(0.05, 0.05) == math.ceil(math.log(40) / 0.005)


def test_adaptive_bound():
    assert required_samples(0.05, 0.05, 0.9) == 342
    assert required_samples(0.05, 0.05, 0.5) == 738


def test_adaptive_never_exceeds_worst_case():
    for eps in (0.01, 0.05, 0.1, 0.3):
        for dlt in (0.01, 0.05, 0.2):
            worst = required_samples(eps, dlt)
            for k in range(101):
                assert 1 <= required_samples(eps, dlt, k / 100) <= worst
            assert required_samples(eps, dlt, 0.5) == worst


def test_bound_monotone_in_parameters():
    epsilons = [0.01, 0.02, 0.05, 0.1, 0.2, 0.4]
    deltas = [0.001, 0.01, 0.05, 0.1, 0.5]
    for d in deltas:
        ns = [required_samples(e, d) for e in epsilons]
        assert ns == sorted(ns, reverse=True)
    for e in epsilons:
        ns = [required_samples(e, d) for d in deltas]
        assert ns == sorted(ns, reverse=True)


def test_bound_argument_errors():
    for eps, dlt in [(0.5, 0.05), (0, 0.05), (0.05, 1), (0.05, 0), ("x", 0.05)]:
        with pytest.raises(ArgumentError):
            required_samples(eps, dlt)
    with pytest.raises(ArgumentError):
        required_samples(0.05, 0.05, 1.5)


def test_config_validation():
    assert SmcConfig(epsilon="0.05").epsilon == Fraction(1, 20)
    for kw in [dict(epsilon=0.6), dict(delta=0), dict(workers=0), dict(max_samples=True), dict(seed=2**70), dict(seed="1")]:
        with pytest.raises(ArgumentError):
            SmcConfig(**kw)
    assert SmcConfig(workers=1).batch_size == 64
    assert SmcConfig(workers=16).batch_size == 128


# run_trial


def test_trial_stops_on_first_observation():
    cs = coin()
    r = run_trial(cs, [prop("now", "(F 0 inf (prop C@l))")], SmcConfig(), 0)
    assert r.verdicts == {"now": Verdict.TRUE} and r.length == 1 and r.reason == RESOLVED


def test_trial_completion_resolves_unbounded():
    cs = coin("1")
    props = [prop("g", "(G 0 inf (prop C@l))"), prop("f", "(F 0 inf (prop heads))")]
    r = run_trial(cs, props, SmcConfig(), 0)
    assert r.verdicts == {"g": Verdict.FALSE, "f": Verdict.TRUE}


def test_trial_deadlock_applies_end_of_trace():
    cs = coin("1")
    r = run_trial(cs, [prop("g", "(G 0 inf (not (prop C@nowhere)))")], SmcConfig(), 0)
    assert r.verdicts["g"] is Verdict.TRUE and r.reason == COMPLETE


def test_trial_length_cap_leaves_unknown():
    loop = ProgramGraph("L", ("a",), ("a",), {}, (PgTransition("a", "t", "a"),))
    r = run_trial(single(loop), [prop("g", "(G 0 inf (prop L@a))")], SmcConfig(max_trace_length=50), 0)
    assert r.verdicts["g"] is Verdict.UNKNOWN and r.reason == LENGTH_CAP and r.length == 51


def test_trial_time_lock_leaves_unknown():
    late = ProgramGraph("L", ("a", "b"), ("a",), {}, (PgTransition("a", "t", "b", clock_guard=ClockGe("x", 100)),), {"x"})
    cs = single(late, horizon=10)
    r = run_trial(cs, [prop("f", "(F 0 inf (prop L@b))")], SmcConfig(), 0)
    assert r.verdicts["f"] is Verdict.UNKNOWN and r.reason == TIME_LOCK


def test_trial_waits_for_all_properties():
    cs = coin("1")
    props = [prop("fails", "(prop C@done)"), prop("later", "(F 0 inf (prop heads))")]
    r = run_trial(cs, props, SmcConfig(), 0)
    assert r.verdicts == {"fails": Verdict.FALSE, "later": Verdict.TRUE}


def test_deterministic_model_same_result_any_index():
    cs = coin("1")
    props = [prop("f", "(F 0 inf (prop heads))")]
    results = {(tuple(run_trial(cs, props, SmcConfig(), i).verdicts.items()), run_trial(cs, props, SmcConfig(), i).length) for i in range(20)}
    assert len(results) == 1


def test_early_stop_matches_full_trace():
    """Verdicts recorded with early stopping equal offline evaluation of the full run."""
    from chansmc.channel_system import cs_step
    from chansmc.kernel import Observation, Rng
    from chansmc.mtl import evaluate
    from chansmc.program_graph import Terminal

    pg = ProgramGraph(
        "W",
        ("a",),
        ("a",),
        {"s": BoundedInt(0, 3)},
        (
            PgTransition("a", "step", "a", guard=E("s < 3"), clock_guard=clock_eq("x", 1), resets={"x"},
                         effect=Effect((("1/2", (("s", E("s + 1")),)), ("1/2", (("s", E("s")),))))),
        ),
        {"x"},
        initial_valuation={"s": 0},
    )
    cs = single(pg, propositions={"top": E("s == 3"), "one": E("s >= 1")})
    props = [prop("soon", "(F 0 4 (prop top))"), prop("first", "(F 0 1 (prop one))")]
    cfg = SmcConfig(seed=9)
    for i in range(30):
        r = run_trial(cs, props, cfg, i)
        rng = Rng(cfg.seed).split(i)
        s, now = cs.sample_initial_state(rng), 0
        trace = [Observation(cs.labels(s), None, 0)]
        while True:
            step = cs_step(cs, s, now, rng)
            if isinstance(step, Terminal):
                break
            s, ev, now = step
            trace.append(Observation(cs.labels(s), ev, now))
        for p in props:
            assert r.verdicts[p.name] is evaluate(p.formula, trace, complete=True)


# estimate


def test_certain_property():
    rep = estimate(coin("1"), [prop("f", "(F 0 inf (prop heads))")], SmcConfig())
    p = rep.for_property("f")
    assert p.estimate == 1 and p.n == required_samples(0.05, 0.05, 1) and p.done and not rep.budget_exhausted


def test_report_fields():
    rep = estimate(coin(), [prop("f", "(F 0 inf (prop heads))")], SmcConfig(seed=3))
    p = rep.for_property("f")
    assert p.k <= p.n <= 738 and 0 <= p.estimate <= 1
    j = rep.to_json()
    assert j["confidence"] == "19/20" and j["properties"][0]["interval"][1] - j["properties"][0]["interval"][0] == pytest.approx(0.1)
    assert "wall_time" not in j and "wall_time" in rep.to_json(timing=True)
    with pytest.raises(KeyError):
        rep.for_property("nope")


def test_budget_exhausted():
    rep = estimate(coin(), [prop("f", "(F 0 inf (prop heads))")], SmcConfig(max_samples=10))
    assert rep.budget_exhausted and rep.trials == 10


def test_inconclusive_counted_and_flagged():
    loop = ProgramGraph("L", ("a",), ("a",), {}, (PgTransition("a", "t", "a"),))
    rep = estimate(single(loop), [prop("g", "(G 0 inf (prop L@a))")], SmcConfig(max_trace_length=5, max_samples=100))
    p = rep.for_property("g")
    assert p.n == 0 and p.inconclusive == 100 and p.estimate is None and rep.inconclusive_flagged
    assert rep.to_json()["properties"][0]["interval"] is None


def test_properties_close_independently():
    rep = estimate(coin(), [prop("certain", "(prop C@l)"), prop("fair", "(F 0 inf (prop heads))")], SmcConfig())
    certain, fair = rep.properties
    assert certain.done and fair.done
    assert certain.n == required_samples(0.05, 0.05, 1) < fair.n


def test_fair_coin_coverage():
    cs = coin()
    props = [prop("f", "(F 0 inf (prop heads))")]
    hits = sum(abs(estimate(cs, props, SmcConfig(seed=s)).for_property("f").estimate - 0.5) <= 0.05 for s in range(100))
    assert hits >= 95


def test_workers_do_not_change_report():
    cs = coin()
    props = [prop("f", "(F 0 inf (prop heads))"), prop("g", "(G 0 inf (not (prop heads)))")]
    a = estimate(cs, props, SmcConfig(seed=5, workers=1)).to_json()
    b = estimate(cs, props, SmcConfig(seed=5, workers=4)).to_json()
    assert a == b


def test_on_trial_in_order():
    seen = []
    estimate(coin(), [prop("f", "(F 0 inf (prop heads))")], SmcConfig(max_samples=100), on_trial=lambda r: seen.append(r.index))
    assert seen == list(range(len(seen)))


def test_estimate_argument_errors():
    with pytest.raises(ArgumentError):
        estimate(coin(), [], SmcConfig())
    with pytest.raises(ArgumentError):
        estimate(coin(), [prop("f", "true"), prop("f", "false")], SmcConfig())
