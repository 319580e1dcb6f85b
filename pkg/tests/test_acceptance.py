"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``PASS``/``FAIL`` line.  Run on its own with
``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""

import io
import json
import math
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest
from scipy.stats import chi2_contingency

from chansmc.channel_system import cs_step, reachable_states
from chansmc.cli import main as cli_main
from chansmc.expr import parse_expr as E
from chansmc.kernel import BoundedInt, Rng
from chansmc.manifest import build, load_manifest
from chansmc.mtl import Monitor, evaluate, to_sexpr
from chansmc.program_graph import Effect, PgTransition, ProgramGraph, Terminal, pg_step, policy_resolver
from chansmc.smc import SmcConfig, estimate, required_samples

sys.path.insert(0, str(Path(__file__).parent))

from fixtures_cs import producer_consumer  # noqa: E402
from oracles import bfs_reachable, reach_probability, state_key  # noqa: E402
from random_mtl import random_formula, random_trace  # noqa: E402
from test_channel_system import GRID, table_cell  # noqa: E402
from test_mtl import agree  # noqa: E402
from test_scxml import _simulate_scxml, doc, parse_scxml, pingpong  # noqa: E402
from chansmc.scxml import compile as compile_scxml  # noqa: E402

MODELS = Path(__file__).resolve().parent.parent / "models"


def verdict(number, ok, detail, out=print):
    out(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    return ok


@pytest.fixture
def say(capsys):
    def write(line):
        with capsys.disabled():
            print("\n" + line)

    return write


def run_cli(*argv):
    buf = io.StringIO()
    code = cli_main([str(a) for a in argv], buf)
    return code, buf.getvalue()


# 1. exact-probability reproduction


REACH3 = {
    0: {0: Fraction(1, 5), 1: Fraction(4, 5)},
    1: {0: Fraction(1, 10), 1: Fraction(1, 5), 2: Fraction(7, 10)},
    2: {2: Fraction(1)},
}


def check_exact_probability(out=print):
    exact = reach_probability(REACH3, 0, 2, 6)
    manifest = MODELS / "reach3" / "manifest.json"
    start = time.perf_counter()
    close = 0
    for seed in range(100):
        code, text = run_cli("verify", "--json", "--seed", seed, manifest)
        assert code == 0
        p_hat = json.loads(text)["properties"][0]["estimate"]
        close += abs(p_hat - float(exact)) <= 0.02
    elapsed = time.perf_counter() - start
    ok = close >= 99 and elapsed < 60
    return verdict(1, ok, f"p_exact={exact}, {close}/100 runs within 0.02, {elapsed:.1f}s", out)


def test_exact_probability(say):
    assert check_exact_probability(say)


# 2. sample bounds


def check_sample_bounds(out=print):
    eps, delta = 0.05, 0.05
    worst = math.ceil(math.log(2 / delta) / (2 * eps**2))
    shift = max(0.0, abs(0.9 - 0.5) - 2 * eps / 3)
    adaptive = min(worst, math.ceil(2 / eps**2 * (0.25 - (shift) ** 2) * math.log(2 / delta)))
    got = (required_samples(eps, delta, None), required_samples(eps, delta, 0.9))
    ok = got == (738, 342) == (worst, adaptive)
    return verdict(2, ok, f"required_samples -> {got}, direct formulas -> {(worst, adaptive)}", out)


def test_sample_bounds(say):
    assert check_sample_bounds(say)


# 3. semantics equivalence


def check_semantics(out=print):
    cs = producer_consumer()
    oracle = bfs_reachable(cs)
    rng = Rng(2024)
    s, now = cs.sample_initial_state(rng), 0
    seen = {state_key(s)}
    for _ in range(100_000):
        r = cs_step(cs, s, now, rng)
        if isinstance(r, Terminal):
            s, now = cs.sample_initial_state(rng), 0
        else:
            s, _, now = r
        seen.add(state_key(s))
    explored = {state_key(x) for x in reachable_states(cs)}
    ok = seen <= oracle and explored == oracle and len(oracle) <= 500
    detail = f"{len(seen)} simulated states within oracle set of {len(oracle)}; exhaustive set equal: {explored == oracle}"
    return verdict(3, ok, detail, out)


def test_semantics_equivalence(say):
    assert check_semantics(say)


# 4. communication table


def check_table(out=print):
    failures = [(a, b, msg) for a, b in GRID if (msg := table_cell(a, b)) is not None]
    return verdict(4, not failures and len(GRID) == 12, f"{len(GRID) - len(failures)}/{len(GRID)} cells conform" + (f", failures {failures}" if failures else ""), out)


def test_communication_table(say):
    assert check_table(say)


# 5. SCXML translation fidelity


PINGPONG_START = [
    (0, "send", "ping", "Ping", "Pong", {"n": 0}),
    (0, "receive", "ping", "Ping", "Pong", {"n": 0}),
    (5, "send", "pong", "Pong", "Ping", {}),
    (5, "receive", "pong", "Pong", "Ping", {}),
    (5, "send", "ping", "Ping", "Pong", {"n": 1}),
    (5, "receive", "ping", "Ping", "Pong", {"n": 1}),
]


def check_translation(out=print):
    cs = pingpong(MODELS)
    channels = len(cs.channels)
    records, _ = _simulate_scxml(cs, 0)
    first = [(r["t"], r["kind"], r["event"], r["origin"], r["target"], r["params"]) for r in records[:6]]
    # B sends "go" with delay 4 at time 0; A answers with delay 5
    a = doc('<state id="s"><transition event="go" target="t"><send event="e2" target="B" delay="5"/></transition></state><state id="t"/>', "A")
    b = doc('<state id="s"><onentry><send event="go" target="A" delay="4"/></onentry><transition event="e2" target="s"/></state>', "B")
    delayed, _ = _simulate_scxml(compile_scxml([parse_scxml(a), parse_scxml(b)]), 0)
    go = next(r for r in delayed if r["event"] == "go" and r["kind"] == "receive")
    e2_sent = next(r for r in delayed if r["event"] == "e2" and r["kind"] == "send")
    e2_seen = next(r for r in delayed if r["event"] == "e2" and r["kind"] == "receive")
    delay_ok = Fraction(go["t"]) == 4 and Fraction(e2_sent["t"]) == Fraction(go["t"]) + 5 and e2_seen["t"] == e2_sent["t"]
    ok = channels == 5 and first == PINGPONG_START and delay_ok
    detail = f"{channels} channels, first six events match: {first == PINGPONG_START}, delay 5 at t={go['t']} observed at {e2_sent['t']}"
    return verdict(5, ok, detail, out)


def test_translation_fidelity(say):
    assert check_translation(say)


# 6. online oracle against the naive evaluator


def check_oracle(out=print):
    r = random.Random(606)
    mismatches, monotone_breaks = 0, 0
    for _ in range(10_000):
        phi, tr = random_formula(r, 3), random_trace(r, 8)
        if agree(phi, tr) is not None:
            mismatches += 1
        verdicts = [evaluate(phi, tr[:k]) for k in range(1, len(tr) + 1)] + [evaluate(phi, tr, complete=True)]
        for i, v in enumerate(verdicts):
            if v.conclusive and any(w is not v for w in verdicts[i + 1 :]):
                monotone_breaks += 1
                break
    ok = mismatches == 0 and monotone_breaks == 0
    return verdict(6, ok, f"10000 pairs, {mismatches} disagreements, {monotone_breaks} monotonicity breaks", out)


def test_oracle_equivalence(say):
    assert check_oracle(say)


# 7. Markov property under a fixed policy


def markov_pts():
    """Three states in ``s``; each has actions ``a`` and ``b`` with different distributions."""
    dists = {
        (0, "a"): {1: Fraction(1, 2), 2: Fraction(1, 2)},
        (0, "b"): {0: Fraction(1)},
        (1, "a"): {0: Fraction(1, 5), 1: Fraction(3, 10), 2: Fraction(1, 2)},
        (1, "b"): {2: Fraction(1)},
        (2, "a"): {0: Fraction(1)},
        (2, "b"): {1: Fraction(1)},
    }
    ts = [
        PgTransition("l", act, "l", guard=E(f"s == {k}"), effect=Effect(tuple((p, (("s", E(str(v))),)) for v, p in d.items())))
        for (k, act), d in dists.items()
    ]
    return ProgramGraph("M", ("l",), ("l",), {"s": BoundedInt(0, 2)}, ts, initial_valuation={"s": 0})


def check_markov(out=print, n=100_000):
    g = markov_pts()
    resolver = policy_resolver(lambda st: "b" if st.valuation["s"] == 2 else "a")
    rng = Rng(77)
    # histories 0->1 and 0->2->1 both end in state 1
    counts = {"0,1": [0, 0, 0], "0,2,1": [0, 0, 0]}

    def step(st):
        return pg_step(g, st, 0, rng, resolver)[0]

    start = g.initial_states()[0]
    while min(sum(c) for c in counts.values()) < n:
        st = step(start)
        hist = "0,1"
        if st.valuation["s"] == 2:
            st = step(st)
            hist = "0,2,1"
        if sum(counts[hist]) < n:
            counts[hist][step(st).valuation["s"]] += 1
    table = [counts["0,1"], counts["0,2,1"]]
    _, p_value, _, _ = chi2_contingency(table)
    ok = p_value > 0.01
    return verdict(7, ok, f"next-state counts {table}, chi-square p={p_value:.3f} (reject below 0.01)", out)


def test_markov_property(say):
    assert check_markov(say)


# 8. reproducibility across worker counts


def check_reproducible(out=print):
    results = {}
    for model in ("coin", "pingpong", "reach3"):
        manifest = MODELS / model / "manifest.json"
        outputs = {w: run_cli("verify", "--json", "--seed", 9, "--workers", w, manifest)[1] for w in (1, 4, 8)}
        results[model] = len(set(outputs.values())) == 1 and outputs[1]
    ok = all(results.values())
    return verdict(8, ok, f"reports byte-identical for workers 1/4/8 on {', '.join(k for k, v in results.items() if v)}", out)


def test_reproducible(say):
    assert check_reproducible(say)


# 9. coverage calibration


def check_coverage(out=print):
    loaded = build(load_manifest(MODELS / "coin" / "manifest.json"))
    props = loaded.properties.properties
    hits = 0
    for seed in range(200):
        report = estimate(loaded.cs, props, SmcConfig(epsilon="0.05", delta="0.05", seed=seed))
        hits += abs(report.for_property("heads").estimate - 0.3) <= 0.05
    ok = hits / 200 >= 0.92
    return verdict(9, ok, f"{hits}/200 runs within 0.05 of 0.3 ({hits / 200:.3f}, need 0.92)", out)


def test_coverage(say):
    assert check_coverage(say)


CHECKS = [
    check_exact_probability,
    check_sample_bounds,
    check_semantics,
    check_table,
    check_translation,
    check_oracle,
    check_markov,
    check_reproducible,
    check_coverage,
]

if __name__ == "__main__":
    results = [check() for check in CHECKS]
    sys.exit(0 if all(results) else 1)
