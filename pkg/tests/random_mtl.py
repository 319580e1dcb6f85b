"""Random formulas and traces for differential testing of the MTL oracle."""

import random
from fractions import Fraction

from chansmc.kernel import EventKind, EventRecord, Observation
from chansmc.mtl.formula import (
    And,
    Const,
    EventAtom,
    Eventually,
    Globally,
    Historically,
    Implies,
    Not,
    Once,
    Or,
    Prop,
    Since,
    Until,
)

PROPS = ("p", "q")
BOUNDS = (0, Fraction(1, 2), 1, 2, 3)


def _interval(r):
    lo = r.choice(BOUNDS)
    hi = r.choice([None] + [b for b in BOUNDS if b >= lo])
    return lo, hi


def _atom(r):
    k = r.random()
    if k < 0.6:
        return Prop(r.choice(PROPS))
    if k < 0.9:
        return _event_atom(r)
    return Const(r.random() < 0.5)


def _event_atom(r):
    direction = r.choice([None, "send", "receive"])
    if r.random() < 0.5:
        return EventAtom("c", direction)
    return EventAtom("c", direction, None, r.choice(["==", "<", ">="]), r.randrange(3))


def random_formula(r: random.Random, depth: int = 3):
    if depth == 0 or r.random() < 0.25:
        return _atom(r)
    d = depth - 1
    op = r.randrange(11)
    if op == 0:
        return Not(random_formula(r, d))
    if op == 1:
        return And((random_formula(r, d), random_formula(r, d)))
    if op == 2:
        return Or((random_formula(r, d), random_formula(r, d)))
    if op == 3:
        return Implies(random_formula(r, d), random_formula(r, d))
    lo, hi = _interval(r)
    if op == 4:
        return Until(lo, hi, random_formula(r, d), random_formula(r, d))
    if op == 5:
        return Since(lo, hi, random_formula(r, d), random_formula(r, d))
    cls = {6: Eventually, 7: Globally, 8: Once, 9: Historically, 10: Eventually}[op]
    return cls(lo, hi, random_formula(r, d))


def random_trace(r: random.Random, max_len: int = 8):
    n = r.randint(1, max_len)
    t = Fraction(0)
    out = []
    for i in range(n):
        if i:
            t += r.choice([0, Fraction(1, 2), 1, 1, 2])
        labels = frozenset(p for p in PROPS if r.random() < 0.5)
        event = None
        if i and r.random() < 0.6:
            kind = r.choice([EventKind.SEND, EventKind.RECEIVE, EventKind.HANDSHAKE, EventKind.INTERNAL])
            if kind is EventKind.INTERNAL:
                event = EventRecord(kind, source_pg="A", action="t")
            else:
                event = EventRecord(kind, r.choice(["c", "d"]), r.randrange(3), "A", "B")
        out.append(Observation(labels, event, t))
    return out
