"""Independent reference implementations used as test oracles.

None of these reuse the package's semantics code: the MTL evaluator
recurses directly on the textbook definitions, the channel-system BFS
implements the composition rules from scratch, and the reachability
oracle works on a plain transition matrix.
"""

from __future__ import annotations

from fractions import Fraction

from chansmc.expr import evaluate as eval_expr
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

# -- three-valued MTL by direct recursion ---------------------------------------


def _not(a):
    return None if a is None else not a


def _all(vals):
    vals = list(vals)
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def _any(vals):
    vals = list(vals)
    if any(v is True for v in vals):
        return True
    if any(v is None for v in vals):
        return None
    return False


def _in(d, lo, hi):
    return d >= lo and (hi is None or d <= hi)


def _open(trace, i, hi):
    """Can a later observation still fall inside the window starting at ``i``?"""
    return hi is None or trace[-1].time - trace[i].time <= hi


def _event_ok(a: EventAtom, ev):
    if ev is None:
        return False
    kind = ev.kind.value
    if a.direction == "send" and kind not in ("channel-send", "handshake"):
        return False
    if a.direction == "receive" and kind not in ("channel-receive", "handshake"):
        return False
    if a.direction is None and kind == "internal-action":
        return False
    if ev.channel != a.channel:
        return False
    if a.op is None:
        return True
    v = ev.payload
    if a.index is not None:
        if not isinstance(v, tuple) or a.index >= len(v):
            return False
        v = v[a.index]
    ops = {
        "==": lambda x, y: x == y,
        "!=": lambda x, y: x != y,
        "<": lambda x, y: x < y,
        "<=": lambda x, y: x <= y,
        ">": lambda x, y: x > y,
        ">=": lambda x, y: x >= y,
    }
    try:
        return ops[a.op](v, a.value)
    except TypeError:
        return False


def naive_eval(phi, trace, i, complete):
    """Verdict (True/False/None) of ``phi`` at position ``i``."""
    n = len(trace)
    rec = lambda f, k: naive_eval(f, trace, k, complete)  # noqa: E731
    if isinstance(phi, Const):
        return phi.value
    if isinstance(phi, Prop):
        return phi.name in trace[i].labels
    if isinstance(phi, EventAtom):
        return _event_ok(phi, trace[i].event)
    if isinstance(phi, Not):
        return _not(rec(phi.arg, i))
    if isinstance(phi, And):
        return _all(rec(p, i) for p in phi.parts)
    if isinstance(phi, Or):
        return _any(rec(p, i) for p in phi.parts)
    if isinstance(phi, Implies):
        return _any([_not(rec(phi.left, i)), rec(phi.right, i)])
    t0 = trace[i].time
    if isinstance(phi, Until):
        options = []
        for j in range(i, n):
            if _in(trace[j].time - t0, phi.lo, phi.hi):
                options.append(_all([rec(phi.right, j)] + [rec(phi.left, k) for k in range(i, j)]))
        if not complete and _open(trace, i, phi.hi):
            options.append(_all([rec(phi.left, k) for k in range(i, n)] + [None]))
        return _any(options)
    if isinstance(phi, Eventually):
        options = [rec(phi.arg, j) for j in range(i, n) if _in(trace[j].time - t0, phi.lo, phi.hi)]
        if not complete and _open(trace, i, phi.hi):
            options.append(None)
        return _any(options)
    if isinstance(phi, Globally):
        needs = [rec(phi.arg, j) for j in range(i, n) if _in(trace[j].time - t0, phi.lo, phi.hi)]
        if not complete and _open(trace, i, phi.hi):
            needs.append(None)
        return _all(needs)
    if isinstance(phi, Since):
        options = []
        for j in range(i, -1, -1):
            if _in(t0 - trace[j].time, phi.lo, phi.hi):
                options.append(_all([rec(phi.right, j)] + [rec(phi.left, k) for k in range(j + 1, i + 1)]))
        return _any(options)
    if isinstance(phi, Once):
        return _any(rec(phi.arg, j) for j in range(i + 1) if _in(t0 - trace[j].time, phi.lo, phi.hi))
    if isinstance(phi, Historically):
        return _all(rec(phi.arg, j) for j in range(i + 1) if _in(t0 - trace[j].time, phi.lo, phi.hi))
    raise TypeError(phi)


# -- channel-system reachability, composition rules written out -----------------------


def _key(locs, env, chans):
    return (tuple(locs), tuple(sorted(env.items())), tuple(sorted(chans.items())))


def bfs_reachable(cs) -> set:
    """State keys reachable in an untimed channel system.

    Implements interleaving of internal steps, buffered send/receive/probe
    and capacity-0 handshakes, each from its definition.
    """
    assert not cs.clocks, "oracle handles untimed systems only"
    caps = {c.id: c.capacity for c in cs.channels}
    starts = []
    import itertools

    per_pg = [[(l, env) for l in pg.initial_locations for env in pg.initial_valuations()] for pg in cs.pgs]
    for combo in itertools.product(*per_pg):
        env = {}
        for _, e in combo:
            env.update(e)
        starts.append(([l for l, _ in combo], env, {c: () for c in caps}))
    seen = {_key(*s) for s in starts}
    todo = list(starts)

    def push(locs, env, chans):
        k = _key(locs, env, chans)
        if k not in seen:
            seen.add(k)
            todo.append((locs, env, chans))

    def store(targets, value, env):
        env = dict(env)
        if len(targets) == 1:
            env[targets[0]] = value
        else:
            for v, x in zip(targets, value):
                env[v] = x
        return env

    while todo:
        locs, env, chans = todo.pop()
        for i, pg in enumerate(cs.pgs):
            for t in pg.transitions:
                if t.source != locs[i] or not eval_expr(t.guard, env):
                    continue
                a = t.comm
                nl = list(locs)
                nl[i] = t.target
                kind = type(a).__name__ if a is not None else None
                if a is None:
                    for _, assigns in t.effect.branches:
                        e2 = dict(env)
                        for v, e in assigns:
                            e2[v] = eval_expr(e, env)
                        push(nl, e2, chans)
                    continue
                cap = caps[a.channel]
                buf = chans[a.channel]
                if cap == 0:
                    if kind != "Send":
                        continue
                    v = eval_expr(a.expr, env)
                    for j, pg2 in enumerate(cs.pgs):
                        if j == i:
                            continue
                        for r in pg2.transitions:
                            if r.source != locs[j] or r.comm is None or r.comm.channel != a.channel:
                                continue
                            if type(r.comm).__name__ not in ("Receive", "ReceiveConst"):
                                continue
                            if not eval_expr(r.guard, env):
                                continue
                            if type(r.comm).__name__ == "ReceiveConst" and r.comm.value != v:
                                continue
                            nl2 = list(nl)
                            nl2[j] = r.target
                            e2 = store(r.comm.targets, v, env) if type(r.comm).__name__ == "Receive" else env
                            push(nl2, e2, chans)
                    continue
                c2 = dict(chans)
                if kind == "Send":
                    if len(buf) < cap:
                        c2[a.channel] = buf + (eval_expr(a.expr, env),)
                        push(nl, env, c2)
                elif kind == "Receive":
                    if buf:
                        c2[a.channel] = buf[1:]
                        push(nl, store(a.targets, buf[0], env), c2)
                elif kind == "ReceiveConst":
                    if buf and buf[0] == a.value:
                        c2[a.channel] = buf[1:]
                        push(nl, env, c2)
                elif kind == "ProbeEmpty":
                    if not buf:
                        push(nl, env, chans)
                elif kind == "ProbeNonEmpty":
                    if buf:
                        push(nl, env, chans)
    return seen


def state_key(s):
    return _key(s.locations, s.valuation, s.channels)


# -- exact reachability on a Markov chain ---------------------------------------------


def reach_probability(matrix, start, goal, steps) -> Fraction:
    """P(reach ``goal`` within ``steps`` transitions), by enumerating every path."""
    total = Fraction(0)

    def walk(s, k, p):
        nonlocal total
        if s == goal:
            total += p
            return
        if k == 0:
            return
        for t, q in matrix[s].items():
            walk(t, k - 1, p * q)

    walk(start, steps, Fraction(1))
    return total
