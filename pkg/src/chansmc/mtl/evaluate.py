"""Offline three-valued evaluation over a finite timed trace.

Point-based semantics at observation indices.  Values are ``True``,
``False`` or ``None`` (unknown) combined with strong Kleene connectives.

For an incomplete trace the future operators keep an unknown disjunct for
witnesses that may still arrive: ``f U[a,b] g`` at ``i`` is the disjunction,
over ``j >= i`` with ``t_j - t_i`` in ``[a, b]``, of ``g@j`` and ``f`` on
``[i, j)``; plus ``f`` on ``[i, n)`` and unknown when the trace may still be
extended within the window.  A complete trace drops that disjunct, which
gives strong semantics to existential and weak semantics to universal
obligations.
"""

from __future__ import annotations

from typing import Optional, Sequence

from chansmc.errors import ArgumentError
from chansmc.mtl.formula import (
    And,
    Const,
    EventAtom,
    Formula,
    Not,
    Or,
    Prop,
    Since,
    Until,
    Verdict,
    atom_holds,
    normalize,
)


def k_not(a):
    return None if a is None else not a


def k_and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def k_or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _until_at(lo, hi, left, right, times, i, complete) -> Optional[bool]:
    n = len(times)
    t0 = times[i]
    acc = False
    pre = True
    j = i
    while j < n:
        dt = times[j] - t0
        if hi is not None and dt > hi:
            return acc
        if dt >= lo:
            acc = k_or(acc, k_and(pre, right[j]))
            if acc is True:
                return True
        pre = k_and(pre, left[j])
        if pre is False:
            return acc
        j += 1
    if complete:
        return acc
    return k_or(acc, k_and(pre, None))


def _since_at(lo, hi, left, right, times, i) -> Optional[bool]:
    t0 = times[i]
    acc = False
    post = True
    for j in range(i, -1, -1):
        dt = t0 - times[j]
        if hi is not None and dt > hi:
            break
        if dt >= lo:
            acc = k_or(acc, k_and(post, right[j]))
            if acc is True:
                return True
        post = k_and(post, left[j])
        if post is False:
            break
    return acc


def evaluate_all(phi: Formula, trace: Sequence, complete: bool = False) -> list:
    """Values of ``phi`` at every position, bottom-up over subformulas."""
    obs = list(trace)
    n = len(obs)
    times = [o.time for o in obs]
    for a, b in zip(times, times[1:]):
        if b < a:
            raise ArgumentError("trace timestamps must be non-decreasing")
    memo: dict = {}

    def go(f):
        if f in memo:
            return memo[f]
        if isinstance(f, Const):
            out = [f.value] * n
        elif isinstance(f, (Prop, EventAtom)):
            out = [atom_holds(f, o) for o in obs]
        elif isinstance(f, Not):
            out = [k_not(v) for v in go(f.arg)]
        elif isinstance(f, (And, Or)):
            op = k_and if isinstance(f, And) else k_or
            out = [isinstance(f, And)] * n
            for p in f.parts:
                out = [op(a, b) for a, b in zip(out, go(p))]
        elif isinstance(f, Until):
            left, right = go(f.left), go(f.right)
            out = [_until_at(f.lo, f.hi, left, right, times, i, complete) for i in range(n)]
        elif isinstance(f, Since):
            left, right = go(f.left), go(f.right)
            out = [_since_at(f.lo, f.hi, left, right, times, i) for i in range(n)]
        else:
            raise ArgumentError(f"unexpected formula node {f!r}")
        memo[f] = out
        return out

    return go(normalize(phi))


def evaluate(phi: Formula, trace: Sequence, i: int = 0, complete: bool = False) -> Verdict:
    """Verdict of ``phi`` at position ``i``.

    ``complete=True`` evaluates as if the trace has ended for good.
    """
    n = len(trace)
    if not 0 <= i < n:
        raise ArgumentError(f"position {i} outside trace of length {n}")
    return Verdict.of(evaluate_all(phi, trace, complete)[i])
