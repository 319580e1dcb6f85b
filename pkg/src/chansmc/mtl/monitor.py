"""Online monitor: incremental three-valued verdicts over a growing trace.

The monitor answers the same question as :func:`evaluate` at position 0 but
consumes observations one at a time.  Subformula values are computed on
demand and memoized only once conclusive, which is sound because conclusive
values never change when the trace grows.  Each ``until`` instance keeps a
pointer past the prefix of positions already known to neither witness nor
violate it, so re-evaluation after an append resumes where it stopped.

For formulas without past operators everything before the lowest pointer
still reachable from the root is dropped.
"""

from __future__ import annotations

from chansmc.errors import ArgumentError, TraceError
from chansmc.mtl.evaluate import k_and, k_not, k_or
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
    event_matches,
    normalize,
)

_CONST, _PROP, _EVENT, _NOT, _AND, _OR, _UNTIL, _SINCE = range(8)

_PRUNE_EVERY = 128


class _Node:
    __slots__ = ("id", "kind", "payload", "kids", "lo", "hi")

    def __init__(self, nid, kind, payload=None, kids=(), lo=0, hi=None):
        self.id = nid
        self.kind = kind
        self.payload = payload
        self.kids = kids
        self.lo = lo
        self.hi = hi


def _compile(phi: Formula):
    nodes: list = []
    index: dict = {}

    def go(f):
        if f in index:
            return index[f]
        if isinstance(f, Const):
            node = _Node(len(nodes), _CONST, f.value)
        elif isinstance(f, Prop):
            node = _Node(len(nodes), _PROP, f.name)
        elif isinstance(f, EventAtom):
            node = _Node(len(nodes), _EVENT, f)
        elif isinstance(f, Not):
            kid = go(f.arg)
            node = _Node(len(nodes), _NOT, kids=(kid,))
        elif isinstance(f, (And, Or)):
            kids = tuple(go(p) for p in f.parts)
            node = _Node(len(nodes), _AND if isinstance(f, And) else _OR, kids=kids)
        elif isinstance(f, (Until, Since)):
            kids = (go(f.left), go(f.right))
            node = _Node(len(nodes), _UNTIL if isinstance(f, Until) else _SINCE, kids=kids, lo=f.lo, hi=f.hi)
        else:
            raise ArgumentError(f"unexpected formula node {f!r}")
        nodes.append(node)
        index[f] = node
        return node

    root = go(phi)
    return root, nodes


class Monitor:
    """Online verdict for one formula.

    Feed observations with :meth:`update`; call :meth:`end_of_trace` when
    the execution has finished to resolve the remaining obligations.
    """

    def __init__(self, phi: Formula):
        self.formula = phi
        self._root, nodes = _compile(normalize(phi))
        self._has_past = any(n.kind == _SINCE for n in nodes)
        self._memo = [dict() for _ in nodes]
        self._ptr = [dict() if n.kind == _UNTIL else None for n in nodes]
        self._times: list = []
        self._labels: list = []
        self._events: list = []
        self._base = 0
        self._n = 0
        self._complete = False
        self._verdict = Verdict.UNKNOWN
        self._since_prune = 0

    @property
    def verdict(self) -> Verdict:
        return self._verdict

    @property
    def length(self) -> int:
        return self._n

    @property
    def retained(self) -> int:
        """Observations currently held in memory."""
        return len(self._times)

    def update(self, obs) -> Verdict:
        """Append one observation and return the (possibly still unknown) verdict."""
        if self._complete:
            raise TraceError("observation after end of trace")
        t = obs.time
        if self._times and t < self._times[-1]:
            raise TraceError(f"timestamp {t} precedes previous {self._times[-1]}")
        self._times.append(t)
        self._labels.append(obs.labels)
        self._events.append(obs.event)
        self._n += 1
        if self._verdict is Verdict.UNKNOWN:
            self._verdict = Verdict.of(self._val(self._root, 0))
            if self._verdict is Verdict.UNKNOWN and not self._has_past:
                self._since_prune += 1
                if self._since_prune >= _PRUNE_EVERY:
                    self._since_prune = 0
                    self._prune()
        return self._verdict

    def end_of_trace(self) -> Verdict:
        """Definite verdict for a finished execution (unknown only for an empty trace)."""
        self._complete = True
        if self._verdict is Verdict.UNKNOWN and self._n:
            self._verdict = Verdict.of(self._val(self._root, 0))
        return self._verdict

    # -- evaluation ------------------------------------------------------------

    def _val(self, node, i):
        memo = self._memo[node.id]
        v = memo.get(i)
        if v is not None:
            return v
        k = node.kind
        if k == _PROP:
            v = node.payload in self._labels[i - self._base]
        elif k == _EVENT:
            v = event_matches(node.payload, self._events[i - self._base])
        elif k == _CONST:
            v = node.payload
        elif k == _NOT:
            v = k_not(self._val(node.kids[0], i))
        elif k == _AND:
            v = True
            for kid in node.kids:
                v = k_and(v, self._val(kid, i))
                if v is False:
                    break
        elif k == _OR:
            v = False
            for kid in node.kids:
                v = k_or(v, self._val(kid, i))
                if v is True:
                    break
        elif k == _UNTIL:
            v = self._until(node, i)
        else:
            v = self._since(node, i)
        if v is not None:
            memo[i] = v
        return v

    def _until(self, node, i):
        states = self._ptr[node.id]
        st = states.get(i)
        if st is None:
            st = states[i] = [i, self._times[i - self._base]]
        j, t0 = st
        lo, hi = node.lo, node.hi
        left, right = node.kids
        times, base, n = self._times, self._base, self._n
        acc = False
        pre = True
        advancing = True
        while j < n:
            dt = times[j - base] - t0
            if hi is not None and dt > hi:
                return acc
            r = False
            if dt >= lo:
                r = self._val(right, j)
                if r is True and pre is True:
                    return True
                acc = k_or(acc, k_and(pre, r))
            l = self._val(left, j)
            if advancing:
                if r is False and l is True:
                    st[0] = j + 1
                else:
                    advancing = False
            pre = k_and(pre, l)
            if pre is False:
                return acc
            j += 1
        if self._complete:
            return acc
        # a witness may still arrive within the window
        return None

    def _since(self, node, i):
        left, right = node.kids
        lo, hi = node.lo, node.hi
        if lo == 0 and hi is None:
            # s(i) = right(i) or (left(i) and s(i-1)), resumed from the last conclusive value
            memo = self._memo[node.id]
            k = i - 1
            while k >= 0 and k not in memo:
                k -= 1
            s = memo[k] if k >= 0 else False
            for m in range(k + 1, i + 1):
                s = k_or(self._val(right, m), k_and(self._val(left, m), s))
                if s is not None:
                    memo[m] = s
            return s
        times, base = self._times, self._base
        t0 = times[i - base]
        acc = False
        post = True
        for j in range(i, -1, -1):
            dt = t0 - times[j - base]
            if hi is not None and dt > hi:
                break
            if dt >= lo:
                acc = k_or(acc, k_and(post, self._val(right, j)))
                if acc is True:
                    return True
            post = k_and(post, self._val(left, j))
            if post is False:
                break
        return acc

    # -- memory ----------------------------------------------------------------

    def _low(self, node, i):
        """Lowest position a future evaluation of ``node`` at ``i`` can read."""
        if i in self._memo[node.id]:
            return self._n
        if node.kind == _UNTIL:
            st = self._ptr[node.id].get(i)
            return i if st is None else st[0]
        if node.kind in (_NOT, _AND, _OR):
            return min((self._low(k, i) for k in node.kids), default=self._n)
        return i

    def _prune(self):
        low = self._low(self._root, 0)
        drop = low - self._base
        if drop <= 0:
            return
        del self._times[:drop]
        del self._labels[:drop]
        del self._events[:drop]
        self._base = low
        # position 0 carries the root's own entries and is kept
        for memo in self._memo:
            for key in [k for k in memo if 0 < k < low]:
                del memo[key]
        for states in self._ptr:
            if states is not None:
                for key in [k for k in states if 0 < k < low]:
                    del states[key]


def online_update(monitor: Monitor, obs):
    """Feed ``obs``; returns ``(monitor, verdict)`` with ``verdict`` None while unknown."""
    v = monitor.update(obs)
    return monitor, (v if v.conclusive else None)


def end_of_trace(monitor: Monitor) -> Verdict:
    return monitor.end_of_trace()
