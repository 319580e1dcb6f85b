"""Channel systems: program graphs composed over FIFO and handshake channels.

A step of the composed system is one of

* an interleaved internal transition of a single program graph,
* a send, receive or emptiness probe on a buffered channel
  (capacity >= 1, first-in first-out), or
* a handshake: a matching send/receive pair on a capacity-0 channel taken
  atomically by two distinct program graphs.

Clocks are global and advance uniformly; a step fires at the earliest grid
time at which at least one move is enabled, chosen uniformly among the
moves enabled at that time.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Optional

from chansmc.errors import ArgumentError, ContractError, ModelError
from chansmc.expr import Expr, ExprError, domain_type, infer_type, to_text, type_fits
from chansmc.kernel import (
    CLOCK_TRUE,
    EventKind,
    EventRecord,
    Rng,
    VarDomain,
    check_bits,
    clock_and,
    domain_contains,
    earliest_delay,
    eval_constraint,
    normalize_value,
    rat,
    value_in_domain,
)
from chansmc.program_graph import (
    DEFAULT_HORIZON,
    DEFAULT_QUANTUM,
    PgTransition,
    ProgramGraph,
    Terminal,
    _Uncached,
    apply_assignments,
    uniform_resolver,
)

# --------------------------------------------------------------------------
# Communication actions


@dataclass(frozen=True)
class Send(_Uncached):
    """``!(p,q,x)`` / ``!(p,q,<m>)``: enqueue the value of ``expr``.

    A variable read gives the send-variable form and a constant the
    send-constant form; any expression over the sender's variables is allowed.
    """

    channel: str
    expr: Expr

    @cached_property
    def _c_expr(self):
        return self.expr.compile()

    def __str__(self):
        return f"!({self.channel}, {to_text(self.expr)})"


@dataclass(frozen=True)
class Receive:
    """``?(q,p,x)``: dequeue the front into ``targets`` (destructured if several)."""

    channel: str
    targets: tuple

    def __post_init__(self):
        t = self.targets
        object.__setattr__(self, "targets", (t,) if isinstance(t, str) else tuple(t))
        if not self.targets:
            raise ArgumentError("receive needs at least one target variable")

    def __str__(self):
        return f"?({self.channel}, {', '.join(self.targets)})"


@dataclass(frozen=True)
class ReceiveConst:
    """``?(q,p,<m>)``: dequeue only when the front equals ``value``."""

    channel: str
    value: object

    def __post_init__(self):
        object.__setattr__(self, "value", normalize_value(self.value))

    def __str__(self):
        return f"?({self.channel}, <{self.value}>)"


@dataclass(frozen=True)
class ProbeEmpty:
    channel: str

    def __str__(self):
        return f"empty({self.channel})"


@dataclass(frozen=True)
class ProbeNonEmpty:
    channel: str

    def __str__(self):
        return f"nonempty({self.channel})"


CommAction = (Send, Receive, ReceiveConst, ProbeEmpty, ProbeNonEmpty)
_RECEIVER_SIDE = (Receive, ReceiveConst, ProbeEmpty, ProbeNonEmpty)


# --------------------------------------------------------------------------
# Declarations and states


@dataclass(frozen=True)
class ChannelDecl:
    """A channel from a set of sender graphs to a single receiver graph.

    Capacity 0 is a handshake channel; capacity >= 1 a FIFO buffer.  The
    sender set may be empty for a queue nobody writes to.
    """

    id: str
    senders: frozenset
    receiver: str
    capacity: int
    message_domain: VarDomain

    def __post_init__(self):
        s = self.senders
        object.__setattr__(self, "senders", frozenset((s,) if isinstance(s, str) else s))
        if not isinstance(self.capacity, int) or self.capacity < 0:
            raise ModelError(f"channel {self.id!r}: capacity must be a non-negative integer")

    @property
    def handshake(self) -> bool:
        return self.capacity == 0


def location_label(pg_name: str, location: str) -> str:
    return f"{pg_name}@{location}"


@dataclass(frozen=True)
class CsState:
    locations: tuple
    valuation: Mapping
    clocks: Mapping
    channels: Mapping

    def key(self):
        return (
            self.locations,
            tuple(sorted(self.valuation.items())),
            tuple(sorted(self.clocks.items())),
            tuple(sorted(self.channels.items())),
        )

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        if not isinstance(other, CsState):
            return NotImplemented
        return self.key() == other.key()


@dataclass(frozen=True)
class Move:
    """One alternative of the composed transition relation.

    ``kind`` is ``internal``, ``send``, ``receive``, ``probe`` or
    ``handshake``; for handshakes ``pg``/``transition`` is the sender and
    ``partner_pg``/``partner`` the receiver.
    """

    kind: str
    pg: int
    transition: PgTransition
    partner_pg: Optional[int] = None
    partner: Optional[PgTransition] = None

    @property
    def clock_guard(self):
        if self.partner is None:
            return self.transition.clock_guard
        return clock_and(self.transition.clock_guard, self.partner.clock_guard)

    @property
    def resets(self):
        if self.partner is None:
            return self.transition.resets
        return self.transition.resets | self.partner.resets


@dataclass(frozen=True, eq=False)
class ChannelSystem(_Uncached):
    pgs: tuple
    channels: tuple = ()
    propositions: Mapping = field(default_factory=dict)
    quantum: object = DEFAULT_QUANTUM
    horizon: int = DEFAULT_HORIZON
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pgs", tuple(self.pgs))
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "propositions", dict(self.propositions))
        object.__setattr__(self, "quantum", rat(self.quantum))
        self.validate()

    # -- lookups -------------------------------------------------------------

    @cached_property
    def _c_channel_map(self):
        return {c.id: c for c in self.channels}

    def channel(self, cid) -> ChannelDecl:
        try:
            return self._c_channel_map[cid]
        except KeyError:
            raise ModelError(f"undeclared channel {cid!r}") from None

    @cached_property
    def _c_pg_index(self):
        return {pg.name: i for i, pg in enumerate(self.pgs)}

    def pg_index(self, name) -> int:
        return self._c_pg_index[name]

    @cached_property
    def variables(self) -> dict:
        out = {}
        for pg in self.pgs:
            out.update(pg.variables)
        return out

    @cached_property
    def clocks(self) -> frozenset:
        return frozenset().union(*(pg.clocks for pg in self.pgs)) if self.pgs else frozenset()

    @cached_property
    def var_owner(self) -> dict:
        return {v: pg.name for pg in self.pgs for v in pg.variables}

    # -- well-formedness -------------------------------------------------------

    def validate(self) -> None:
        if not self.pgs:
            raise ModelError("channel system without program graphs")
        names = [pg.name for pg in self.pgs]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate program graph names: {names}")
        seen: dict = {}
        for pg in self.pgs:
            for v in list(pg.variables) + sorted(pg.clocks):
                if v in seen:
                    raise ModelError(
                        f"name {v!r} declared by both {seen[v]} and {pg.name}; prefix variables with their graph"
                    )
                seen[v] = pg.name
        ids = [c.id for c in self.channels]
        if len(set(ids)) != len(ids):
            raise ModelError(f"duplicate channel ids: {ids}")
        for c in self.channels:
            for p in c.senders | {c.receiver}:
                if p not in names:
                    raise ModelError(f"channel {c.id!r} refers to unknown program graph {p!r}")
        types = {v: domain_type(d) for v, d in self.variables.items()}
        for name, g in self.propositions.items():
            try:
                if infer_type(g, types) != "bool":
                    raise ModelError(f"proposition {name!r} is not boolean")
            except ExprError as exc:
                raise ModelError(f"proposition {name!r}: {exc}") from None
        for pg in self.pgs:
            ptypes = pg.var_types()
            for t in pg.transitions:
                a = t.comm
                if a is None:
                    continue
                where = f"{pg.name}: {t.source}->{t.target} {a}"
                if not isinstance(a, CommAction):
                    raise ModelError(f"{where}: not a communication action")
                c = self.channel(a.channel)
                if t.effect.assigned():
                    raise ModelError(f"{where}: communication transitions cannot carry assignments")
                if isinstance(a, Send):
                    if pg.name not in c.senders:
                        raise ModelError(f"{where}: {pg.name} is not a sender on {c.id}")
                    try:
                        et = infer_type(a.expr, ptypes)
                    except ExprError as exc:
                        raise ModelError(f"{where}: {exc}") from None
                    if not type_fits(et, domain_type(c.message_domain)):
                        raise ModelError(f"{where}: sends {et} on channel of {c.message_domain}")
                else:
                    if pg.name != c.receiver:
                        raise ModelError(f"{where}: {pg.name} is not the receiver of {c.id}")
                    if isinstance(a, (ProbeEmpty, ProbeNonEmpty)) and c.handshake:
                        raise ModelError(f"{where}: cannot probe handshake channel")
                    if isinstance(a, Receive):
                        self._check_receive_targets(pg, a, c, where)
                    if isinstance(a, ReceiveConst) and not value_in_domain(a.value, c.message_domain):
                        raise ModelError(f"{where}: constant outside channel domain")

    @staticmethod
    def _check_receive_targets(pg, a, c, where):
        for v in a.targets:
            if v not in pg.variables:
                raise ModelError(f"{where}: receive into undeclared variable {v!r}")
        if len(a.targets) == 1:
            parts = [(a.targets[0], c.message_domain)]
        else:
            md = c.message_domain
            if md.kind != "tuple" or len(md.items) != len(a.targets):
                raise ModelError(f"{where}: cannot destructure {md} into {len(a.targets)} variables")
            parts = list(zip(a.targets, md.items))
        for v, d in parts:
            if not domain_contains(pg.variables[v], d):
                raise ModelError(f"{where}: domain of {v!r} does not contain channel domain {d}")

    # -- initial states --------------------------------------------------------

    @cached_property
    def _c_initial_parts(self):
        parts = []
        for pg in self.pgs:
            parts.append((list(pg.initial_locations), pg.initial_valuations()))
        return parts

    def empty_channels(self) -> dict:
        return {c.id: () for c in self.channels}

    def sample_initial_state(self, rng: Rng) -> CsState:
        """Uniform draw from :func:`cs_initial_states` without enumerating it."""
        locs, env = [], {}
        for l0s, envs in self._c_initial_parts:
            locs.append(l0s[rng.below(len(l0s))])
            env.update(envs[rng.below(len(envs))])
        return CsState(tuple(locs), env, {x: 0 for x in sorted(self.clocks)}, self.empty_channels())

    # -- labels -----------------------------------------------------------------

    @cached_property
    def _c_props(self):
        return {name: g.compile() for name, g in self.propositions.items()}

    def labels(self, s: CsState, wanted=None) -> frozenset:
        """Location labels ``pg@loc`` plus the declared propositions that hold.

        ``wanted`` restricts the result to a set of label names.
        """
        out = set()
        for pg, loc in zip(self.pgs, s.locations):
            lab = location_label(pg.name, loc)
            if wanted is None or lab in wanted:
                out.add(lab)
        for name, f in self._c_props.items():
            if (wanted is None or name in wanted) and f(s.valuation):
                out.add(name)
        return frozenset(out)


# --------------------------------------------------------------------------
# Table of communication actions on buffered channels


def comm_enabled(action, xi: Mapping, env: Mapping, cs: ChannelSystem) -> bool:
    """Enabledness of a communication action on a buffered channel."""
    c = cs.channel(action.channel)
    if c.handshake:
        raise ContractError(f"comm_enabled called on handshake channel {c.id!r}")
    buf = xi[c.id]
    if isinstance(action, Send):
        return len(buf) < c.capacity
    if isinstance(action, Receive):
        return len(buf) > 0
    if isinstance(action, ReceiveConst):
        return len(buf) > 0 and buf[0] == action.value
    if isinstance(action, ProbeEmpty):
        return len(buf) == 0
    if isinstance(action, ProbeNonEmpty):
        return len(buf) > 0
    raise ArgumentError(f"not a communication action: {action!r}")


def _sent_value(action: Send, env, c: ChannelDecl):
    v = normalize_value(action._c_expr(env))
    if not value_in_domain(v, c.message_domain):
        raise ModelError(f"value {v!r} sent on {c.id!r} outside {c.message_domain}")
    return v


def _store(targets, value, env, variables, where) -> dict:
    out = dict(env)
    parts = [(targets[0], value)] if len(targets) == 1 else list(zip(targets, value))
    for v, x in parts:
        if isinstance(x, Fraction):
            check_bits(x, v)
        if not value_in_domain(x, variables[v]):
            raise ModelError(f"{where}: received value {x!r} outside domain of {v!r}")
        out[v] = x
    return out


def comm_effect(action, xi: Mapping, env: Mapping, cs: ChannelSystem, pg_name: Optional[str] = None):
    """Apply an enabled buffered communication action.

    Returns ``(xi2, env2, event)``; the inputs are left untouched.
    """
    c = cs.channel(action.channel)
    if c.handshake:
        raise ContractError(f"comm_effect called on handshake channel {c.id!r}")
    buf = xi[c.id]
    if isinstance(action, Send):
        v = _sent_value(action, env, c)
        xi2 = dict(xi)
        xi2[c.id] = buf + (v,)
        return xi2, env, EventRecord(EventKind.SEND, c.id, v, pg_name, c.receiver)
    if isinstance(action, (Receive, ReceiveConst)):
        v = buf[0]
        xi2 = dict(xi)
        xi2[c.id] = buf[1:]
        env2 = env
        if isinstance(action, Receive):
            env2 = _store(action.targets, v, env, cs.variables, f"receive on {c.id}")
        return xi2, env2, EventRecord(EventKind.RECEIVE, c.id, v, pg_name or c.receiver, None)
    if isinstance(action, (ProbeEmpty, ProbeNonEmpty)):
        return xi, env, EventRecord(EventKind.INTERNAL, c.id, None, pg_name or c.receiver)
    raise ArgumentError(f"not a communication action: {action!r}")


# --------------------------------------------------------------------------
# Moves


def _data_moves(cs: ChannelSystem, s: CsState) -> list:
    """Moves whose data guards and channel conditions hold, ignoring clocks."""
    env, xi = s.valuation, s.channels
    moves = []
    hs_send: dict = {}
    hs_recv: dict = {}
    for i, (pg, loc) in enumerate(zip(cs.pgs, s.locations)):
        for t in pg.outgoing(loc):
            if not t._c_guard(env):
                continue
            a = t.comm
            if a is None:
                moves.append(Move("internal", i, t))
                continue
            c = cs.channel(a.channel)
            if c.handshake:
                (hs_send if isinstance(a, Send) else hs_recv).setdefault(c.id, []).append((i, t))
                continue
            if comm_enabled(a, xi, env, cs):
                kind = (
                    "send"
                    if isinstance(a, Send)
                    else "probe"
                    if isinstance(a, (ProbeEmpty, ProbeNonEmpty))
                    else "receive"
                )
                moves.append(Move(kind, i, t))
    for cid, senders in hs_send.items():
        receivers = hs_recv.get(cid)
        if not receivers:
            continue
        c = cs.channel(cid)
        for (i, ts), (j, tr) in itertools.product(senders, receivers):
            if i == j:
                continue
            if isinstance(tr.comm, ReceiveConst) and _sent_value(ts.comm, env, c) != tr.comm.value:
                continue
            moves.append(Move("handshake", i, ts, j, tr))
    return moves


def cs_enabled_moves(cs: ChannelSystem, s: CsState) -> list:
    """Moves enabled in ``s`` at the current clock values.

    Ordered by program graph index, then declaration order, handshakes last.
    """
    nu = s.clocks
    return [m for m in _data_moves(cs, s) if eval_constraint(m.clock_guard, nu)]


def _branches(cs: ChannelSystem, move: Move):
    if move.kind == "internal":
        return [p for p, _ in move.transition.effect.branches]
    return [1]


def apply_move(cs: ChannelSystem, s: CsState, move: Move, branch: int = 0):
    """Successor state and event of ``move`` (effect branch ``branch``)."""
    pg = cs.pgs[move.pg]
    t = move.transition
    locs = list(s.locations)
    locs[move.pg] = t.target
    env, xi = s.valuation, s.channels
    if move.kind == "internal":
        env = apply_assignments(t, branch, env, cs.variables)
        event = EventRecord(EventKind.INTERNAL, source_pg=pg.name, action=t.action)
    elif move.kind == "handshake":
        c = cs.channel(t.comm.channel)
        v = _sent_value(t.comm, env, c)
        receiver = move.partner
        locs[move.partner_pg] = receiver.target
        if isinstance(receiver.comm, Receive):
            env = _store(receiver.comm.targets, v, env, cs.variables, f"handshake on {c.id}")
        event = EventRecord(
            EventKind.HANDSHAKE, c.id, v, pg.name, cs.pgs[move.partner_pg].name, t.action
        )
    else:
        xi, env, event = comm_effect(t.comm, xi, env, cs, pg.name)
        event = EventRecord(event.kind, event.channel, event.payload, event.source_pg, event.target_pg, t.action)
    clocks = s.clocks
    resets = move.resets
    if resets:
        clocks = dict(clocks)
        for x in resets:
            clocks[x] = 0
    return CsState(tuple(locs), env, clocks, xi), event


def _advance_state(s: CsState, delay) -> CsState:
    if not delay:
        return s
    clocks = {x: check_bits(rat(v + delay), x) for x, v in s.clocks.items()}
    return CsState(s.locations, s.valuation, clocks, s.channels)


def _timed_candidates(cs: ChannelSystem, s: CsState):
    """``(delay, moves)`` of the earliest-enabled moves, or a Terminal."""
    data = _data_moves(cs, s)
    if not data:
        return Terminal("deadlock")
    best, ready, reachable_any = None, [], False
    nu, q, h = s.clocks, cs.quantum, cs.horizon
    for m in data:
        g = m.clock_guard
        if g == CLOCK_TRUE:
            d, reachable = 0, True
        else:
            d, reachable = earliest_delay(g, nu, q, h)
        reachable_any |= reachable
        if d is None:
            continue
        if best is None or d < best:
            best, ready = d, [m]
        elif d == best:
            ready.append(m)
    if best is None:
        return Terminal("time-lock" if reachable_any else "deadlock")
    return best, ready


def cs_step(cs: ChannelSystem, s: CsState, now, rng: Rng, resolver=None):
    """One step of the composed system.

    Returns ``(state, event, new_now)`` or a :class:`Terminal`.
    """
    resolver = resolver or uniform_resolver
    cand = _timed_candidates(cs, s)
    if isinstance(cand, Terminal):
        return cand
    delay, ready = cand
    s = _advance_state(s, delay)
    move = ready[resolver(ready, s, rng)]
    branch = move.transition.effect.sample(rng) if move.kind == "internal" else 0
    s2, event = apply_move(cs, s, move, branch)
    return s2, event, rat(rat(now) + delay)


def cs_successors(cs: ChannelSystem, s: CsState):
    """All ``(move, probability, state)`` alternatives of one step from ``s``."""
    cand = _timed_candidates(cs, s)
    if isinstance(cand, Terminal):
        return []
    delay, ready = cand
    s = _advance_state(s, delay)
    out = []
    for m in ready:
        for b, p in enumerate(_branches(cs, m)):
            s2, _ = apply_move(cs, s, m, b)
            out.append((m, p, s2))
    return out


def cs_initial_states(cs: ChannelSystem) -> list:
    """Every initial state: initial locations times satisfying valuations, empty channels, zero clocks."""
    per_pg = []
    for pg in cs.pgs:
        envs = pg.initial_valuations()
        per_pg.append([(l0, env) for l0 in pg.initial_locations for env in envs])
    total = math.prod(len(x) for x in per_pg)
    if total == 0:
        raise ModelError("no initial state")
    zero = {x: 0 for x in sorted(cs.clocks)}
    out = []
    for combo in itertools.product(*per_pg):
        env = {}
        for _, e in combo:
            env.update(e)
        out.append(CsState(tuple(l for l, _ in combo), env, dict(zero), cs.empty_channels()))
    return out


def reachable_states(cs: ChannelSystem, limit: int = 100_000) -> set:
    """Breadth-first closure of :func:`cs_successors` from every initial state."""
    frontier = list(cs_initial_states(cs))
    seen = set(frontier)
    while frontier:
        nxt = []
        for s in frontier:
            for _, _, s2 in cs_successors(cs, s):
                if s2 not in seen:
                    seen.add(s2)
                    if len(seen) > limit:
                        raise ModelError(f"more than {limit} reachable states")
                    nxt.append(s2)
        frontier = nxt
    return seen


def single(pg: ProgramGraph, **kwargs) -> ChannelSystem:
    """Wrap one program graph as a channel system with no channels."""
    kwargs.setdefault("quantum", pg.quantum)
    kwargs.setdefault("horizon", pg.horizon)
    return ChannelSystem((pg,), (), **kwargs)
