"""Translation of SCXML automata into a timed probabilistic channel system.

Each automaton ``A`` becomes one program graph.  Generated names use ``:``
(which SCXML identifiers cannot contain) so they never clash with the
datamodel, whose location ``x`` becomes the variable ``A.x``:

* ``A:event`` / ``A:origin`` hold the ids of the event being processed and
  of its sender (``-1`` before the first event);
* ``A:e:p`` holds parameter ``p`` of the last received event ``e``;
* ``A:randK`` and ``A:clockK`` are fresh variables for ``Math.random()``
  draws and delayed sends.

Channels: ``q_int:A`` (internal queue, event ids), ``q_ext:A`` (external
queue, ``(event, origin)`` pairs) and ``c:e:O:A`` carrying the parameters
of ``e`` sent by ``O`` to ``A``.

Per state ``s`` the graph has an entry location ``s``; the ``<onentry>``
chain; the eventless transitions tested in document order; an
event-reading location; and the eventful transitions tested in document
order, falling back to the event-reading location.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional

from chansmc.channel_system import (
    ChannelDecl,
    ChannelSystem,
    ProbeEmpty,
    Receive,
)
from chansmc.channel_system import Send as SendAction
from chansmc.expr import (
    BOOL,
    INT,
    RAT,
    TRUE,
    And,
    BinOp,
    Cmp,
    Const,
    Expr,
    ExprError,
    Neg,
    Not,
    Or,
    Proj,
    RequireEvent,
    Resolver,
    TupleExpr,
    Var,
    conj,
    disj,
    evaluate,
    infer_type,
    join_types,
    neg,
    parse_expr,
)
from chansmc.kernel import (
    CLOCK_TRUE,
    Boolean,
    BoundedInt,
    Int64,
    RationalDomain,
    TupleDomain,
    clock_eq,
    normalize_value,
    rat,
)
from chansmc.program_graph import DEFAULT_HORIZON, DEFAULT_QUANTUM, NO_EFFECT, Effect, PgTransition, ProgramGraph
from chansmc.scxml.catalog import EventCatalog, build_catalog, walk_content
from chansmc.scxml.parser import Assign, If, Raise, ScxmlAutomaton, Send
from chansmc.errors import ModelError, ScxmlError

RANDOM_POINTS = 1000
DEFAULT_CAPACITY = 8


def event_var(a: str) -> str:
    return f"{a}:event"


def origin_var(a: str) -> str:
    return f"{a}:origin"


def data_var(a: str, loc: str) -> str:
    return f"{a}.{loc}"


def param_var(a: str, e: str, p: str) -> str:
    return f"{a}:{e}:{p}"


def internal_queue(a: str) -> str:
    return f"q_int:{a}"


def external_queue(a: str) -> str:
    return f"q_ext:{a}"


def param_channel(e: str, origin: str, receiver: str) -> str:
    return f"c:{e}:{origin}:{receiver}"


# --------------------------------------------------------------------------
# Expressions


@dataclass
class RandomDraw:
    """A fresh variable sampled right before the expression that uses it.

    ``prob`` is set for the Bernoulli idiom ``Math.random() < c``; otherwise
    the variable is uniform over ``RANDOM_POINTS`` interval midpoints.
    """

    var: str
    prob: Optional[Fraction] = None

    def effect(self) -> Effect:
        if self.prob is not None:
            p = self.prob
            if p >= 1:
                return Effect.assign((self.var, Const(True)))
            if p <= 0:
                return Effect.assign((self.var, Const(False)))
            return Effect(((p, ((self.var, Const(True)),)), (1 - p, ((self.var, Const(False)),))))
        w = Fraction(1, RANDOM_POINTS)
        return Effect(
            tuple((w, ((self.var, Const(Fraction(2 * k + 1, 2 * RANDOM_POINTS))),)) for k in range(RANDOM_POINTS))
        )

    @property
    def type(self):
        return BOOL if self.prob is not None else RAT


@dataclass
class ExprContext:
    """Where an expression occurs, which decides how names resolve.

    ``events`` lists the events statically known to be loaded (eventful
    transitions); ``event_loaded`` tells whether some event is guaranteed to
    have been dequeued; ``forbid_event`` rejects ``_event`` outright.
    """

    automaton: str
    datamodel: frozenset
    catalog: EventCatalog
    strings: dict
    events: Optional[tuple] = None
    event_loaded: bool = False
    forbid_event: bool = False
    allow_random: bool = True
    where: str = ""
    counter: list = field(default_factory=lambda: [0])


class _ScxmlResolver(Resolver):
    def __init__(self, ctx: ExprContext):
        self.ctx = ctx
        self.draws: list = []

    def _fail(self, msg, pos=None):
        raise ExprError(msg, pos)

    def name(self, node):
        ctx, parts = self.ctx, node.parts
        a = ctx.automaton
        if parts[0] == "_event":
            if ctx.forbid_event:
                self._fail("_event is read before any event can have been processed", node.pos)
            if parts == ("_event", "origin"):
                v = Var(origin_var(a))
            elif len(parts) == 3 and parts[1] == "data":
                v = Var(self._param(parts[2], node.pos))
            else:
                self._fail(f"unsupported system variable {'.'.join(parts)}", node.pos)
            return v if ctx.event_loaded else RequireEvent(event_var(a), v)
        if len(parts) == 1 and parts[0] in ctx.datamodel:
            return Var(data_var(a, parts[0]))
        if parts[0] == "Math":
            self._fail(f"{'.'.join(parts)} is only supported as Math.random()", node.pos)
        self._fail(f"unknown datamodel location {'.'.join(parts)}", node.pos)

    def _param(self, p, pos):
        ctx = self.ctx
        cands = ctx.events if ctx.events is not None else [e.name for e in ctx.catalog.incoming(ctx.automaton)]
        having = [e for e in cands if e in ctx.catalog.events and p in ctx.catalog.events[e].params]
        if not having:
            self._fail(f"no event received here carries parameter {p!r}", pos)
        if len(having) > 1:
            self._fail(f"_event.data.{p} is ambiguous between events {having}", pos)
        return param_var(ctx.automaton, having[0], p)

    def call(self, node, args):
        if node.parts == ("Math", "random") and not args:
            if not self.ctx.allow_random:
                self._fail("Math.random() is not allowed here", node.pos)
            self.ctx.counter[0] += 1
            d = RandomDraw(f"{self.ctx.automaton}:rand{self.ctx.counter[0]}")
            self.draws.append(d)
            return Var(d.var)
        self._fail(f"unsupported function {'.'.join(node.parts)}()", node.pos)

    def string(self, node):
        return Const(self.ctx.strings.setdefault(node.value, len(self.ctx.strings)))


def _rebuild(e: Expr, f) -> Expr:
    """Bottom-up rewrite with ``f`` applied to every rebuilt node."""
    if isinstance(e, (Neg, Not)):
        e = type(e)(_rebuild(e.arg, f))
    elif isinstance(e, (BinOp, Cmp)):
        e = type(e)(e.op, _rebuild(e.left, f), _rebuild(e.right, f))
    elif isinstance(e, (And, Or)):
        e = type(e)(tuple(_rebuild(p, f) for p in e.parts))
    elif isinstance(e, Proj):
        e = Proj(_rebuild(e.arg, f), e.index)
    elif isinstance(e, TupleExpr):
        e = TupleExpr(tuple(_rebuild(x, f) for x in e.items))
    elif isinstance(e, RequireEvent):
        e = RequireEvent(e.event_var, _rebuild(e.arg, f))
    return f(e)


def _bernoulli_idiom(e: Expr, draws: dict) -> Expr:
    """``Math.random() < c`` (either orientation) becomes a fresh boolean."""
    if not (isinstance(e, Cmp) and e.op in ("<", "<=")):
        return e
    left, right = e.left, e.right
    if isinstance(left, Var) and left.name in draws and isinstance(right, Const):
        d, p = draws[left.name], right.value
    elif isinstance(right, Var) and right.name in draws and isinstance(left, Const):
        d, p = draws[right.name], 1 - left.value
    else:
        return e
    if isinstance(p, (bool, tuple)):
        return e
    d.prob = min(max(Fraction(p), Fraction(0)), Fraction(1))
    return Var(d.var)


def translate_expr(text: str, ctx: ExprContext):
    """Translate a datamodel expression; returns ``(expr, draws)``.

    ``draws`` are the :class:`RandomDraw` instances the expression reads;
    they must be sampled before it is evaluated.
    """
    r = _ScxmlResolver(ctx)
    try:
        e = parse_expr(text, r)
    except ExprError as exc:
        raise ScxmlError(
            f"{ctx.where}: untranslatable expression {text!r}: {exc}",
            element="expression",
            restriction="translatable expression",
            source=ctx.where,
        ) from None
    if r.draws:
        by_var = {d.var: d for d in r.draws}
        e = _rebuild(e, lambda n: _bernoulli_idiom(n, by_var))
    return e, r.draws


# --------------------------------------------------------------------------
# Program graph construction


class _Graph:
    def __init__(self, name):
        self.name = name
        self.locations: list = []
        self._used: set = set()
        self.transitions: list = []
        self.clocks: list = []

    def loc(self, hint) -> str:
        """Fresh location; a hint ending in ``.`` always gets a number."""
        k = 1
        name = f"{hint}{k}" if hint.endswith(".") else hint
        while name in self._used:
            k += 1
            name = f"{hint}{k}"
        self._used.add(name)
        self.locations.append(name)
        return name

    def add(self, src, dst, action, guard=TRUE, clock_guard=CLOCK_TRUE, resets=(), effect=NO_EFFECT, comm=None):
        self.transitions.append(PgTransition(src, action, dst, guard, clock_guard, frozenset(resets), effect, comm))


class _AutomatonCompiler:
    def __init__(self, aut: ScxmlAutomaton, catalog: EventCatalog, strings: dict, quantum):
        self.aut = aut
        self.name = aut.name
        self.cat = catalog
        self.strings = strings
        self.quantum = quantum
        self.g = _Graph(aut.name)
        self.datamodel = frozenset(d[0] for d in aut.datamodel)
        self.counter = [0]
        self.clock_counter = 0
        self.constraints: list = []  # (var, expr, where)
        self.sends: list = []  # (event, receiver, param exprs by name, where)
        self.draws: list = []
        # an automaton nobody sends to and that raises nothing never reads events
        self.listens = bool(catalog.incoming(aut.name)) or any(
            isinstance(item, Raise)
            for st in aut.states
            for block in (st.onentry, st.onexit, *(t.body for t in st.transitions))
            for item in walk_content(block)
        )

    def where(self, line) -> str:
        return f"{self.aut.source or self.name}:{line}" if line else (self.aut.source or self.name)

    def ctx(self, line, **kw) -> ExprContext:
        return ExprContext(self.name, self.datamodel, self.cat, self.strings, where=self.where(line), counter=self.counter, **kw)

    def expr(self, text, ctx):
        e, draws = translate_expr(text, ctx)
        self.draws.extend(draws)
        return e, draws

    def sample(self, src, draws, hint) -> str:
        for d in draws:
            dst = self.g.loc(hint)
            self.g.add(src, dst, "random", effect=d.effect())
            src = dst
        return src

    # -- executable content ------------------------------------------------

    def block(self, items, src, dst, ectx) -> None:
        """Lower ``items`` from ``src`` to the pre-allocated ``dst``."""
        if not items:
            self.g.add(src, dst, "skip")
            return
        cur = src
        for k, item in enumerate(items):
            nxt = dst if k == len(items) - 1 else self.g.loc(f"{src}.")
            self.item(item, cur, nxt, ectx)
            cur = nxt

    def item(self, item, src, dst, ectx) -> None:
        a = self.name
        c = replace(ectx, where=self.where(getattr(item, "line", None)))
        if isinstance(item, Assign):
            if item.location not in self.datamodel:
                raise ScxmlError(
                    f"{c.where}: assignment to undeclared location {item.location!r}",
                    element="assign",
                    restriction="datamodel locations only",
                    source=c.where,
                )
            e, draws = self.expr(item.expr, c)
            src = self.sample(src, draws, f"{src}.r.")
            v = data_var(a, item.location)
            self.constraints.append((v, e, c.where))
            self.g.add(src, dst, f"assign:{item.location}", effect=Effect.assign((v, e)))
        elif isinstance(item, Raise):
            eid = self.cat.event_id(item.event)
            self.g.add(src, dst, f"raise:{item.event}", comm=SendAction(internal_queue(a), Const(eid)))
        elif isinstance(item, Send):
            self.send(item, src, dst, c)
        elif isinstance(item, If):
            self.if_(item, src, dst, c)
        else:
            raise ScxmlError(f"{c.where}: unsupported executable content {item!r}")

    def if_(self, item: If, src, dst, c) -> None:
        guards, all_draws = [], []
        for cond, _ in item.branches:
            if cond is None:
                guards.append(None)
                continue
            e, draws = self.expr(cond, c)
            all_draws.extend(draws)
            guards.append(e)
        src = self.sample(src, all_draws, f"{src}.r.")
        previous: list = []
        has_else = guards[-1] is None
        for g, (_, body) in zip(guards, item.branches):
            guard = conj(*(neg(p) for p in previous), *(() if g is None else (g,)))
            if g is not None:
                previous.append(g)
            if body:
                start = self.g.loc(f"{src}.if.")
                self.g.add(src, start, "branch", guard=guard)
                self.block(body, start, dst, c)
            else:
                self.g.add(src, dst, "branch", guard=guard)
        if not has_else:
            self.g.add(src, dst, "branch", guard=conj(*(neg(p) for p in previous)))

    def send(self, item: Send, src, dst, c) -> None:
        a = self.name
        info = self.cat.event(item.event)
        values = {}
        draws: list = []
        for pname, text in item.params:
            e, d = self.expr(text, c)
            draws.extend(d)
            values[pname] = e
        if item.target is not None:
            receivers = [(item.target, TRUE)]
        else:
            texpr, d = self.expr(item.targetexpr, c)
            draws.extend(d)
            receivers = [
                (r, Cmp("==", texpr, Const(self.cat.automaton_id(r)))) for r in self.cat.receivers_of(item.event)
            ]
        src = self.sample(src, draws, f"{src}.r.")
        clock_guard, resets = CLOCK_TRUE, ()
        if item.delay:
            d = rat(item.delay)
            if Fraction(d) % Fraction(self.quantum):
                raise ScxmlError(
                    f"{c.where}: delay {d} is not a multiple of the time quantum {self.quantum}",
                    element="send",
                    restriction="delay on the time grid",
                    source=c.where,
                )
            self.clock_counter += 1
            clk = f"{a}:clock{self.clock_counter}"
            self.g.clocks.append(clk)
            wait = self.g.loc(f"{src}.delay.")
            self.g.add(src, wait, f"delay:{item.event}", resets=(clk,))
            src = wait
            clock_guard = clock_eq(clk, d)
        msg = Const((info.id, self.cat.automaton_id(a)))
        for r, guard in receivers:
            self.sends.append((item.event, r, values, c.where))
            if info.params:
                mid = self.g.loc(f"{src}.sent.")
                self.g.add(src, mid, f"send:{item.event}", guard, clock_guard, comm=SendAction(external_queue(r), msg))
                ordered = [values[p] for p in info.params]
                payload = ordered[0] if len(ordered) == 1 else TupleExpr(tuple(ordered))
                self.g.add(mid, dst, f"params:{item.event}", comm=SendAction(param_channel(item.event, a, r), payload))
            else:
                self.g.add(src, dst, f"send:{item.event}", guard, clock_guard, comm=SendAction(external_queue(r), msg))
        if item.target is None:
            missed = conj(*(neg(g) for _, g in receivers))
            self.g.add(src, dst, f"send-dropped:{item.event}", missed, clock_guard)

    # -- states ----------------------------------------------------------------

    def build(self) -> None:
        for s in self.aut.states:
            self.g.loc(s.id)
        for s in self.aut.states:
            self.state(s)

    def state(self, s) -> None:
        a = self.name
        initial = s.id == self.aut.initial_state
        base = dict(event_loaded=False, forbid_event=initial)
        ready = s.id
        if s.onentry:
            ready = self.g.loc(f"{s.id}:entered")
            self.block(s.onentry, s.id, ready, self.ctx(s.line, **base))
        eventless = [t for t in s.transitions if t.eventless]
        eventful = [t for t in s.transitions if not t.eventless]
        cur = ready
        for k, t in enumerate(eventless):
            c = self.ctx(t.line, **base)
            if t.cond is not None:
                g, draws = self.expr(t.cond, c)
            else:
                g, draws = TRUE, []
            cur = self.sample(cur, draws, f"{s.id}:r.")
            self.take(s, t, cur, g, replace(c, forbid_event=False), k)
            if g == TRUE:
                return
            nxt = self.g.loc(f"{s.id}:t{k + 1}")
            self.g.add(cur, nxt, "not-enabled", guard=neg(g))
            cur = nxt
        if self.listens:
            self.read_event(s, cur, eventful)

    def take(self, s, t, src, guard, c, k) -> None:
        content = tuple(s.onexit) + tuple(t.body)
        if not content:
            self.g.add(src, t.target, f"take:{s.id}->{t.target}", guard=guard)
            return
        hat = self.g.loc(f"{s.id}:take{k}")
        self.g.add(src, hat, f"take:{s.id}->{t.target}", guard=guard)
        self.block(content, hat, t.target, c)

    def read_event(self, s, wait, eventful) -> None:
        a = self.name
        ev, org = event_var(a), origin_var(a)
        got = self.g.loc(f"{s.id}:event") if eventful else wait
        self.g.add(wait, got, "dequeue-internal", comm=Receive(internal_queue(a), (ev,)))
        ext = self.g.loc(f"{s.id}:external")
        self.g.add(wait, ext, "internal-empty", comm=ProbeEmpty(internal_queue(a)))
        links = self.cat.param_links(a)
        if not links:
            self.g.add(ext, got, "dequeue-external", comm=Receive(external_queue(a), (ev, org)))
        else:
            par = self.g.loc(f"{s.id}:params")
            self.g.add(ext, par, "dequeue-external", comm=Receive(external_queue(a), (ev, org)))
            with_params = sorted({self.cat.event_id(e) for e, _ in links})
            for e, o in links:
                info = self.cat.event(e)
                guard = conj(Cmp("==", Var(ev), Const(info.id)), Cmp("==", Var(org), Const(self.cat.automaton_id(o))))
                targets = tuple(param_var(a, e, p) for p in info.params)
                self.g.add(par, got, f"dequeue-params:{e}", guard=guard, comm=Receive(param_channel(e, o, a), targets))
            no_params = conj(*(Cmp("!=", Var(ev), Const(i)) for i in with_params))
            self.g.add(par, got, "no-params", guard=no_params)
        cur = got
        for k, t in enumerate(eventful):
            c = self.ctx(t.line, events=t.events, event_loaded=True)
            is_event = disj(*(Cmp("==", Var(ev), Const(self.cat.event_id(e))) for e in t.events))
            nxt = wait if k == len(eventful) - 1 else self.g.loc(f"{s.id}:e{k + 1}")
            if t.cond is not None:
                g, draws = self.expr(t.cond, c)
            else:
                g, draws = TRUE, []
            if draws:
                # draw only once the event is known to match
                matched = self.g.loc(f"{s.id}:match{k}")
                self.g.add(cur, matched, "event-matches", guard=is_event)
                self.g.add(cur, nxt, "not-enabled", guard=neg(is_event))
                drawn = self.sample(matched, draws, f"{s.id}:r.")
                self.take(s, t, drawn, g, c, f"e{k}")
                self.g.add(drawn, nxt, "not-enabled", guard=neg(g))
            else:
                full = conj(is_event, g)
                self.take(s, t, cur, full, c, f"e{k}")
                self.g.add(cur, nxt, "not-enabled", guard=neg(full))
            cur = nxt


# --------------------------------------------------------------------------
# Types and domains


def _domain(t):
    if t == BOOL:
        return Boolean()
    if t == INT:
        return Int64()
    if t == RAT:
        return RationalDomain()
    if isinstance(t, tuple):
        return TupleDomain(*(_domain(x) for x in t))
    raise ModelError(f"no domain for type {t!r}")


def _value_type(v):
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, Fraction):
        return RAT
    return tuple(_value_type(x) for x in v)


def _infer(types: dict, constraints: list) -> None:
    changed = True
    while changed:
        changed = False
        for var, e, where in constraints:
            try:
                t = infer_type(e, types)
            except ExprError:
                continue
            old = types.get(var)
            new = t if old is None else join_types(old, t)
            if new is None:
                raise ScxmlError(
                    f"{where}: {var} receives a {t} value but holds {old}",
                    element="assign",
                    restriction="consistent datamodel types",
                    source=where,
                )
            if new != old:
                types[var] = new
                changed = True
    for var, e, where in constraints:
        try:
            infer_type(e, types)
        except ExprError as exc:
            raise ScxmlError(f"{where}: {exc}", restriction="translatable expression", source=where) from None


def _coerce(v, t):
    if isinstance(t, tuple):
        return tuple(_coerce(x, y) for x, y in zip(v, t))
    return normalize_value(v)


# --------------------------------------------------------------------------


def compile(
    automata,
    catalog: Optional[EventCatalog] = None,
    *,
    internal_capacity: int = DEFAULT_CAPACITY,
    external_capacity: int = DEFAULT_CAPACITY,
    quantum=DEFAULT_QUANTUM,
    horizon: int = DEFAULT_HORIZON,
    propositions: Optional[Mapping] = None,
) -> ChannelSystem:
    """Compile automata into one channel system (one program graph each).

    ``propositions`` maps names to expressions over ``Automaton.location``
    data variables; they become state labels.
    """
    automata = list(automata)
    if not automata:
        raise ModelError("no automata to compile")
    for cap, what in ((internal_capacity, "internal"), (external_capacity, "external")):
        if not isinstance(cap, int) or isinstance(cap, bool) or cap < 1:
            raise ModelError(f"{what} queue capacity must be a positive integer, got {cap!r}")
    quantum = rat(quantum)
    if quantum <= 0:
        raise ModelError("time quantum must be positive")
    catalog = catalog or build_catalog(automata)
    strings: dict = {}
    compilers = []
    for aut in automata:
        ac = _AutomatonCompiler(aut, catalog, strings, quantum)
        ac.build()
        compilers.append(ac)

    n_events = max(len(catalog.events), 1)
    n_auts = len(catalog.automata)
    types: dict = {}
    initial: dict = {}
    constraints: list = []
    for ac in compilers:
        a = ac.name
        types[event_var(a)] = INT
        types[origin_var(a)] = INT
        for d in ac.draws:
            types[d.var] = d.type
        env: dict = {}
        for loc, text, line in ac.aut.datamodel:
            v = data_var(a, loc)
            if text is None:
                continue
            c = ExprContext(
                a,
                frozenset(l for l, _, _ in ac.aut.datamodel if data_var(a, l) in env),
                catalog,
                strings,
                forbid_event=True,
                allow_random=False,
                where=ac.where(line),
            )
            e, _ = translate_expr(text, c)
            try:
                value = normalize_value(evaluate(e, env))
                types[v] = _value_type(value)
            except (ExprError, ModelError, TypeError) as exc:
                raise ScxmlError(
                    f"{c.where}: cannot evaluate initial value {text!r}: {exc}",
                    element="data",
                    restriction="constant datamodel initializer",
                    source=c.where,
                ) from None
            env[v] = value
            initial[v] = value
        constraints.extend(ac.constraints)
    for ac in compilers:
        for e, r, values, where in ac.sends:
            for p, expr in values.items():
                constraints.append((param_var(r, e, p), expr, where))
    _infer(types, constraints)

    pgs, channels = [], []
    ev_dom = BoundedInt(-1, n_events - 1)
    org_dom = BoundedInt(-1, n_auts - 1)
    for ac in compilers:
        a = ac.name
        variables = {event_var(a): ev_dom, origin_var(a): org_dom}
        valuation = {event_var(a): -1, origin_var(a): -1}
        for loc, _, line in ac.aut.datamodel:
            v = data_var(a, loc)
            if v not in types:
                raise ScxmlError(
                    f"{ac.where(line)}: cannot infer a type for datamodel location {loc!r}",
                    element="data",
                    restriction="typed datamodel",
                    source=ac.where(line),
                )
            variables[v] = _domain(types[v])
            valuation[v] = _coerce(initial[v], types[v]) if v in initial else variables[v].default()
        for info in catalog.incoming(a):
            for p in info.params:
                v = param_var(a, info.name, p)
                if v not in types:
                    raise ScxmlError(f"cannot infer a type for parameter {p!r} of event {info.name!r}")
                variables[v] = _domain(types[v])
                valuation[v] = variables[v].default()
        for d in ac.draws:
            variables[d.var] = _domain(d.type)
            valuation[d.var] = variables[d.var].default()
        pgs.append(
            ProgramGraph(
                a,
                tuple(ac.g.locations),
                (ac.aut.initial_state,),
                variables,
                tuple(ac.g.transitions),
                frozenset(ac.g.clocks),
                initial_valuation=valuation,
                quantum=quantum,
                horizon=horizon,
            )
        )
        links = [(e, o) for e, o, r in catalog.links if r == a]
        channels.append(ChannelDecl(internal_queue(a), {a}, a, internal_capacity, BoundedInt(0, n_events - 1)))
        channels.append(
            ChannelDecl(
                external_queue(a),
                frozenset(o for _, o in links),
                a,
                external_capacity,
                TupleDomain(BoundedInt(0, n_events - 1), BoundedInt(0, n_auts - 1)),
            )
        )
        for e, o in catalog.param_links(a):
            doms = [variables[param_var(a, e, p)] for p in catalog.event(e).params]
            dom = doms[0] if len(doms) == 1 else TupleDomain(*doms)
            channels.append(ChannelDecl(param_channel(e, o, a), {o}, a, external_capacity, dom))

    props = {}
    for pname, text in (propositions or {}).items():
        props[pname] = parse_expr(text, _PropositionResolver(strings))
    metadata = {
        "frontend": "scxml",
        "catalog": catalog.to_json(),
        "strings": dict(strings),
        "channels": _channel_roles(catalog),
    }
    return ChannelSystem(tuple(pgs), tuple(channels), props, quantum, horizon, metadata)


class _PropositionResolver(Resolver):
    def __init__(self, strings):
        self.strings = strings

    def string(self, node):
        if node.value not in self.strings:
            raise ExprError(f"string {node.value!r} never occurs in the model", node.pos)
        return Const(self.strings[node.value])


def _channel_roles(catalog: EventCatalog) -> dict:
    roles = {}
    for a in catalog.automata:
        roles[internal_queue(a)] = {"role": "internal", "automaton": a}
        roles[external_queue(a)] = {"role": "external", "automaton": a}
        for e, o in catalog.param_links(a):
            roles[param_channel(e, o, a)] = {"role": "params", "event": e, "origin": o, "receiver": a}
    return roles


def compile_files(paths, **kwargs) -> ChannelSystem:
    from chansmc.scxml.parser import parse_scxml_file

    return compile([parse_scxml_file(p) for p in paths], **kwargs)
