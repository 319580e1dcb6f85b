"""Probabilistic timed program graphs and their step semantics.

A :class:`ProgramGraph` covers plain, probabilistic, timed and
probabilistic-timed program graphs: a plain graph is the special case where
every effect has one branch with probability 1 and no clocks are declared.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Mapping, Optional, Sequence

from chansmc.errors import ArgumentError, ModelError
from chansmc.expr import (
    BOOL,
    TRUE,
    Expr,
    ExprError,
    domain_type,
    evaluate,
    infer_type,
    to_text,
    type_fits,
)
from chansmc.kernel import (
    CLOCK_TRUE,
    ClockConstraint,
    EventKind,
    EventRecord,
    Rng,
    VarDomain,
    check_bits,
    clock_and,
    earliest_delay,
    eval_constraint,
    rat,
    reset,
    value_in_domain,
)

DEFAULT_QUANTUM = 1
DEFAULT_HORIZON = 10_000


class _Uncached:
    """Drops ``cached_property`` values named ``_c_*`` when pickled."""

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items() if not k.startswith("_c_")}


# --------------------------------------------------------------------------
# Effects


@dataclass(frozen=True)
class Effect(_Uncached):
    """Probability distribution over simultaneous assignments.

    ``branches`` is a tuple of ``(probability, assignments)`` with
    ``assignments`` a tuple of ``(variable, expression)`` pairs.
    """

    branches: tuple

    def __post_init__(self):
        if not self.branches:
            raise ModelError("effect needs at least one branch")
        norm = []
        total = Fraction(0)
        for p, assigns in self.branches:
            p = rat(p)
            if not 0 < p <= 1:
                raise ModelError(f"branch probability {p} outside (0, 1]")
            total += p
            assigns = tuple((str(v), e) for v, e in assigns)
            names = [v for v, _ in assigns]
            if len(set(names)) != len(names):
                raise ModelError(f"variable assigned twice in one branch: {names}")
            norm.append((p, assigns))
        if total != 1:
            raise ModelError(f"effect branch probabilities sum to {total}, not 1")
        object.__setattr__(self, "branches", tuple(norm))

    @classmethod
    def assign(cls, *assigns) -> "Effect":
        """Deterministic effect: one branch with probability 1."""
        return cls(((1, tuple(assigns)),))

    @property
    def deterministic(self) -> bool:
        return len(self.branches) == 1

    def assigned(self) -> set:
        return {v for _, a in self.branches for v, _ in a}

    def read(self) -> set:
        return {x for _, a in self.branches for _, e in a for x in e.vars()}

    @cached_property
    def _c_sampler(self):
        """(denominator, cumulative integer thresholds) for exact sampling."""
        denom = math.lcm(*(Fraction(p).denominator for p, _ in self.branches))
        cum, acc = [], 0
        for p, _ in self.branches:
            acc += int(Fraction(p) * denom)
            cum.append(acc)
        return denom, cum

    def sample(self, rng: Rng) -> int:
        """Index of a branch drawn with its declared probability."""
        if len(self.branches) == 1:
            return 0
        denom, cum = self._c_sampler
        r = rng.below(denom)
        for i, c in enumerate(cum):
            if r < c:
                return i
        raise AssertionError("unreachable")


NO_EFFECT = Effect.assign()


# --------------------------------------------------------------------------
# Transitions, graphs and states


@dataclass(frozen=True)
class PgTransition(_Uncached):
    source: str
    action: str
    target: str
    guard: Expr = TRUE
    clock_guard: ClockConstraint = CLOCK_TRUE
    resets: frozenset = frozenset()
    effect: Effect = NO_EFFECT
    comm: Optional[object] = None

    def __post_init__(self):
        object.__setattr__(self, "resets", frozenset(self.resets))

    @cached_property
    def _c_guard(self):
        return self.guard.compile()

    @cached_property
    def _c_branches(self):
        return [
            tuple((v, e.compile()) for v, e in assigns) for _, assigns in self.effect.branches
        ]

    def __str__(self):
        label = self.action if self.comm is None else f"{self.action}:{self.comm}"
        return f"{self.source} --[{to_text(self.guard)}; {self.clock_guard}]{label}--> {self.target}"


@dataclass(frozen=True)
class PgState:
    location: str
    valuation: Mapping
    clocks: Mapping

    def key(self):
        return (
            self.location,
            tuple(sorted(self.valuation.items())),
            tuple(sorted(self.clocks.items())),
        )

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        if not isinstance(other, PgState):
            return NotImplemented
        return (
            self.location == other.location
            and dict(self.valuation) == dict(other.valuation)
            and dict(self.clocks) == dict(other.clocks)
        )


@dataclass(frozen=True)
class Terminal:
    """No further step: ``reason`` is ``"deadlock"`` or ``"time-lock"``."""

    reason: str


@dataclass(frozen=True, eq=False)
class ProgramGraph(_Uncached):
    name: str
    locations: tuple
    initial_locations: tuple
    variables: Mapping = field(default_factory=dict)
    transitions: tuple = ()
    clocks: frozenset = frozenset()
    initial_condition: Expr = TRUE
    initial_valuation: Optional[Mapping] = None
    actions: Optional[frozenset] = None
    quantum: object = DEFAULT_QUANTUM
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "initial_locations", tuple(self.initial_locations))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "clocks", frozenset(self.clocks))
        object.__setattr__(self, "variables", dict(self.variables))
        object.__setattr__(self, "quantum", rat(self.quantum))
        if self.actions is None:
            object.__setattr__(self, "actions", frozenset(t.action for t in self.transitions))
        else:
            object.__setattr__(self, "actions", frozenset(self.actions))
        self.validate()

    # -- well-formedness ---------------------------------------------------

    def var_types(self):
        return {v: domain_type(d) for v, d in self.variables.items()}

    def validate(self) -> None:
        locs = set(self.locations)
        if len(locs) != len(self.locations):
            raise ModelError(f"{self.name}: duplicate locations")
        if not self.initial_locations:
            raise ModelError(f"{self.name}: no initial location")
        for l0 in self.initial_locations:
            if l0 not in locs:
                raise ModelError(f"{self.name}: initial location {l0!r} undeclared")
        if self.quantum <= 0:
            raise ModelError(f"{self.name}: time quantum must be positive")
        types = self.var_types()
        overlap = set(self.variables) & self.clocks
        if overlap:
            raise ModelError(f"{self.name}: names used both as variable and clock: {sorted(overlap)}")
        self._check_bool(self.initial_condition, types, "initial condition")
        for t in self.transitions:
            where = f"{self.name}: transition {t.source}->{t.target} ({t.action})"
            if t.source not in locs or t.target not in locs:
                raise ModelError(f"{where}: undeclared location")
            if t.action not in self.actions:
                raise ModelError(f"{where}: undeclared action")
            self._check_bool(t.guard, types, where)
            unknown = (t.clock_guard.clocks() | t.resets) - self.clocks
            if unknown:
                raise ModelError(f"{where}: undeclared clocks {sorted(unknown)}")
            for _, assigns in t.effect.branches:
                for var, e in assigns:
                    if var in self.clocks:
                        raise ModelError(f"{where}: effects cannot assign clock {var!r}")
                    if var not in types:
                        raise ModelError(f"{where}: assignment to undeclared variable {var!r}")
                    try:
                        et = infer_type(e, types)
                    except ExprError as exc:
                        raise ModelError(f"{where}: {exc}") from None
                    if not type_fits(et, types[var]):
                        raise ModelError(f"{where}: cannot assign {et} value to {var!r} of type {types[var]}")
        if self.initial_valuation is not None:
            iv = dict(self.initial_valuation)
            if set(iv) != set(self.variables):
                raise ModelError(f"{self.name}: initial valuation must cover exactly the declared variables")
            for v, x in iv.items():
                if not value_in_domain(x, self.variables[v]):
                    raise ModelError(f"{self.name}: initial value {x!r} of {v!r} outside {self.variables[v]}")

    @staticmethod
    def _check_bool(e, types, where):
        try:
            t = infer_type(e, types)
        except ExprError as exc:
            raise ModelError(f"{where}: {exc}") from None
        if t != BOOL:
            raise ModelError(f"{where}: guard {to_text(e)} is not boolean")

    # -- indexes -------------------------------------------------------------

    @cached_property
    def _c_outgoing(self):
        out = {l: [] for l in self.locations}
        for t in self.transitions:
            out[t.source].append(t)
        return out

    def outgoing(self, location) -> list:
        return self._c_outgoing[location]

    # -- initial states ------------------------------------------------------

    def initial_valuations(self) -> list:
        """Valuations satisfying the initial condition (finite enumeration)."""
        if self.initial_valuation is not None:
            iv = dict(self.initial_valuation)
            if not evaluate(self.initial_condition, iv):
                raise ModelError(f"{self.name}: initial valuation violates the initial condition")
            return [iv]
        names = sorted(self.variables)
        for n in names:
            if not self.variables[n].finite:
                raise ModelError(f"{self.name}: variable {n!r} has an infinite domain; supply an initial valuation")
        size = math.prod(self.variables[n].size() for n in names)
        if size > 1_000_000:
            raise ModelError(f"{self.name}: {size} candidate initial valuations; supply an initial valuation")
        cond = self.initial_condition.compile()
        out = []
        for combo in itertools.product(*(list(self.variables[n].values()) for n in names)):
            env = dict(zip(names, combo))
            if cond(env):
                out.append(env)
        if not out:
            raise ModelError(f"{self.name}: initial condition is unsatisfiable")
        return out

    def initial_states(self) -> list:
        zero = {c: 0 for c in sorted(self.clocks)}
        return [
            PgState(l0, env, dict(zero))
            for l0 in self.initial_locations
            for env in self.initial_valuations()
        ]


# --------------------------------------------------------------------------
# Semantics


def eval_guard(g: Expr, valuation: Mapping) -> bool:
    """Truth of a guard under a total valuation."""
    return bool(evaluate(g, valuation))


def enabled_transitions(pg: ProgramGraph, s: PgState) -> list:
    """Transitions leaving ``s.location`` whose data and clock guards hold now."""
    env, nu = s.valuation, s.clocks
    return [
        t
        for t in pg.outgoing(s.location)
        if t._c_guard(env) and eval_constraint(t.clock_guard, nu)
    ]


def apply_assignments(t: PgTransition, branch: int, env: Mapping, variables: Mapping) -> dict:
    """Simultaneous assignment of one effect branch, with domain checks."""
    fns = t._c_branches[branch]
    if not fns:
        return env
    values = [(v, f(env)) for v, f in fns]
    out = dict(env)
    for v, x in values:
        if type(x) is Fraction:
            if x.denominator == 1:
                x = x.numerator
            else:
                check_bits(x, f"value of {v}")
        if not value_in_domain(x, variables[v]):
            raise ModelError(
                f"transition {t.source}->{t.target} ({t.action}), branch {branch}: "
                f"value {x} of {v!r} outside {variables[v]}"
            )
        out[v] = x
    return out


def apply_effect(pg: ProgramGraph, t: PgTransition, s: PgState, rng: Rng) -> PgState:
    """Fire ``t`` from ``s``: sample a branch, update data, reset clocks."""
    branch = t.effect.sample(rng)
    env = apply_assignments(t, branch, s.valuation, pg.variables)
    clocks = reset(s.clocks, t.resets) if t.resets else s.clocks
    return PgState(t.target, env, clocks)


def _branch_valuations(pg: ProgramGraph, t: PgTransition, env: Mapping):
    for i, (p, _) in enumerate(t.effect.branches):
        yield p, apply_assignments(t, i, env, pg.variables)


def transition_probability(pg: ProgramGraph, s: PgState, action: str, s2: PgState) -> Fraction:
    """Probability of moving from ``s`` to ``s2`` when ``action`` is taken."""
    total = Fraction(0)
    for t in enabled_transitions(pg, s):
        if t.action != action or t.target != s2.location:
            continue
        clocks = reset(s.clocks, t.resets)
        if dict(clocks) != dict(s2.clocks):
            continue
        target_env = dict(s2.valuation)
        for p, env in _branch_valuations(pg, t, s.valuation):
            if dict(env) == target_env:
                total += p
    return total


def _policy_action(policy, s: PgState):
    if callable(policy):
        return policy(s)
    try:
        return policy[s.location]
    except KeyError:
        raise ArgumentError(f"policy undefined at location {s.location!r}") from None


def trace_probability(pg: ProgramGraph, policy, rho: Sequence[PgState]) -> Fraction:
    """Probability of the execution fragment ``rho`` under ``policy``.

    The initial distribution is uniform over :meth:`ProgramGraph.initial_states`.
    ``policy`` maps a location to an action, or is a callable on states.
    """
    if not rho:
        raise ArgumentError("empty execution fragment")
    init = pg.initial_states()
    prob = Fraction(1, len(init)) if rho[0] in init else Fraction(0)
    for a, b in zip(rho, rho[1:]):
        if prob == 0:
            break
        prob *= transition_probability(pg, a, _policy_action(policy, a), b)
    return prob


# --------------------------------------------------------------------------
# Stepping


Resolver = Callable[[list, object, Rng], int]


def uniform_resolver(candidates, state, rng: Rng) -> int:
    return rng.below(len(candidates))


def policy_resolver(policy) -> Resolver:
    """Resolver that only fires transitions carrying the policy's action.

    Ties among transitions with the chosen action are broken uniformly.
    """

    def resolve(candidates, state, rng):
        want = _policy_action(policy, state)
        idx = [i for i, t in enumerate(candidates) if getattr(t, "action", None) == want]
        if not idx:
            raise ArgumentError(f"policy action {want!r} not enabled at {state.location!r}")
        return idx[rng.below(len(idx))]

    return resolve


def pg_step(
    pg: ProgramGraph,
    s: PgState,
    now,
    rng: Rng,
    resolver: Optional[Resolver] = None,
):
    """One timed step of a program graph.

    Fires at the earliest grid time at which some transition is enabled.
    Returns ``(state, event, new_now)`` or a :class:`Terminal`.
    """
    resolver = resolver or uniform_resolver
    now = rat(now)
    data_ok = [t for t in pg.outgoing(s.location) if t._c_guard(s.valuation)]
    if not data_ok:
        return Terminal("deadlock")
    best, ready, any_reachable = None, [], False
    for t in data_ok:
        d, reachable = earliest_delay(t.clock_guard, s.clocks, pg.quantum, pg.horizon)
        any_reachable |= reachable
        if d is None:
            continue
        if best is None or d < best:
            best, ready = d, [t]
        elif d == best:
            ready.append(t)
    if best is None:
        return Terminal("time-lock" if any_reachable else "deadlock")
    if best:
        s = PgState(s.location, s.valuation, {x: rat(v + best) for x, v in s.clocks.items()})
    t = ready[resolver(ready, s, rng)]
    s2 = apply_effect(pg, t, s, rng)
    event = EventRecord(EventKind.INTERNAL, source_pg=pg.name, action=t.action)
    return s2, event, rat(now + best)


def combined_clock_guard(*transitions: PgTransition) -> ClockConstraint:
    return clock_and(*(t.clock_guard for t in transitions))


@dataclass(frozen=True)
class Determinism:
    action: bool  # no state enables two transitions with the same action
    labels: bool  # no state reaches two successors with the same location under one action


def determinism(pg: ProgramGraph, limit: int = 100_000) -> Determinism:
    """Action- and label-determinism over the data states reachable when clock guards are ignored.

    A diagnostic only; simulation never relies on it.  Labels are locations.
    """
    seen, todo = set(), []
    for s in pg.initial_states():
        k = (s.location, tuple(sorted(s.valuation.items())))
        if k not in seen:
            seen.add(k)
            todo.append(k)
    action_det = labels_det = True
    while todo:
        loc, items = todo.pop()
        env = dict(items)
        by_action: dict = {}
        for t in pg.outgoing(loc):
            if not t._c_guard(env):
                continue
            by_action.setdefault(t.action, []).append(t)
            for _, env2 in _branch_valuations(pg, t, env):
                k = (t.target, tuple(sorted(env2.items())))
                if k not in seen:
                    if len(seen) >= limit:
                        raise ArgumentError(f"{pg.name}: more than {limit} reachable data states")
                    seen.add(k)
                    todo.append(k)
        for ts in by_action.values():
            if len(ts) > 1:
                action_det = False
            succ = [(t.target, tuple(sorted(e.items()))) for t in ts for _, e in _branch_valuations(pg, t, env)]
            targets = {}
            for loc2, val in succ:
                targets.setdefault(loc2, set()).add(val)
            if any(len(v) > 1 for v in targets.values()):
                labels_det = False
    return Determinism(action_det, labels_det)
