"""Values, clocks, clock constraints, traces and random streams.

Everything here is an immutable value. Time and rational data use exact
arithmetic: a rational is either a Python ``int`` or a ``Fraction`` whose
denominator is not 1 (see :func:`rat`).
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from chansmc.errors import ArgumentError, ModelError, TraceError

Rational = Union[int, Fraction]
Value = Union[bool, int, Fraction, tuple]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def rat(x) -> Rational:
    """Convert ``x`` to a canonical exact rational.

    Accepts ints, Fractions, decimal strings (``"0.3"``), ratio strings
    (``"3/10"``) and floats (converted through their shortest decimal
    representation, so ``0.3`` becomes ``3/10``).
    """
    if isinstance(x, bool):
        raise ArgumentError(f"boolean {x!r} is not a rational")
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ArgumentError(f"non-finite number {x!r}")
        x = Fraction(repr(x))
    elif isinstance(x, str):
        try:
            x = Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ArgumentError(f"not a rational literal: {x!r}") from exc
    elif not isinstance(x, Fraction):
        raise ArgumentError(f"not a rational: {x!r}")
    return x.numerator if x.denominator == 1 else x


def check_bits(v: Rational, what: str = "value") -> Rational:
    """Reject rationals whose numerator or denominator leave 64 bits."""
    if isinstance(v, Fraction):
        if not (INT64_MIN <= v.numerator <= INT64_MAX and v.denominator <= INT64_MAX):
            raise ModelError(f"{what} {v} overflows 64-bit rational range")
    elif not INT64_MIN <= v <= INT64_MAX:
        raise ModelError(f"{what} {v} overflows 64-bit integer range")
    return v


def format_rational(v: Rational) -> str:
    return str(v)


# --------------------------------------------------------------------------
# Variable domains


@dataclass(frozen=True)
class VarDomain:
    """Set of values a variable (or a channel message) may take.

    ``kind`` is one of ``"bool"``, ``"int"`` (bounded by ``lo``/``hi``),
    ``"rational"`` or ``"tuple"`` (with component domains in ``items``).
    """

    kind: str
    lo: Optional[int] = None
    hi: Optional[int] = None
    items: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("bool", "int", "rational", "tuple"):
            raise ArgumentError(f"unknown domain kind {self.kind!r}")
        if self.kind == "int":
            if self.lo is None or self.hi is None or self.lo > self.hi:
                raise ArgumentError(f"bounded integer needs lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def finite(self) -> bool:
        if self.kind == "rational":
            return False
        if self.kind == "tuple":
            return all(d.finite for d in self.items)
        return True

    def size(self) -> int:
        if self.kind == "bool":
            return 2
        if self.kind == "int":
            return self.hi - self.lo + 1
        if self.kind == "tuple":
            return math.prod(d.size() for d in self.items)
        raise ArgumentError("rational domain is infinite")

    def values(self):
        """Enumerate a finite domain in a fixed order."""
        if self.kind == "bool":
            yield False
            yield True
        elif self.kind == "int":
            yield from range(self.lo, self.hi + 1)
        elif self.kind == "tuple":
            yield from itertools.product(*(list(d.values()) for d in self.items))
        else:
            raise ArgumentError("cannot enumerate a rational domain")

    def default(self) -> Value:
        if self.kind == "bool":
            return False
        if self.kind == "int":
            return 0 if self.lo <= 0 <= self.hi else self.lo
        if self.kind == "rational":
            return 0
        return tuple(d.default() for d in self.items)

    def to_json(self):
        if self.kind == "int":
            return {"kind": "int", "lo": self.lo, "hi": self.hi}
        if self.kind == "tuple":
            return {"kind": "tuple", "items": [d.to_json() for d in self.items]}
        return {"kind": self.kind}

    @classmethod
    def from_json(cls, data) -> "VarDomain":
        kind = data["kind"]
        if kind == "int":
            return BoundedInt(int(data["lo"]), int(data["hi"]))
        if kind == "tuple":
            return TupleDomain(*(cls.from_json(d) for d in data["items"]))
        return cls(kind)

    def __str__(self):
        if self.kind == "int":
            return f"int[{self.lo},{self.hi}]"
        if self.kind == "tuple":
            return "(" + ", ".join(str(d) for d in self.items) + ")"
        return self.kind


def Boolean() -> VarDomain:
    return VarDomain("bool")


def BoundedInt(lo: int, hi: int) -> VarDomain:
    return VarDomain("int", lo=lo, hi=hi)


def Int64() -> VarDomain:
    return VarDomain("int", lo=INT64_MIN, hi=INT64_MAX)


def RationalDomain() -> VarDomain:
    return VarDomain("rational")


def TupleDomain(*items: VarDomain) -> VarDomain:
    return VarDomain("tuple", items=tuple(items))


def value_in_domain(v, d: VarDomain) -> bool:
    """Membership test, recursive for tuples."""
    kind = d.kind
    if kind == "bool":
        return isinstance(v, bool)
    if isinstance(v, bool):
        return False
    if kind == "int":
        if isinstance(v, Fraction):
            if v.denominator != 1:
                return False
            v = v.numerator
        return isinstance(v, int) and d.lo <= v <= d.hi
    if kind == "rational":
        return isinstance(v, (int, Fraction))
    return (
        isinstance(v, tuple)
        and len(v) == len(d.items)
        and all(value_in_domain(x, di) for x, di in zip(v, d.items))
    )


def domain_contains(outer: VarDomain, inner: VarDomain) -> bool:
    """True when every value of ``inner`` is also a value of ``outer``."""
    if outer.kind == "rational":
        return inner.kind in ("int", "rational")
    if outer.kind != inner.kind:
        return False
    if outer.kind == "int":
        return outer.lo <= inner.lo and inner.hi <= outer.hi
    if outer.kind == "tuple":
        return len(outer.items) == len(inner.items) and all(
            domain_contains(o, i) for o, i in zip(outer.items, inner.items)
        )
    return True


def normalize_value(v):
    """Canonical form: integral Fractions collapse to int, tuples recurse."""
    if isinstance(v, Fraction) and v.denominator == 1:
        return v.numerator
    if isinstance(v, tuple):
        return tuple(normalize_value(x) for x in v)
    return v


def value_to_json(v):
    if isinstance(v, bool) or isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else str(v)
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    raise ArgumentError(f"not a value: {v!r}")


def value_from_json(data):
    if isinstance(data, (bool, int)):
        return data
    if isinstance(data, str):
        return rat(data)
    if isinstance(data, list):
        return tuple(value_from_json(x) for x in data)
    raise ArgumentError(f"not a JSON value: {data!r}")


# --------------------------------------------------------------------------
# Clocks


ClockValuation = Mapping[str, Rational]


def advance(nu: ClockValuation, t) -> dict:
    """Let ``t`` time units elapse on every clock."""
    t = rat(t)
    if t < 0:
        raise ArgumentError(f"cannot advance clocks by negative time {t}")
    if t == 0:
        return dict(nu)
    return {x: rat(v + t) for x, v in nu.items()}


def reset(nu: ClockValuation, clocks: Iterable[str]) -> dict:
    """Set the given clocks to zero; the others keep their value."""
    out = dict(nu)
    for x in clocks:
        if x not in out:
            raise ModelError(f"reset of undeclared clock {x!r}")
        out[x] = 0
    return out


class ClockConstraint:
    """Base of the four primitive clock-constraint constructors."""

    __slots__ = ()

    def clocks(self) -> set:
        raise NotImplementedError

    def leaves(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ClockLe(ClockConstraint):
    """``clock <= bound``"""

    clock: str
    bound: Rational

    def __post_init__(self):
        object.__setattr__(self, "bound", rat(self.bound))
        if self.bound < 0:
            raise ArgumentError(f"clock constant must be non-negative, got {self.bound}")

    def clocks(self):
        return {self.clock}

    def leaves(self):
        yield self

    def __str__(self):
        return f"{self.clock} <= {self.bound}"


@dataclass(frozen=True)
class ClockGe(ClockConstraint):
    """``bound <= clock``"""

    clock: str
    bound: Rational

    def __post_init__(self):
        object.__setattr__(self, "bound", rat(self.bound))
        if self.bound < 0:
            raise ArgumentError(f"clock constant must be non-negative, got {self.bound}")

    def clocks(self):
        return {self.clock}

    def leaves(self):
        yield self

    def __str__(self):
        return f"{self.bound} <= {self.clock}"


@dataclass(frozen=True)
class ClockNot(ClockConstraint):
    arg: ClockConstraint

    def clocks(self):
        return self.arg.clocks()

    def leaves(self):
        yield from self.arg.leaves()

    def __str__(self):
        return f"!({self.arg})"


@dataclass(frozen=True)
class ClockAnd(ClockConstraint):
    """Conjunction; the empty conjunction is the constant true."""

    parts: tuple = ()

    def clocks(self):
        out = set()
        for p in self.parts:
            out |= p.clocks()
        return out

    def leaves(self):
        for p in self.parts:
            yield from p.leaves()

    def __str__(self):
        if not self.parts:
            return "true"
        return " && ".join(f"({p})" for p in self.parts)


CLOCK_TRUE = ClockAnd(())
CLOCK_FALSE = ClockNot(CLOCK_TRUE)


def clock_and(*parts: ClockConstraint) -> ClockConstraint:
    flat = []
    for p in parts:
        if isinstance(p, ClockAnd):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return ClockAnd(tuple(flat))


def clock_or(*parts: ClockConstraint) -> ClockConstraint:
    return ClockNot(ClockAnd(tuple(ClockNot(p) for p in parts)))


def clock_eq(clock: str, c) -> ClockConstraint:
    return ClockAnd((ClockLe(clock, c), ClockGe(clock, c)))


def eval_constraint(phi: ClockConstraint, nu: ClockValuation) -> bool:
    """Decide ``nu |= phi`` by structural recursion."""
    if isinstance(phi, ClockLe):
        try:
            return nu[phi.clock] <= phi.bound
        except KeyError:
            raise ModelError(f"unknown clock {phi.clock!r}") from None
    if isinstance(phi, ClockGe):
        try:
            return phi.bound <= nu[phi.clock]
        except KeyError:
            raise ModelError(f"unknown clock {phi.clock!r}") from None
    if isinstance(phi, ClockNot):
        return not eval_constraint(phi.arg, nu)
    if isinstance(phi, ClockAnd):
        return all(eval_constraint(p, nu) for p in phi.parts)
    raise ArgumentError(f"not a clock constraint: {phi!r}")


def constraint_to_json(phi: ClockConstraint):
    if isinstance(phi, ClockLe):
        return ["<=", phi.clock, str(phi.bound)]
    if isinstance(phi, ClockGe):
        return [">=", phi.clock, str(phi.bound)]
    if isinstance(phi, ClockNot):
        return ["not", constraint_to_json(phi.arg)]
    return ["and"] + [constraint_to_json(p) for p in phi.parts]


def constraint_from_json(data) -> ClockConstraint:
    op = data[0]
    if op == "<=":
        return ClockLe(data[1], rat(data[2]))
    if op == ">=":
        return ClockGe(data[1], rat(data[2]))
    if op == "not":
        return ClockNot(constraint_from_json(data[1]))
    if op == "and":
        return ClockAnd(tuple(constraint_from_json(d) for d in data[1:]))
    raise ArgumentError(f"bad clock constraint {data!r}")


def _grid_ceil(t: Rational, q: Rational) -> Rational:
    if type(t) is int and type(q) is int:
        return max(-(-t // q), 0) * q
    k = math.ceil(Fraction(t) / q)
    return rat(max(k, 0) * q)


def _grid_above(t: Rational, q: Rational) -> Rational:
    if type(t) is int and type(q) is int:
        return max(t // q + 1, 0) * q
    k = math.floor(Fraction(t) / q) + 1
    return rat(max(k, 0) * q)


def earliest_delay(phi: ClockConstraint, nu: ClockValuation, quantum, horizon: int):
    """Least multiple ``d`` of ``quantum`` with ``nu + d |= phi``.

    Returns ``(delay, reachable)``: ``delay`` is ``None`` when no grid point
    within ``horizon`` quanta works; ``reachable`` tells whether *some* grid
    point (possibly past the horizon) satisfies ``phi``.

    Truth of ``phi`` along ``nu + t`` only changes at the breakpoints
    ``c - nu(x)`` of its leaves, so it suffices to test 0 plus, for every
    breakpoint, the first grid point at or strictly above it.
    """
    q = rat(quantum)
    candidates = {0}
    for leaf in phi.leaves():
        try:
            b = leaf.bound - nu[leaf.clock]
        except KeyError:
            raise ModelError(f"unknown clock {leaf.clock!r}") from None
        if b >= 0:
            candidates.add(_grid_ceil(b, q))
        candidates.add(_grid_above(b, q) if b >= 0 else 0)
    limit = q * horizon
    found_beyond = False
    for t in sorted(candidates):
        if eval_constraint(phi, advance(nu, t) if t else nu):
            if t <= limit:
                return t, True
            found_beyond = True
            break
    return None, found_beyond


# --------------------------------------------------------------------------
# Events, observations and traces


class EventKind(str, enum.Enum):
    INTERNAL = "internal-action"
    SEND = "channel-send"
    RECEIVE = "channel-receive"
    HANDSHAKE = "handshake"


@dataclass(frozen=True)
class EventRecord:
    kind: EventKind
    channel: Optional[str] = None
    payload: object = None
    source_pg: Optional[str] = None
    target_pg: Optional[str] = None
    action: Optional[str] = None

    def __post_init__(self):
        if self.kind in (EventKind.SEND, EventKind.RECEIVE) and self.channel is None:
            raise ArgumentError(f"{self.kind.value} event needs a channel")
        if self.kind is EventKind.HANDSHAKE and (self.source_pg is None or self.target_pg is None):
            raise ArgumentError("handshake event needs both program graphs")

    def to_json(self):
        return {
            "kind": self.kind.value,
            "channel": self.channel,
            "payload": None if self.payload is None else value_to_json(self.payload),
            "source": self.source_pg,
            "target": self.target_pg,
            "action": self.action,
        }


@dataclass(frozen=True)
class Observation:
    """One trace position: labels of the reached state, the step's event and its time.

    The initial observation of a simulated trace has ``event=None``.
    """

    labels: frozenset
    event: Optional[EventRecord]
    time: Rational

    def __post_init__(self):
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(self.labels))
        object.__setattr__(self, "time", rat(self.time))
        if self.time < 0:
            raise ArgumentError(f"negative timestamp {self.time}")


@dataclass
class TimedTrace:
    """Append-only sequence of observations with non-decreasing timestamps."""

    observations: list = field(default_factory=list)

    def __post_init__(self):
        obs = self.observations
        self.observations = []
        for o in obs:
            self.append(o)

    def append(self, obs: Observation) -> None:
        if self.observations and obs.time < self.observations[-1].time:
            raise TraceError(
                f"timestamp {obs.time} precedes previous {self.observations[-1].time}"
            )
        self.observations.append(obs)

    def __len__(self):
        return len(self.observations)

    def __getitem__(self, i):
        return self.observations[i]

    def __iter__(self):
        return iter(self.observations)


# --------------------------------------------------------------------------
# Random streams


class Rng:
    """Deterministic random stream seeded by a 64-bit integer.

    ``split(i)`` derives an independent child stream from ``(seed, i)``
    by hashing, so child streams never depend on how many draws the
    parent made.
    """

    __slots__ = ("seed", "_r")

    def __init__(self, seed: int):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ArgumentError(f"seed must be an integer, got {seed!r}")
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._r = random.Random(self.seed)

    def split(self, index: int) -> "Rng":
        h = hashlib.blake2b(digest_size=8, person=b"chansmc-split")
        h.update(self.seed.to_bytes(8, "little"))
        h.update(int(index).to_bytes(8, "little", signed=True))
        return Rng(int.from_bytes(h.digest(), "little"))

    def random(self) -> float:
        return self._r.random()

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``; consumes no randomness when ``n == 1``."""
        if n == 1:
            return 0
        return self._r.randrange(n)

    def getrandbits(self, k: int) -> int:
        return self._r.getrandbits(k)
