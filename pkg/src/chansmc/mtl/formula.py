"""Metric temporal logic formulas with future and past interval operators.

Intervals are closed ``[lo, hi]`` over exact rationals; ``hi=None`` stands
for an unbounded interval.  Formulas are immutable and hashable.
"""

from __future__ import annotations

import enum
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Mapping, Optional

from chansmc.errors import ArgumentError, PropertyError
from chansmc.kernel import EventKind, Rational, normalize_value, rat


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @classmethod
    def of(cls, v: Optional[bool]) -> "Verdict":
        if v is None:
            return cls.UNKNOWN
        return cls.TRUE if v else cls.FALSE

    @property
    def conclusive(self) -> bool:
        return self is not Verdict.UNKNOWN

    def as_bool(self) -> Optional[bool]:
        return None if self is Verdict.UNKNOWN else self is Verdict.TRUE


class Formula:
    __slots__ = ()

    def children(self) -> tuple:
        return ()

    def __str__(self):
        return to_sexpr(self)


# -- atoms -------------------------------------------------------------------


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Prop(Formula):
    """Holds when ``name`` is among the observation's labels."""

    name: str


_EVENT_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class EventAtom(Formula):
    """Holds when the observation's event used ``channel``.

    ``direction`` narrows to ``send`` or ``receive`` (handshakes count as
    both).  When ``op`` is given the payload, or its ``index``-th component,
    is compared against ``value``.
    """

    channel: str
    direction: Optional[str] = None
    index: Optional[int] = None
    op: Optional[str] = None
    value: object = None

    def __post_init__(self):
        if self.direction not in (None, "send", "receive"):
            raise PropertyError(f"event direction must be send or receive, not {self.direction!r}")
        if self.op is not None and self.op not in _EVENT_OPS:
            raise PropertyError(f"unknown payload comparison {self.op!r}")
        if (self.op is None) != (self.value is None):
            raise PropertyError("payload comparison needs both an operator and a value")
        if self.value is not None:
            object.__setattr__(self, "value", normalize_value(self.value))


# -- connectives ---------------------------------------------------------------


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def children(self):
        return self.parts


@dataclass(frozen=True)
class Or(Formula):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def children(self):
        return self.parts


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


# -- temporal operators --------------------------------------------------------


def _check_interval(lo, hi):
    lo = rat(lo)
    hi = None if hi is None else rat(hi)
    if lo < 0 or (hi is not None and hi < lo):
        raise PropertyError(f"ill-formed interval [{lo}, {'inf' if hi is None else hi}]")
    return lo, hi


@dataclass(frozen=True)
class _Temporal(Formula):
    lo: Rational
    hi: Optional[Rational]

    def __post_init__(self):
        lo, hi = _check_interval(self.lo, self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class Until(_Temporal):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Since(_Temporal):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Eventually(_Temporal):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Globally(_Temporal):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Once(_Temporal):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Historically(_Temporal):
    arg: Formula

    def children(self):
        return (self.arg,)


TRUE = Const(True)
FALSE = Const(False)


def normalize(phi: Formula) -> Formula:
    """Rewrite to the core ``Const, atoms, Not, And, Or, Until, Since``.

    ``F[I] f = true U[I] f``, ``G[I] f = not F[I] not f`` and the past
    operators mirror them; ``a -> b`` becomes ``not a or b``.
    """
    if isinstance(phi, (Const, Prop, EventAtom)):
        return phi
    if isinstance(phi, Not):
        return Not(normalize(phi.arg))
    if isinstance(phi, And):
        return And(tuple(normalize(p) for p in phi.parts))
    if isinstance(phi, Or):
        return Or(tuple(normalize(p) for p in phi.parts))
    if isinstance(phi, Implies):
        return Or((Not(normalize(phi.left)), normalize(phi.right)))
    if isinstance(phi, Until):
        return Until(phi.lo, phi.hi, normalize(phi.left), normalize(phi.right))
    if isinstance(phi, Since):
        return Since(phi.lo, phi.hi, normalize(phi.left), normalize(phi.right))
    if isinstance(phi, Eventually):
        return Until(phi.lo, phi.hi, TRUE, normalize(phi.arg))
    if isinstance(phi, Globally):
        return Not(Until(phi.lo, phi.hi, TRUE, Not(normalize(phi.arg))))
    if isinstance(phi, Once):
        return Since(phi.lo, phi.hi, TRUE, normalize(phi.arg))
    if isinstance(phi, Historically):
        return Not(Since(phi.lo, phi.hi, TRUE, Not(normalize(phi.arg))))
    raise ArgumentError(f"not a formula: {phi!r}")


def subformulas(phi: Formula):
    """Post-order walk (children before parents)."""
    for c in phi.children():
        yield from subformulas(c)
    yield phi


def depth(phi: Formula) -> int:
    kids = phi.children()
    return 0 if not kids else 1 + max(depth(c) for c in kids)


def atoms(phi: Formula) -> set:
    return {f for f in subformulas(phi) if isinstance(f, (Prop, EventAtom))}


# -- atom evaluation ------------------------------------------------------------

_SEND_KINDS = (EventKind.SEND, EventKind.HANDSHAKE)
_RECV_KINDS = (EventKind.RECEIVE, EventKind.HANDSHAKE)


def _compare(op, a, b) -> bool:
    try:
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b
    except TypeError:
        return False


def event_matches(atom: EventAtom, event) -> bool:
    if event is None or event.channel != atom.channel:
        return False
    if atom.direction == "send" and event.kind not in _SEND_KINDS:
        return False
    if atom.direction == "receive" and event.kind not in _RECV_KINDS:
        return False
    if atom.direction is None and event.kind is EventKind.INTERNAL:
        return False
    if atom.op is None:
        return True
    v = event.payload
    if atom.index is not None:
        if not isinstance(v, tuple) or not 0 <= atom.index < len(v):
            return False
        v = v[atom.index]
    return _compare(atom.op, v, atom.value)


def atom_holds(atom, obs) -> bool:
    if isinstance(atom, Prop):
        return atom.name in obs.labels
    return event_matches(atom, obs.event)


# -- text format ---------------------------------------------------------------


def _bound_text(b) -> str:
    return "inf" if b is None else str(b)


def _value_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + " ".join(_value_text(x) for x in v) + "]"
    return str(v)


_TEMPORAL_NAMES = {Until: "U", Since: "S", Eventually: "F", Globally: "G", Once: "O", Historically: "H"}


def to_sexpr(phi: Formula) -> str:
    if isinstance(phi, Const):
        return "true" if phi.value else "false"
    if isinstance(phi, Prop):
        return f"(prop {phi.name})"
    if isinstance(phi, EventAtom):
        parts = ["event", phi.channel]
        if phi.direction:
            parts.append(phi.direction)
        if phi.index is not None:
            parts.append(str(phi.index))
        if phi.op:
            parts += [phi.op, _value_text(phi.value)]
        return "(" + " ".join(parts) + ")"
    if isinstance(phi, Not):
        return f"(not {to_sexpr(phi.arg)})"
    if isinstance(phi, (And, Or)):
        op = "and" if isinstance(phi, And) else "or"
        return "(" + " ".join([op] + [to_sexpr(p) for p in phi.parts]) + ")"
    if isinstance(phi, Implies):
        return f"(implies {to_sexpr(phi.left)} {to_sexpr(phi.right)})"
    name = _TEMPORAL_NAMES[type(phi)]
    args = " ".join(to_sexpr(c) for c in phi.children())
    return f"({name} {phi.lo} {_bound_text(phi.hi)} {args})"


_SEXPR_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _sexpr_tokens(text: str):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _SEXPR_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PropertyError(f"cannot tokenize formula at offset {pos}: {text[pos:pos + 20]!r}")
        pos = m.end()
        yield m.group(1) or m.group(2) or m.group(3)


def _read(tokens: list, i: int):
    if i >= len(tokens):
        raise PropertyError("unexpected end of formula")
    tok = tokens[i]
    if tok == ")":
        raise PropertyError("unbalanced ')' in formula")
    if tok != "(":
        return tok, i + 1
    items = []
    i += 1
    while True:
        if i >= len(tokens):
            raise PropertyError("missing ')' in formula")
        if tokens[i] == ")":
            return items, i + 1
        item, i = _read(tokens, i)
        items.append(item)


def _number(tok: str):
    try:
        return rat(tok)
    except ArgumentError:
        raise PropertyError(f"expected a number, got {tok!r}") from None


def _bound(tok):
    if tok in ("inf", "Infinity", "oo"):
        return None
    if not isinstance(tok, str):
        raise PropertyError(f"expected an interval bound, got {tok!r}")
    return _number(tok)


class SymbolTable:
    """Resolves ``#name`` constants inside formulas (e.g. to event ids)."""

    def __init__(self, symbols: Optional[Mapping] = None):
        self.symbols = dict(symbols or {})

    def value(self, tok):
        if isinstance(tok, list):
            return tuple(self.value(t) for t in tok)
        if tok == "true":
            return True
        if tok == "false":
            return False
        if tok.startswith("#"):
            try:
                return self.symbols[tok[1:]]
            except KeyError:
                raise PropertyError(f"unknown symbol {tok!r}") from None
        return _number(tok)


def _build(tree, table: SymbolTable) -> Formula:
    if isinstance(tree, str):
        if tree == "true":
            return TRUE
        if tree == "false":
            return FALSE
        raise PropertyError(f"bare symbol {tree!r}; use (prop {tree})")
    if not tree:
        raise PropertyError("empty formula list")
    op, args = tree[0], tree[1:]
    if not isinstance(op, str):
        raise PropertyError(f"operator expected, got {op!r}")

    def need(k):
        if len(args) != k:
            raise PropertyError(f"{op} expects {k} arguments, got {len(args)}")

    if op == "prop":
        need(1)
        if not isinstance(args[0], str):
            raise PropertyError("prop expects a name")
        return Prop(args[0])
    if op == "event":
        return _build_event(args, table)
    if op == "not":
        need(1)
        return Not(_build(args[0], table))
    if op in ("and", "or"):
        if not args:
            return TRUE if op == "and" else FALSE
        parts = tuple(_build(a, table) for a in args)
        if len(parts) == 1:
            return parts[0]
        return And(parts) if op == "and" else Or(parts)
    if op == "implies":
        need(2)
        return Implies(_build(args[0], table), _build(args[1], table))
    if op in ("U", "S"):
        need(4)
        cls = Until if op == "U" else Since
        return cls(_number(args[0]), _bound(args[1]), _build(args[2], table), _build(args[3], table))
    unary = {"F": Eventually, "G": Globally, "O": Once, "H": Historically}
    if op in unary:
        need(3)
        return unary[op](_number(args[0]), _bound(args[1]), _build(args[2], table))
    raise PropertyError(f"unknown operator {op!r}")


def _build_event(args, table) -> EventAtom:
    if not args or not isinstance(args[0], str):
        raise PropertyError("event expects a channel name")
    channel, rest = args[0], list(args[1:])
    direction = index = op = value = None
    if rest and rest[0] in ("send", "receive"):
        direction = rest.pop(0)
    if rest and isinstance(rest[0], str) and re.fullmatch(r"\d+", rest[0]):
        index = int(rest.pop(0))
    if rest:
        if len(rest) != 2 or rest[0] not in _EVENT_OPS:
            raise PropertyError(f"malformed event atom arguments {rest!r}")
        op, value = rest[0], table.value(rest[1])
    return EventAtom(channel, direction, index, op, value)


def parse_formula(text: str, symbols: Optional[Mapping] = None) -> Formula:
    """Parse the s-expression syntax documented in the README."""
    tokens = list(_sexpr_tokens(text))
    if not tokens:
        raise PropertyError("empty formula")
    tree, end = _read(tokens, 0)
    if end != len(tokens):
        raise PropertyError("trailing tokens after formula")
    return _build(tree, SymbolTable(symbols))


# -- property files --------------------------------------------------------------


@dataclass(frozen=True)
class Property:
    name: str
    formula: Formula
    source: str = ""


@dataclass(frozen=True)
class PropertyFile:
    properties: tuple
    propositions: Mapping  # name -> expression text


def load_properties(xml_text: str, symbols: Optional[Mapping] = None) -> PropertyFile:
    """Read ``<properties>`` XML: ``<proposition>`` and ``<property>`` children."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise PropertyError(f"property file is not well-formed XML: {exc}") from None
    if root.tag != "properties":
        raise PropertyError(f"root element must be <properties>, got <{root.tag}>")
    props, names, propositions = [], set(), {}
    for el in root:
        if el.tag == "proposition":
            name = el.get("name")
            if not name or not (el.text or "").strip():
                raise PropertyError("<proposition> needs a name and an expression")
            if name in propositions:
                raise PropertyError(f"duplicate proposition {name!r}")
            propositions[name] = el.text.strip()
        elif el.tag == "property":
            name = el.get("name")
            if not name:
                raise PropertyError("<property> needs a name attribute")
            if name in names:
                raise PropertyError(f"duplicate property {name!r}")
            f = el.find("formula")
            if f is None or not (f.text or "").strip():
                raise PropertyError(f"property {name!r} has no <formula>")
            try:
                phi = parse_formula(f.text, symbols)
            except PropertyError as exc:
                raise PropertyError(f"property {name!r}: {exc}") from None
            names.add(name)
            props.append(Property(name, phi, f.text.strip()))
        else:
            raise PropertyError(f"unexpected element <{el.tag}> in property file")
    if not props:
        raise PropertyError("property file declares no properties")
    return PropertyFile(tuple(props), propositions)


def check_atoms(phi: Formula, channels, propositions) -> None:
    """Reject atoms naming channels or propositions the model does not declare."""
    channels, propositions = set(channels), set(propositions)
    for a in atoms(phi):
        if isinstance(a, Prop) and a.name not in propositions:
            raise PropertyError(f"undeclared proposition {a.name!r}")
        if isinstance(a, EventAtom) and a.channel not in channels:
            raise PropertyError(f"undeclared channel {a.channel!r}")

