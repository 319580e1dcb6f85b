"""Guard and update expressions over program-graph variables.

Expressions are small immutable trees.  They can be evaluated directly
(:func:`evaluate`), compiled to closures for the simulator
(:meth:`Expr.compile`), printed to a parseable text form and parsed back
from an ECMAScript-like surface syntax (:func:`parse_expr`).

Arithmetic is exact and division-free: ``a / b`` is accepted only between
numeric literals and folded at parse time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional

from chansmc.errors import ModelError
from chansmc.kernel import VarDomain, normalize_value, rat

# Types are 'bool', 'int', 'rat', 'str' or a tuple of types.
BOOL, INT, RAT, STR = "bool", "int", "rat", "str"


class ExprError(ModelError):
    """Syntax, typing or translation error in an expression."""

    def __init__(self, message, position=None, source=None):
        if position is not None:
            message = f"{message} (at column {position + 1})"
        super().__init__(message)
        self.position = position
        self.source = source


class Expr:
    __slots__ = ()

    def vars(self) -> set:
        out: set = set()
        self._collect(out)
        return out

    def _collect(self, out):
        for c in self.children():
            c._collect(out)

    def children(self):
        return ()

    def compile(self) -> Callable:
        raise NotImplementedError

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Const(Expr):
    value: object

    def __post_init__(self):
        v = self.value
        if not isinstance(v, (bool, tuple)):
            v = rat(v)
        object.__setattr__(self, "value", normalize_value(v))

    def compile(self):
        v = self.value
        return lambda env: v


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _collect(self, out):
        out.add(self.name)

    def compile(self):
        name = self.name

        def read(env):
            return env[name]

        return read


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def compile(self):
        a = self.arg.compile()
        return lambda env: -a(env)


_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in _ARITH:
            raise ExprError(f"unsupported arithmetic operator {self.op!r}")

    def children(self):
        return (self.left, self.right)

    def compile(self):
        a, b = self.left.compile(), self.right.compile()
        if self.op == "+":
            return lambda env: a(env) + b(env)
        if self.op == "-":
            return lambda env: a(env) - b(env)
        return lambda env: a(env) * b(env)


_CMP = ("==", "!=", "<", "<=")


@dataclass(frozen=True)
class Cmp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in _CMP:
            raise ExprError(f"unsupported comparison {self.op!r}")

    def children(self):
        return (self.left, self.right)

    def compile(self):
        a, b = self.left.compile(), self.right.compile()
        op = self.op
        if op == "==":
            return lambda env: a(env) == b(env)
        if op == "!=":
            return lambda env: a(env) != b(env)
        if op == "<":
            return lambda env: a(env) < b(env)
        return lambda env: a(env) <= b(env)


@dataclass(frozen=True)
class And(Expr):
    parts: tuple

    def children(self):
        return self.parts

    def compile(self):
        fs = [p.compile() for p in self.parts]
        if not fs:
            return lambda env: True
        if len(fs) == 1:
            return fs[0]
        if len(fs) == 2:
            f, g = fs
            return lambda env: f(env) and g(env)
        return lambda env: all(f(env) for f in fs)


@dataclass(frozen=True)
class Or(Expr):
    parts: tuple

    def children(self):
        return self.parts

    def compile(self):
        fs = [p.compile() for p in self.parts]
        if not fs:
            return lambda env: False
        if len(fs) == 1:
            return fs[0]
        if len(fs) == 2:
            f, g = fs
            return lambda env: f(env) or g(env)
        return lambda env: any(f(env) for f in fs)


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def compile(self):
        a = self.arg.compile()
        return lambda env: not a(env)


@dataclass(frozen=True)
class Proj(Expr):
    arg: Expr
    index: int

    def children(self):
        return (self.arg,)

    def compile(self):
        a, i = self.arg.compile(), self.index
        return lambda env: a(env)[i]


@dataclass(frozen=True)
class TupleExpr(Expr):
    items: tuple

    def children(self):
        return self.items

    def compile(self):
        fs = [x.compile() for x in self.items]
        return lambda env: tuple(f(env) for f in fs)


@dataclass(frozen=True)
class RequireEvent(Expr):
    """Reads ``arg`` but fails at run time when no event has been loaded.

    ``event_var`` holds the id of the event being processed; a negative
    id means none was dequeued yet.
    """

    event_var: str
    arg: Expr

    def children(self):
        return (self.arg,)

    def _collect(self, out):
        out.add(self.event_var)
        self.arg._collect(out)

    def compile(self):
        a, ev = self.arg.compile(), self.event_var

        def read(env):
            if env[ev] < 0:
                raise ModelError(f"_event read before any event was processed ({ev})")
            return a(env)

        return read


TRUE = Const(True)
FALSE = Const(False)


def conj(*parts: Expr) -> Expr:
    flat = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        elif p == TRUE:
            continue
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Expr) -> Expr:
    flat = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        elif p == FALSE:
            continue
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(e: Expr) -> Expr:
    if e == TRUE:
        return FALSE
    if e == FALSE:
        return TRUE
    if isinstance(e, Not):
        return e.arg
    return Not(e)


def evaluate(e: Expr, env: Mapping):
    """Reference tree-walking evaluator (the simulator uses compiled closures)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ModelError(f"unknown variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, BinOp):
        return _ARITH[e.op](evaluate(e.left, env), evaluate(e.right, env))
    if isinstance(e, Cmp):
        a, b = evaluate(e.left, env), evaluate(e.right, env)
        if e.op == "==":
            return a == b
        if e.op == "!=":
            return a != b
        return a < b if e.op == "<" else a <= b
    if isinstance(e, And):
        return all(evaluate(p, env) for p in e.parts)
    if isinstance(e, Or):
        return any(evaluate(p, env) for p in e.parts)
    if isinstance(e, Not):
        return not evaluate(e.arg, env)
    if isinstance(e, Proj):
        return evaluate(e.arg, env)[e.index]
    if isinstance(e, TupleExpr):
        return tuple(evaluate(x, env) for x in e.items)
    if isinstance(e, RequireEvent):
        if env[e.event_var] < 0:
            raise ModelError(f"_event read before any event was processed ({e.event_var})")
        return evaluate(e.arg, env)
    raise ModelError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# Typing


def domain_type(d: VarDomain):
    if d.kind == "bool":
        return BOOL
    if d.kind == "int":
        return INT
    if d.kind == "rational":
        return RAT
    return tuple(domain_type(x) for x in d.items)


def value_type(v):
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, Fraction):
        return RAT
    if isinstance(v, tuple):
        return tuple(value_type(x) for x in v)
    raise ExprError(f"untyped value {v!r}")


def join_types(a, b):
    """Least common type, or ``None`` when incompatible."""
    if a == b:
        return a
    if {a, b} <= {INT, RAT}:
        return RAT
    if isinstance(a, tuple) and isinstance(b, tuple) and len(a) == len(b):
        parts = [join_types(x, y) for x, y in zip(a, b)]
        return None if None in parts else tuple(parts)
    return None


def is_numeric(t) -> bool:
    return t in (INT, RAT)


def infer_type(e: Expr, types: Mapping):
    """Type of ``e`` given variable types; raises :class:`ExprError` on mismatch."""
    if isinstance(e, Const):
        return value_type(e.value)
    if isinstance(e, Var):
        try:
            return types[e.name]
        except KeyError:
            raise ExprError(f"unknown variable {e.name!r}") from None
    if isinstance(e, Neg):
        t = infer_type(e.arg, types)
        if not is_numeric(t):
            raise ExprError(f"cannot negate {t} expression {to_text(e.arg)}")
        return t
    if isinstance(e, BinOp):
        a, b = infer_type(e.left, types), infer_type(e.right, types)
        if not (is_numeric(a) and is_numeric(b)):
            raise ExprError(f"arithmetic on non-numeric operands in {to_text(e)}")
        return join_types(a, b)
    if isinstance(e, Cmp):
        a, b = infer_type(e.left, types), infer_type(e.right, types)
        if e.op in ("<", "<="):
            if not (is_numeric(a) and is_numeric(b)):
                raise ExprError(f"ordering comparison on non-numeric operands in {to_text(e)}")
        elif join_types(a, b) is None:
            raise ExprError(f"comparison between {a} and {b} in {to_text(e)}")
        return BOOL
    if isinstance(e, (And, Or)):
        for p in e.parts:
            if infer_type(p, types) != BOOL:
                raise ExprError(f"non-boolean operand {to_text(p)}")
        return BOOL
    if isinstance(e, Not):
        if infer_type(e.arg, types) != BOOL:
            raise ExprError(f"non-boolean operand {to_text(e.arg)}")
        return BOOL
    if isinstance(e, Proj):
        t = infer_type(e.arg, types)
        if not isinstance(t, tuple) or not 0 <= e.index < len(t):
            raise ExprError(f"bad projection [{e.index}] on {t}")
        return t[e.index]
    if isinstance(e, TupleExpr):
        return tuple(infer_type(x, types) for x in e.items)
    if isinstance(e, RequireEvent):
        return infer_type(e.arg, types)
    raise ExprError(f"not an expression: {e!r}")


def type_fits(value_t, var_t) -> bool:
    """Whether a value of type ``value_t`` may be stored in a ``var_t`` slot."""
    if value_t == var_t:
        return True
    if var_t == RAT and value_t == INT:
        return True
    if isinstance(var_t, tuple) and isinstance(value_t, tuple) and len(var_t) == len(value_t):
        return all(type_fits(a, b) for a, b in zip(value_t, var_t))
    return False


# --------------------------------------------------------------------------
# Printing


def _const_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(_const_text(x) for x in v) + "]"
    if isinstance(v, Fraction):
        return f"({v.numerator}/{v.denominator})"
    return f"({v})" if v < 0 else str(v)


def to_text(e: Expr) -> str:
    """Parseable text form of an expression."""
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-({to_text(e.arg)})"
    if isinstance(e, (BinOp, Cmp)):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, And):
        return "(" + " && ".join(to_text(p) for p in e.parts) + ")" if e.parts else "true"
    if isinstance(e, Or):
        return "(" + " || ".join(to_text(p) for p in e.parts) + ")" if e.parts else "false"
    if isinstance(e, Not):
        return f"!({to_text(e.arg)})"
    if isinstance(e, Proj):
        return f"{to_text(e.arg)}[{e.index}]"
    if isinstance(e, TupleExpr):
        return "[" + ", ".join(to_text(x) for x in e.items) + "]"
    if isinstance(e, RequireEvent):
        return f"require_event({e.event_var}, {to_text(e.arg)})"
    raise ExprError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|\.\d+)
  | (?P<str>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<id>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>===|!==|==|!=|<=|>=|&&|\|\||[-+*/%<>!()\[\],.])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def tokenize(text: str):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    out.append(_Tok("end", "", len(text)))
    return out


# Surface nodes that the resolver turns into core expressions.
@dataclass(frozen=True)
class Name:
    parts: tuple
    pos: int


@dataclass(frozen=True)
class Call:
    parts: tuple
    args: tuple
    pos: int


@dataclass(frozen=True)
class Str:
    value: str
    pos: int


class Resolver:
    """Maps surface names, calls and strings to core expressions.

    The default joins dotted names into one variable name and understands
    ``require_event(var, expr)``.
    """

    def name(self, node: Name) -> Expr:
        return Var(".".join(node.parts))

    def call(self, node: Call, args) -> Expr:
        if node.parts == ("require_event",) and len(args) == 2 and isinstance(args[0], Var):
            return RequireEvent(args[0].name, args[1])
        raise ExprError(f"unsupported function {'.'.join(node.parts)}()", node.pos)

    def string(self, node: Str) -> Expr:
        raise ExprError("string literals are not supported here", node.pos)


class _Parser:
    def __init__(self, text: str, resolver: Resolver):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.r = resolver

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, *texts):
        t = self.peek()
        if t.kind in ("op", "id") and t.text in texts:
            self.i += 1
            return t
        return None

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ExprError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.pos, self.text)
        return t

    def parse(self) -> Expr:
        e = self.or_()
        t = self.peek()
        if t.kind != "end":
            raise ExprError(f"unexpected {t.text!r}", t.pos, self.text)
        return e

    def or_(self):
        parts = [self.and_()]
        while self.accept("||"):
            parts.append(self.and_())
        return disj(*parts) if len(parts) > 1 else parts[0]

    def and_(self):
        parts = [self.eq()]
        while self.accept("&&"):
            parts.append(self.eq())
        return conj(*parts) if len(parts) > 1 else parts[0]

    def eq(self):
        e = self.rel()
        while True:
            t = self.accept("==", "!=", "===", "!==")
            if not t:
                return e
            op = "==" if t.text in ("==", "===") else "!="
            e = Cmp(op, e, self.rel())

    def rel(self):
        e = self.add()
        while True:
            t = self.accept("<", "<=", ">", ">=")
            if not t:
                return e
            r = self.add()
            if t.text in ("<", "<="):
                e = Cmp(t.text, e, r)
            else:
                e = Cmp("<" if t.text == ">" else "<=", r, e)

    def add(self):
        e = self.mul()
        while True:
            t = self.accept("+", "-")
            if not t:
                return e
            e = _fold(BinOp(t.text, e, self.mul()))

    def mul(self):
        e = self.unary()
        while True:
            t = self.accept("*", "/", "%")
            if not t:
                return e
            r = self.unary()
            if t.text == "*":
                e = _fold(BinOp("*", e, r))
            elif t.text == "/":
                if not (_is_num_const(e) and _is_num_const(r)):
                    raise ExprError("division is only supported between numeric literals", t.pos, self.text)
                if r.value == 0:
                    raise ExprError("division by zero", t.pos, self.text)
                e = Const(Fraction(e.value) / Fraction(r.value))
            else:
                raise ExprError("operator '%' is not supported", t.pos, self.text)

    def unary(self):
        if self.accept("!"):
            return neg(self.unary())
        t = self.accept("-")
        if t:
            a = self.unary()
            if _is_num_const(a):
                return Const(-a.value)
            return Neg(a)
        if self.accept("+"):
            return self.unary()
        return self.postfix()

    def postfix(self):
        t = self.peek()
        if t.kind == "id" and t.text not in ("true", "false"):
            self.next()
            parts = [t.text]
            while self.accept("."):
                nt = self.next()
                if nt.kind != "id":
                    raise ExprError("expected a property name after '.'", nt.pos, self.text)
                parts.append(nt.text)
            if self.accept("("):
                args = []
                if not self.accept(")"):
                    args.append(self.or_())
                    while self.accept(","):
                        args.append(self.or_())
                    self.expect(")")
                e = self.r.call(Call(tuple(parts), tuple(args), t.pos), args)
            else:
                e = self.r.name(Name(tuple(parts), t.pos))
        else:
            e = self.primary()
        while True:
            lb = self.accept("[")
            if not lb:
                return e
            idx = self.or_()
            self.expect("]")
            if not (isinstance(idx, Const) and isinstance(idx.value, int) and not isinstance(idx.value, bool)):
                raise ExprError("tuple index must be an integer literal", lb.pos, self.text)
            e = Proj(e, idx.value)

    def primary(self):
        t = self.next()
        if t.kind == "num":
            return Const(rat(t.text if "e" not in t.text.lower() else Fraction(t.text)))
        if t.kind == "str":
            body = t.text[1:-1].encode().decode("unicode_escape")
            return self.r.string(Str(body, t.pos))
        if t.kind == "id" and t.text in ("true", "false"):
            return Const(t.text == "true")
        if t.text == "(":
            e = self.or_()
            self.expect(")")
            return e
        if t.text == "[":
            items = []
            if not self.accept("]"):
                items.append(self.or_())
                while self.accept(","):
                    items.append(self.or_())
                self.expect("]")
            if all(isinstance(x, Const) for x in items):
                return Const(tuple(x.value for x in items))
            return TupleExpr(tuple(items))
        raise ExprError(f"unexpected {t.text or 'end of input'!r}", t.pos, self.text)


def _is_num_const(e) -> bool:
    return isinstance(e, Const) and not isinstance(e.value, (bool, tuple))


def _fold(e: BinOp) -> Expr:
    if _is_num_const(e.left) and _is_num_const(e.right):
        return Const(_ARITH[e.op](e.left.value, e.right.value))
    return e


def parse_expr(text: str, resolver: Optional[Resolver] = None) -> Expr:
    """Parse the ECMAScript-like expression syntax into a core expression."""
    if not isinstance(text, str) or not text.strip():
        raise ExprError("empty expression", 0, text)
    return _Parser(text, resolver or Resolver()).parse()
