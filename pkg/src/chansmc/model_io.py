"""JSON form of a compiled channel system.

Expressions are written as prefix trees (``["cmp", "<", ["var", "x"],
["const", 3]]``) so any variable name survives a round trip; hand-written
models may use expression text instead, parsed with the default resolver.
"""

from __future__ import annotations

import json
from pathlib import Path

from chansmc.channel_system import (
    ChannelDecl,
    ChannelSystem,
    ProbeEmpty,
    ProbeNonEmpty,
    Receive,
    ReceiveConst,
    Send,
)
from chansmc.errors import ModelError
from chansmc.expr import (
    And,
    BinOp,
    Cmp,
    Const,
    Expr,
    Neg,
    Not,
    Or,
    Proj,
    RequireEvent,
    TupleExpr,
    Var,
    parse_expr,
)
from chansmc.kernel import (
    CLOCK_TRUE,
    VarDomain,
    constraint_from_json,
    constraint_to_json,
    rat,
    value_from_json,
    value_to_json,
)
from chansmc.program_graph import DEFAULT_HORIZON, DEFAULT_QUANTUM, NO_EFFECT, Effect, PgTransition, ProgramGraph

FORMAT = "chansmc-model"
VERSION = 1


def expr_to_json(e: Expr):
    if isinstance(e, Const):
        return ["const", value_to_json(e.value)]
    if isinstance(e, Var):
        return ["var", e.name]
    if isinstance(e, Neg):
        return ["neg", expr_to_json(e.arg)]
    if isinstance(e, Not):
        return ["not", expr_to_json(e.arg)]
    if isinstance(e, BinOp):
        return ["bin", e.op, expr_to_json(e.left), expr_to_json(e.right)]
    if isinstance(e, Cmp):
        return ["cmp", e.op, expr_to_json(e.left), expr_to_json(e.right)]
    if isinstance(e, (And, Or)):
        return ["and" if isinstance(e, And) else "or"] + [expr_to_json(p) for p in e.parts]
    if isinstance(e, Proj):
        return ["proj", expr_to_json(e.arg), e.index]
    if isinstance(e, TupleExpr):
        return ["tuple"] + [expr_to_json(x) for x in e.items]
    if isinstance(e, RequireEvent):
        return ["require-event", e.event_var, expr_to_json(e.arg)]
    raise ModelError(f"cannot serialize expression {e!r}")


def expr_from_json(data) -> Expr:
    if isinstance(data, str):
        return parse_expr(data)
    if isinstance(data, bool):
        return Const(data)
    if not isinstance(data, list) or not data:
        raise ModelError(f"bad expression {data!r}")
    op, args = data[0], data[1:]
    if op == "const":
        return Const(value_from_json(args[0]))
    if op == "var":
        return Var(args[0])
    if op == "neg":
        return Neg(expr_from_json(args[0]))
    if op == "not":
        return Not(expr_from_json(args[0]))
    if op == "bin":
        return BinOp(args[0], expr_from_json(args[1]), expr_from_json(args[2]))
    if op == "cmp":
        return Cmp(args[0], expr_from_json(args[1]), expr_from_json(args[2]))
    if op in ("and", "or"):
        parts = tuple(expr_from_json(a) for a in args)
        return And(parts) if op == "and" else Or(parts)
    if op == "proj":
        return Proj(expr_from_json(args[0]), int(args[1]))
    if op == "tuple":
        return TupleExpr(tuple(expr_from_json(a) for a in args))
    if op == "require-event":
        return RequireEvent(args[0], expr_from_json(args[1]))
    raise ModelError(f"unknown expression operator {op!r}")


def _comm_to_json(a):
    if a is None:
        return None
    if isinstance(a, Send):
        return {"kind": "send", "channel": a.channel, "expr": expr_to_json(a.expr)}
    if isinstance(a, Receive):
        return {"kind": "receive", "channel": a.channel, "targets": list(a.targets)}
    if isinstance(a, ReceiveConst):
        return {"kind": "receive-const", "channel": a.channel, "value": value_to_json(a.value)}
    if isinstance(a, ProbeEmpty):
        return {"kind": "probe-empty", "channel": a.channel}
    return {"kind": "probe-nonempty", "channel": a.channel}


def _comm_from_json(d):
    if d is None:
        return None
    kind, ch = d["kind"], d["channel"]
    if kind == "send":
        return Send(ch, expr_from_json(d["expr"]))
    if kind == "receive":
        return Receive(ch, tuple(d["targets"]))
    if kind == "receive-const":
        return ReceiveConst(ch, value_from_json(d["value"]))
    if kind == "probe-empty":
        return ProbeEmpty(ch)
    if kind == "probe-nonempty":
        return ProbeNonEmpty(ch)
    raise ModelError(f"unknown communication kind {kind!r}")


def _effect_to_json(eff: Effect):
    return [[str(p), [[v, expr_to_json(e)] for v, e in assigns]] for p, assigns in eff.branches]


def _effect_from_json(data) -> Effect:
    if not data:
        return NO_EFFECT
    return Effect(tuple((rat(p), tuple((v, expr_from_json(e)) for v, e in assigns)) for p, assigns in data))


def _transition_to_json(t: PgTransition):
    return {
        "source": t.source,
        "action": t.action,
        "target": t.target,
        "guard": expr_to_json(t.guard),
        "clock_guard": constraint_to_json(t.clock_guard),
        "resets": sorted(t.resets),
        "effect": _effect_to_json(t.effect),
        "comm": _comm_to_json(t.comm),
    }


def _transition_from_json(d) -> PgTransition:
    return PgTransition(
        d["source"],
        d.get("action", "tau"),
        d["target"],
        expr_from_json(d.get("guard", ["const", True])),
        constraint_from_json(d["clock_guard"]) if d.get("clock_guard") else CLOCK_TRUE,
        frozenset(d.get("resets", ())),
        _effect_from_json(d.get("effect")),
        _comm_from_json(d.get("comm")),
    )


def model_to_json(cs: ChannelSystem) -> dict:
    pgs = []
    for pg in cs.pgs:
        pgs.append(
            {
                "name": pg.name,
                "locations": list(pg.locations),
                "initial_locations": list(pg.initial_locations),
                "variables": {v: d.to_json() for v, d in pg.variables.items()},
                "initial_condition": expr_to_json(pg.initial_condition),
                "initial_valuation": None
                if pg.initial_valuation is None
                else {v: value_to_json(x) for v, x in pg.initial_valuation.items()},
                "clocks": sorted(pg.clocks),
                "transitions": [_transition_to_json(t) for t in pg.transitions],
            }
        )
    return {
        "format": FORMAT,
        "version": VERSION,
        "quantum": str(cs.quantum),
        "horizon": cs.horizon,
        "pgs": pgs,
        "channels": [
            {
                "id": c.id,
                "senders": sorted(c.senders),
                "receiver": c.receiver,
                "capacity": c.capacity,
                "domain": c.message_domain.to_json(),
            }
            for c in cs.channels
        ],
        "propositions": {k: expr_to_json(e) for k, e in cs.propositions.items()},
        "metadata": dict(cs.metadata),
    }


def model_from_json(data: dict) -> ChannelSystem:
    """Rebuild a channel system; validation runs as on any construction."""
    if data.get("format", FORMAT) != FORMAT:
        raise ModelError(f"not a {FORMAT} document")
    try:
        quantum = rat(data.get("quantum", DEFAULT_QUANTUM))
        horizon = int(data.get("horizon", DEFAULT_HORIZON))
        pgs = []
        for p in data["pgs"]:
            init_val = p.get("initial_valuation")
            pgs.append(
                ProgramGraph(
                    p["name"],
                    tuple(p["locations"]),
                    tuple(p["initial_locations"]),
                    {v: VarDomain.from_json(d) for v, d in p.get("variables", {}).items()},
                    tuple(_transition_from_json(t) for t in p.get("transitions", ())),
                    frozenset(p.get("clocks", ())),
                    expr_from_json(p.get("initial_condition", ["const", True])),
                    None if init_val is None else {v: value_from_json(x) for v, x in init_val.items()},
                    quantum=quantum,
                    horizon=horizon,
                )
            )
        channels = [
            ChannelDecl(c["id"], frozenset(c.get("senders", ())), c["receiver"], int(c["capacity"]), VarDomain.from_json(c["domain"]))
            for c in data.get("channels", ())
        ]
        props = {k: expr_from_json(e) for k, e in data.get("propositions", {}).items()}
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelError(f"malformed model document: {exc!r}") from None
    return ChannelSystem(tuple(pgs), tuple(channels), props, quantum, horizon, data.get("metadata", {}))


def dump_model(cs: ChannelSystem, path) -> None:
    Path(path).write_text(json.dumps(model_to_json(cs), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> ChannelSystem:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON: {exc}") from None
    return model_from_json(data)
