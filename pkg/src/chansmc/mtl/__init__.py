"""Metric temporal logic over finite timed state-event traces."""

from chansmc.mtl.evaluate import evaluate, evaluate_all
from chansmc.mtl.formula import (
    FALSE,
    TRUE,
    And,
    Const,
    EventAtom,
    Eventually,
    Formula,
    Globally,
    Historically,
    Implies,
    Not,
    Once,
    Or,
    Prop,
    Property,
    PropertyFile,
    Since,
    Until,
    Verdict,
    atoms,
    check_atoms,
    load_properties,
    normalize,
    parse_formula,
    to_sexpr,
)
from chansmc.mtl.monitor import Monitor, end_of_trace, online_update

__all__ = [
    "FALSE",
    "TRUE",
    "And",
    "Const",
    "EventAtom",
    "Eventually",
    "Formula",
    "Globally",
    "Historically",
    "Implies",
    "Monitor",
    "Not",
    "Once",
    "Or",
    "Prop",
    "Property",
    "PropertyFile",
    "Since",
    "Until",
    "Verdict",
    "atoms",
    "check_atoms",
    "end_of_trace",
    "evaluate",
    "evaluate_all",
    "load_properties",
    "normalize",
    "online_update",
    "parse_formula",
    "to_sexpr",
]
