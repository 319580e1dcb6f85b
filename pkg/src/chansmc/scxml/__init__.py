"""Restricted SCXML: parsing, event catalogs and translation to channel systems."""

from chansmc.scxml.catalog import EventCatalog, EventInfo, build_catalog
from chansmc.scxml.compiler import RandomDraw, compile, compile_files, translate_expr
from chansmc.scxml.parser import (
    Assign,
    If,
    Raise,
    ScxmlAutomaton,
    ScxmlState,
    ScxmlTransition,
    Send,
    parse_scxml,
    parse_scxml_file,
)
from chansmc.scxml.trace import ScxmlTraceExporter

__all__ = [
    "Assign",
    "EventCatalog",
    "EventInfo",
    "If",
    "RandomDraw",
    "Raise",
    "ScxmlAutomaton",
    "ScxmlState",
    "ScxmlTransition",
    "ScxmlTraceExporter",
    "Send",
    "build_catalog",
    "compile",
    "compile_files",
    "parse_scxml",
    "parse_scxml_file",
    "translate_expr",
]
