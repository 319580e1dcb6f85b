"""Reader for the restricted SCXML subset.

Accepted: flat ``<state>`` elements with ``<onentry>``, ``<onexit>`` and
``<transition>``; a ``<datamodel>`` of ``<data>`` items; executable content
``<assign>``, ``<if>/<elseif>/<else>``, ``<raise>``, ``<send>`` (with
``<param>`` children or a ``namelist``) and ``<log>`` (ignored).
Everything else is rejected with the element and the rule it breaks.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from xml.parsers import expat
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from chansmc.errors import ScxmlError
from chansmc.expr import Const, ExprError, Resolver, parse_expr

# Elements outside the subset, with the restriction each one breaks.
RESTRICTED = {
    "parallel": "no <parallel> states",
    "final": "no <final> states",
    "donedata": "no <donedata> (there are no final states)",
    "history": "no <history> pseudo-states",
    "script": "no <script> executable elements",
    "cancel": "no <cancel> executable elements",
    "invoke": "no <invoke> elements",
    "content": "no <content> data",
    "finalize": "no <invoke> elements",
    "initial": "no hierarchical states",
    "foreach": "executable content is limited to assign, if, raise, send and log",
}

TIME_UNITS = {"": 1, "s": 1, "ms": Fraction(1, 1000), "min": 60, "h": 3600}

_DELAY = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|min|h)?\s*$")


@dataclass(frozen=True)
class Assign:
    location: str
    expr: str
    line: Optional[int] = None


@dataclass(frozen=True)
class If:
    """``branches`` is a tuple of ``(cond, body)``; ``cond`` is None for ``<else>``."""

    branches: tuple
    line: Optional[int] = None


@dataclass(frozen=True)
class Raise:
    event: str
    line: Optional[int] = None


@dataclass(frozen=True)
class Send:
    event: str
    target: Optional[str] = None
    targetexpr: Optional[str] = None
    params: tuple = ()
    delay: Optional[object] = None
    line: Optional[int] = None


@dataclass(frozen=True)
class ScxmlTransition:
    events: tuple
    cond: Optional[str]
    target: str
    body: tuple = ()
    line: Optional[int] = None

    @property
    def eventless(self) -> bool:
        return not self.events


@dataclass(frozen=True)
class ScxmlState:
    id: str
    onentry: tuple = ()
    onexit: tuple = ()
    transitions: tuple = ()
    line: Optional[int] = None


@dataclass(frozen=True)
class ScxmlAutomaton:
    name: str
    states: tuple
    initial_state: str
    datamodel: tuple = ()  # (location, expression text or None, line)
    source: Optional[str] = None

    def state(self, sid) -> ScxmlState:
        for s in self.states:
            if s.id == sid:
                return s
        raise KeyError(sid)


# --------------------------------------------------------------------------


def _read_xml(text: str, source):
    """Parse into an ElementTree with each element's line in ``__line__``."""
    builder = ET.TreeBuilder()
    parser = expat.ParserCreate(namespace_separator="}")

    def start(tag, attrs):
        attrs = dict(attrs)
        attrs["__line__"] = str(parser.CurrentLineNumber)
        builder.start(tag, attrs)

    parser.StartElementHandler = start
    parser.EndElementHandler = builder.end
    parser.CharacterDataHandler = builder.data
    try:
        parser.Parse(text, True)
        return builder.close()
    except expat.ExpatError as exc:
        raise ScxmlError(f"XML syntax error: {exc}", restriction="well-formed XML", source=source) from None


def _tag(el) -> str:
    return el.tag.rsplit("}", 1)[-1]


class _Reader:
    def __init__(self, source):
        self.source = source

    def where(self, el) -> str:
        line = el.get("__line__")
        return f"{self.source or '<input>'}:{line}" if line else (self.source or "<input>")

    def fail(self, el, message, restriction=None):
        raise ScxmlError(
            f"{self.where(el)}: {message}",
            element=_tag(el),
            restriction=restriction,
            source=self.where(el),
        )

    def line(self, el):
        v = el.get("__line__")
        return int(v) if v else None

    def attr(self, el, name, required=False):
        v = el.get(name)
        if required and (v is None or not v.strip()):
            self.fail(el, f"<{_tag(el)}> needs a {name!r} attribute")
        return v

    def check_restricted(self, el):
        tag = _tag(el)
        if tag in RESTRICTED:
            self.fail(el, f"<{tag}> is outside the supported subset ({RESTRICTED[tag]})", RESTRICTED[tag])

    def check_expr(self, el, text, what):
        try:
            parse_expr(text, _SyntaxOnly())
        except ExprError as exc:
            self.fail(el, f"untranslatable {what} {text!r}: {exc}", "translatable expression")
        return text

    # -- document ----------------------------------------------------------

    def automaton(self, root, name=None) -> ScxmlAutomaton:
        if _tag(root) != "scxml":
            self.fail(root, f"root element must be <scxml>, got <{_tag(root)}>")
        dm = root.get("datamodel")
        if dm not in (None, "ecmascript"):
            self.fail(root, f"datamodel {dm!r} is not supported", "ECMAScript datamodel")
        name = root.get("name") or name
        if not name:
            self.fail(root, "<scxml> needs a name attribute")
        states, datamodel = [], []
        for el in root:
            self.check_restricted(el)
            tag = _tag(el)
            if tag == "state":
                states.append(self.state(el))
            elif tag == "datamodel":
                datamodel.extend(self.datamodel(el))
            else:
                self.fail(el, f"unexpected element <{tag}> in <scxml>")
        if not states:
            self.fail(root, "automaton has no states")
        ids = [s.id for s in states]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            self.fail(root, f"duplicate state ids {sorted(dup)}")
        initial = root.get("initial") or ids[0]
        if " " in initial.strip():
            self.fail(root, "only one initial state is supported", "no parallel states")
        if initial not in ids:
            self.fail(root, f"initial state {initial!r} is not declared", "known target state")
        for s in states:
            for t in s.transitions:
                if t.target not in ids:
                    raise ScxmlError(
                        f"{self.source or '<input>'}:{t.line}: transition target {t.target!r} is not a declared state",
                        element="transition",
                        restriction="known target state",
                        source=f"{self.source or '<input>'}:{t.line}",
                    )
        locs = [d[0] for d in datamodel]
        dup = {i for i in locs if locs.count(i) > 1}
        if dup:
            self.fail(root, f"duplicate datamodel ids {sorted(dup)}")
        return ScxmlAutomaton(name, tuple(states), initial, tuple(datamodel), self.source)

    def datamodel(self, el):
        out = []
        for d in el:
            self.check_restricted(d)
            if _tag(d) != "data":
                self.fail(d, f"unexpected element <{_tag(d)}> in <datamodel>")
            did = self.attr(d, "id", required=True)
            if not re.fullmatch(r"[A-Za-z_$][A-Za-z0-9_$]*", did):
                self.fail(d, f"datamodel id {did!r} is not an identifier")
            if d.get("src"):
                self.fail(d, "<data src> is not supported", "inline datamodel")
            expr = d.get("expr")
            if expr is None and (d.text or "").strip():
                expr = d.text.strip()
            if expr is not None:
                self.check_expr(d, expr, "data expression")
            for c in d:
                self.check_restricted(c)
                self.fail(c, f"unexpected element <{_tag(c)}> in <data>")
            out.append((did, expr, self.line(d)))
        return out

    def state(self, el) -> ScxmlState:
        sid = self.attr(el, "id", required=True)
        if el.get("initial"):
            self.fail(el, "states cannot declare an initial child", "no hierarchical states")
        onentry, onexit, transitions = [], [], []
        for c in el:
            self.check_restricted(c)
            tag = _tag(c)
            if tag == "state":
                self.fail(c, "nested <state> elements are not supported", "no hierarchical states")
            elif tag == "onentry":
                onentry.extend(self.block(c))
            elif tag == "onexit":
                onexit.extend(self.block(c))
            elif tag == "transition":
                transitions.append(self.transition(c))
            elif tag == "datamodel":
                self.fail(c, "state-local datamodels are not supported", "no hierarchical states")
            else:
                self.fail(c, f"unexpected element <{tag}> in <state>")
        return ScxmlState(sid, tuple(onentry), tuple(onexit), tuple(transitions), self.line(el))

    def transition(self, el) -> ScxmlTransition:
        target = el.get("target")
        if not target or not target.strip():
            self.fail(el, "transitions without a target are not supported", "transition target required")
        if len(target.split()) != 1:
            self.fail(el, "transitions with several targets are not supported", "no parallel states")
        if el.get("type") not in (None, "external"):
            self.fail(el, f"transition type {el.get('type')!r} is not supported", "no hierarchical states")
        events = tuple((el.get("event") or "").split())
        for e in events:
            if "*" in e or e.endswith("."):
                self.fail(el, f"event descriptor {e!r} uses wildcards", "exact event names")
        cond = el.get("cond")
        if cond is not None:
            self.check_expr(el, cond, "condition")
        return ScxmlTransition(events, cond, target.strip(), tuple(self.block(el)), self.line(el))

    # -- executable content ------------------------------------------------

    def block(self, el) -> list:
        out = []
        for c in el:
            item = self.exec(c)
            if item is not None:
                out.append(item)
        return out

    def exec(self, el):
        self.check_restricted(el)
        tag = _tag(el)
        if tag == "log":
            return None
        if tag == "assign":
            loc = self.attr(el, "location", required=True)
            expr = el.get("expr")
            if expr is None:
                if len(el):
                    self.check_restricted(el[0])
                if not (el.text or "").strip():
                    self.fail(el, "<assign> needs an expr")
                expr = el.text.strip()
            return Assign(loc, self.check_expr(el, expr, "expression"), self.line(el))
        if tag == "raise":
            return Raise(self.attr(el, "event", required=True), self.line(el))
        if tag == "send":
            return self.send(el)
        if tag == "if":
            return self.if_(el)
        if tag in ("elseif", "else"):
            self.fail(el, f"<{tag}> outside <if>")
        self.fail(el, f"<{tag}> is not supported executable content", RESTRICTED["foreach"])

    def if_(self, el) -> If:
        branches = []
        cond = self.attr(el, "cond", required=True)
        self.check_expr(el, cond, "condition")
        body: list = []
        seen_else = False
        for c in el:
            tag = _tag(c)
            if tag in ("elseif", "else"):
                if seen_else:
                    self.fail(c, f"<{tag}> after <else>")
                branches.append((cond, tuple(body)))
                body = []
                if tag == "elseif":
                    cond = self.attr(c, "cond", required=True)
                    self.check_expr(c, cond, "condition")
                else:
                    cond = None
                    seen_else = True
                continue
            item = self.exec(c)
            if item is not None:
                body.append(item)
        branches.append((cond, tuple(body)))
        return If(tuple(branches), self.line(el))

    def send(self, el) -> Send:
        for bad in ("eventexpr", "delayexpr", "idlocation", "id", "typeexpr"):
            if el.get(bad) is not None:
                self.fail(el, f"<send {bad}> is not supported", "static send attributes")
        if el.get("type") not in (None, "scxml", "http://www.w3.org/TR/scxml/#SCXMLEventProcessor"):
            self.fail(el, f"send type {el.get('type')!r} is not supported", "SCXML event processor")
        event = self.attr(el, "event", required=True)
        target, texpr = el.get("target"), el.get("targetexpr")
        if (target is None) == (texpr is None):
            self.fail(el, "<send> needs exactly one of target and targetexpr")
        if target is not None:
            target = _strip_target(target)
        else:
            self.check_expr(el, texpr, "targetexpr")
        params = []
        for name in (el.get("namelist") or "").split():
            params.append((name, name))
        for c in el:
            self.check_restricted(c)
            if _tag(c) != "param":
                self.fail(c, f"unexpected element <{_tag(c)}> in <send>")
            pname = self.attr(c, "name", required=True)
            expr, loc = c.get("expr"), c.get("location")
            if (expr is None) == (loc is None):
                self.fail(c, "<param> needs exactly one of expr and location")
            params.append((pname, self.check_expr(c, expr if expr is not None else loc, "parameter")))
        names = [p for p, _ in params]
        if len(set(names)) != len(names):
            self.fail(el, f"duplicate parameter names {names}")
        delay = None
        if el.get("delay") is not None:
            delay = self.delay(el, el.get("delay"))
        return Send(event, target, texpr, tuple(params), delay, self.line(el))

    def delay(self, el, text):
        m = _DELAY.match(text)
        if not m:
            self.fail(el, f"delay {text!r} is not a literal number of time units", "literal delay")
        value = Fraction(m.group(1)) * TIME_UNITS[m.group(2) or ""]
        return value.numerator if value.denominator == 1 else value


def _strip_target(target: str) -> str:
    t = target.strip()
    for prefix in ("#_scxml_", "#_"):
        if t.startswith(prefix):
            return t[len(prefix):]
    return t


class _SyntaxOnly(Resolver):
    """Accepts any name, call or string: checks syntax only."""

    def call(self, node, args):
        return Const(0)

    def string(self, node):
        return Const(0)


def parse_scxml(document: str, source: Optional[str] = None, name: Optional[str] = None) -> ScxmlAutomaton:
    """Parse and validate one automaton.  ``name`` is used when the root has none."""
    root = _read_xml(document, source)
    return _Reader(source).automaton(root, name)


def parse_scxml_file(path) -> ScxmlAutomaton:
    p = Path(path)
    return parse_scxml(p.read_text(encoding="utf-8"), str(p), p.stem)
