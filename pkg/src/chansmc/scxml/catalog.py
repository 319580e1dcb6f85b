"""Integer ids for automata and events, and who sends what to whom."""

from __future__ import annotations

from dataclasses import dataclass, field

from chansmc.errors import CatalogError
from chansmc.scxml.parser import If, Raise, Send


@dataclass(frozen=True)
class EventInfo:
    name: str
    id: int
    params: tuple
    sources: frozenset
    targets: frozenset


@dataclass(frozen=True)
class EventCatalog:
    automata: tuple
    events: dict
    # (event, origin, receiver) triples realised by <send>
    links: frozenset = field(default_factory=frozenset)
    # automaton -> events it has transitions on
    handled: dict = field(default_factory=dict)

    def automaton_id(self, name) -> int:
        try:
            return self.automata.index(name)
        except ValueError:
            raise CatalogError(f"unknown automaton {name!r}") from None

    def event(self, name) -> EventInfo:
        try:
            return self.events[name]
        except KeyError:
            raise CatalogError(f"unknown event {name!r}") from None

    def event_id(self, name) -> int:
        return self.event(name).id

    def event_name(self, eid) -> str:
        for e in self.events.values():
            if e.id == eid:
                return e.name
        raise CatalogError(f"unknown event id {eid}")

    def incoming(self, receiver) -> list:
        """Events ``receiver`` can get on its external queue, by id."""
        names = {e for e, _, r in self.links if r == receiver}
        return sorted((self.events[n] for n in names), key=lambda e: e.id)

    def param_links(self, receiver) -> list:
        """``(event, origin)`` pairs whose parameters travel to ``receiver``."""
        pairs = {(e, o) for e, o, r in self.links if r == receiver and self.events[e].params}
        return sorted(pairs, key=lambda p: (self.events[p[0]].id, self.automaton_id(p[1])))

    def receivers_of(self, event, default=None) -> list:
        """Possible receivers of a dynamically targeted ``event``."""
        handlers = [a for a in self.automata if event in self.handled.get(a, ())]
        return handlers or list(self.automata if default is None else default)

    def symbols(self) -> dict:
        """Names usable as ``#name`` constants in properties."""
        out = {a: i for i, a in enumerate(self.automata)}
        for e in self.events.values():
            if e.name in out and out[e.name] != e.id:
                out.pop(e.name)
                continue
            out[e.name] = e.id
        return out

    def to_json(self):
        return {
            "automata": list(self.automata),
            "events": [
                {
                    "name": e.name,
                    "id": e.id,
                    "params": list(e.params),
                    "sources": sorted(e.sources),
                    "targets": sorted(e.targets),
                }
                for e in sorted(self.events.values(), key=lambda e: e.id)
            ],
        }


def walk_content(content):
    """Executable content items, descending into ``<if>`` branches."""
    for item in content:
        yield item
        if isinstance(item, If):
            for _, body in item.branches:
                yield from walk_content(body)


def build_catalog(automata) -> EventCatalog:
    """Assign dense ids and collect event sources, targets and parameter lists.

    Automata are numbered in input order; events in order of first
    occurrence while scanning each automaton's states (entry content,
    transitions, exit content).
    """
    names = [a.name for a in automata]
    if len(set(names)) != len(names):
        raise CatalogError(f"automaton names must be distinct: {names}")
    order: list = []
    params: dict = {}
    raised: set = set()
    sources: dict = {}
    targets: dict = {}
    handled: dict = {a.name: set() for a in automata}
    dynamic: list = []
    links: set = set()

    def see(e):
        if e not in sources:
            order.append(e)
            sources[e] = set()
            targets[e] = set()

    def scan(owner, block):
        for item in walk_content(block):
            if isinstance(item, Raise):
                see(item.event)
                raised.add(item.event)
                sources[item.event].add(owner)
                targets[item.event].add(owner)
            elif isinstance(item, Send):
                see(item.event)
                sources[item.event].add(owner)
                pnames = tuple(p for p, _ in item.params)
                prev = params.setdefault(item.event, pnames)
                if len(prev) != len(pnames):
                    raise CatalogError(
                        f"event {item.event!r} sent with {len(prev)} and with {len(pnames)} parameters"
                    )
                if set(prev) != set(pnames):
                    raise CatalogError(f"event {item.event!r} sent with parameters {list(prev)} and {list(pnames)}")
                if item.target is None:
                    dynamic.append((item.event, owner))
                    continue
                if item.target not in names:
                    raise CatalogError(f"{owner}: send target {item.target!r} is not an automaton")
                targets[item.event].add(item.target)
                links.add((item.event, owner, item.target))

    for a in automata:
        for s in a.states:
            scan(a.name, s.onentry)
            for t in s.transitions:
                for e in t.events:
                    see(e)
                    handled[a.name].add(e)
                scan(a.name, t.body)
            scan(a.name, s.onexit)
    for e in raised:
        if params.get(e):
            raise CatalogError(f"event {e!r} is raised without parameters but sent with {list(params[e])}")
    for e, origin in dynamic:
        handlers = [n for n in names if e in handled[n]] or names
        for r in handlers:
            targets[e].add(r)
            links.add((e, origin, r))
    events = {
        e: EventInfo(e, i, params.get(e, ()), frozenset(sources[e]), frozenset(targets[e]))
        for i, e in enumerate(order)
    }
    return EventCatalog(tuple(names), events, frozenset(links), {k: frozenset(v) for k, v in handled.items()})
