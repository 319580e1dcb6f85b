"""Traces at the level of SCXML events rather than channel operations.

A compiled send is two channel operations (the ``(event, origin)`` pair
on the external queue, then the parameters on their own channel); this
module folds them back into one record per send and one per receive, so
the translation stays invisible in exported traces.
"""

from __future__ import annotations

from collections import deque

from chansmc.kernel import EventKind, value_to_json


class ScxmlTraceExporter:
    """Turns ``(time, EventRecord)`` steps into SCXML-level records.

    Records are dicts ``{t, kind, channel, event, params, origin, target}``
    with ``kind`` one of ``send``, ``raise`` or ``receive``.  A record waits
    until its parameters have travelled; records are released in the order
    their first channel operation happened.
    """

    def __init__(self, metadata):
        self.roles = metadata.get("channels", {})
        catalog = metadata.get("catalog", {})
        self.automata = catalog.get("automata", [])
        self.events = {e["id"]: e for e in catalog.get("events", [])}
        self._out: deque = deque()  # [record, ready]
        self._sends: dict = {}  # param channel -> pending send entries
        self._receives: dict = {}  # receiver -> pending receive entry

    def _record(self, t, kind, channel, eid, origin, target):
        ev = self.events.get(eid, {"name": str(eid), "params": []})
        entry = [
            {
                "t": value_to_json(t),
                "kind": kind,
                "channel": channel,
                "event": ev["name"],
                "params": {},
                "origin": origin,
                "target": target,
            },
            not ev["params"],
        ]
        self._out.append(entry)
        return entry, ev

    def feed(self, t, event) -> list:
        """Consume one step; returns records that became complete, in order."""
        if event is None or event.kind not in (EventKind.SEND, EventKind.RECEIVE):
            return []
        role = self.roles.get(event.channel)
        if role is None:
            return []
        send = event.kind is EventKind.SEND
        if role["role"] == "internal":
            a = role["automaton"]
            self._record(t, "raise" if send else "receive", event.channel, event.payload, a, a)
        elif role["role"] == "external":
            eid, oid = event.payload
            origin = self.automata[oid] if 0 <= oid < len(self.automata) else str(oid)
            entry, ev = self._record(t, "send" if send else "receive", event.channel, eid, origin, role["automaton"])
            if not entry[1]:
                if send:
                    key = f"c:{ev['name']}:{origin}:{role['automaton']}"
                    self._sends.setdefault(key, deque()).append(entry)
                else:
                    self._receives[role["automaton"]] = entry
        else:
            if send:
                pending = self._sends.get(event.channel)
                entry = pending.popleft() if pending else None
            else:
                entry = self._receives.pop(role["receiver"], None)
            if entry is not None:
                ev = next(e for e in self.events.values() if e["name"] == role["event"])
                values = event.payload if len(ev["params"]) > 1 else (event.payload,)
                entry[0]["params"] = {p: value_to_json(v) for p, v in zip(ev["params"], values)}
                entry[1] = True
        return self._release()

    def _release(self) -> list:
        done = []
        while self._out and self._out[0][1]:
            done.append(self._out.popleft()[0])
        return done

    def flush(self) -> list:
        """Everything still held back, including records missing parameters."""
        done = [e[0] for e in self._out]
        self._out.clear()
        return done


def channel_record(t, event) -> dict:
    """Generic record for models that were not compiled from SCXML."""
    return {
        "t": value_to_json(t),
        "kind": event.kind.value,
        "channel": event.channel,
        "payload": None if event.payload is None else value_to_json(event.payload),
        "source": event.source_pg,
        "target": event.target_pg,
        "action": event.action,
    }
