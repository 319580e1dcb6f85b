"""Model manifests: which files make up a model and how to check it.

A manifest is a JSON object::

    {
      "automata": ["ping.scxml", "pong.scxml"],   # or "model": "model.json"
      "properties": "properties.xml",
      "queue_capacity": {"internal": 8, "external": 8},
      "time_quantum": 1,
      "horizon": 10000,
      "seed": 0,
      "smc": {"epsilon": 0.05, "delta": 0.05, "max_samples": 100000,
              "max_steps": 10000, "workers": 1}
    }

Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from chansmc.channel_system import ChannelSystem, location_label
from chansmc.errors import ChansmcError, ModelError, PropertyError, ScxmlError
from chansmc.expr import ExprError, parse_expr
from chansmc.kernel import rat
from chansmc.model_io import load_model
from chansmc.mtl.formula import PropertyFile, check_atoms, load_properties
from chansmc.program_graph import DEFAULT_HORIZON, DEFAULT_QUANTUM
from chansmc.scxml.catalog import build_catalog
from chansmc.scxml.compiler import DEFAULT_CAPACITY, compile
from chansmc.scxml.parser import parse_scxml_file


class MissingFileError(ChansmcError):
    """A file named on the command line or in a manifest does not exist."""


@dataclass(frozen=True)
class Manifest:
    path: Path
    automata: tuple = ()
    model: Optional[Path] = None
    properties: Optional[Path] = None
    internal_capacity: int = DEFAULT_CAPACITY
    external_capacity: int = DEFAULT_CAPACITY
    quantum: object = DEFAULT_QUANTUM
    horizon: int = DEFAULT_HORIZON
    seed: int = 0
    smc: dict = field(default_factory=dict)


def _positive_int(value, what):
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ModelError(f"manifest: {what} must be a positive integer, got {value!r}")
    return value


def load_manifest(path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"manifest {path} not found")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ModelError(f"{path}: manifest must be a JSON object")
    base = path.parent

    def resolve(p):
        q = Path(p)
        q = q if q.is_absolute() else base / q
        if not q.is_file():
            raise MissingFileError(f"{q} (named in {path}) not found")
        return q

    automata = tuple(resolve(p) for p in data.get("automata", ()))
    model = resolve(data["model"]) if data.get("model") else None
    if bool(automata) == bool(model):
        raise ModelError(f"{path}: give exactly one of 'automata' and 'model'")
    props = resolve(data["properties"]) if data.get("properties") else None
    caps = data.get("queue_capacity", {})
    if isinstance(caps, int):
        caps = {"internal": caps, "external": caps}
    quantum = rat(data.get("time_quantum", DEFAULT_QUANTUM))
    if quantum <= 0:
        raise ModelError(f"{path}: time_quantum must be positive")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ModelError(f"{path}: seed must be an integer")
    return Manifest(
        path,
        automata,
        model,
        props,
        _positive_int(caps.get("internal", DEFAULT_CAPACITY), "queue_capacity.internal"),
        _positive_int(caps.get("external", DEFAULT_CAPACITY), "queue_capacity.external"),
        quantum,
        _positive_int(data.get("horizon", DEFAULT_HORIZON), "horizon"),
        seed,
        dict(data.get("smc", {})),
    )


@dataclass
class Loaded:
    cs: ChannelSystem
    properties: Optional[PropertyFile]


def label_names(cs: ChannelSystem) -> set:
    return set(cs.propositions) | {location_label(pg.name, l) for pg in cs.pgs for l in pg.locations}


def _read_properties(path, symbols) -> PropertyFile:
    try:
        return load_properties(Path(path).read_text(encoding="utf-8"), symbols)
    except PropertyError as exc:
        raise PropertyError(f"{path}: {exc}") from None


def build(manifest: Manifest, need_properties: bool = True) -> Loaded:
    """Parse, compile and check everything the manifest names."""
    if need_properties and manifest.properties is None:
        raise MissingFileError(f"{manifest.path}: no property file given")
    if manifest.automata:
        automata = [parse_scxml_file(p) for p in manifest.automata]
        catalog = build_catalog(automata)
        pf = _read_properties(manifest.properties, catalog.symbols()) if manifest.properties else None
        cs = compile(
            automata,
            catalog,
            internal_capacity=manifest.internal_capacity,
            external_capacity=manifest.external_capacity,
            quantum=manifest.quantum,
            horizon=manifest.horizon,
            propositions=pf.propositions if pf else None,
        )
    else:
        cs = load_model(manifest.model)
        pf = _read_properties(manifest.properties, {}) if manifest.properties else None
        if pf and pf.propositions:
            try:
                extra = {k: parse_expr(v) for k, v in pf.propositions.items()}
            except ExprError as exc:
                raise PropertyError(f"{manifest.properties}: {exc}") from None
            props = {**cs.propositions, **extra}
            cs = ChannelSystem(cs.pgs, cs.channels, props, cs.quantum, cs.horizon, cs.metadata)
    if pf:
        labels = label_names(cs)
        channels = [c.id for c in cs.channels]
        for p in pf.properties:
            try:
                check_atoms(p.formula, channels, labels)
            except PropertyError as exc:
                raise PropertyError(f"property {p.name!r}: {exc}") from None
    return Loaded(cs, pf)


def diagnose(manifest: Manifest) -> list:
    """Every problem found, one diagnostic dict each (empty when clean).

    Each automaton is parsed on its own so one bad file does not hide
    problems in the others.
    """
    out = []

    def add(exc, file=None):
        d = exc.to_dict() if isinstance(exc, ScxmlError) else {"message": str(exc)}
        d.setdefault("element", None)
        d.setdefault("restriction", None)
        d.setdefault("source", None)
        d["file"] = None if file is None else str(file)
        d["kind"] = type(exc).__name__
        out.append(d)

    if manifest.properties is None:
        add(MissingFileError("no property file given"), manifest.path)
    broken = False
    for p in manifest.automata:
        try:
            parse_scxml_file(p)
        except ChansmcError as exc:
            add(exc, p)
            broken = True
    if broken:
        return out
    try:
        build(manifest, need_properties=False)
    except ChansmcError as exc:
        add(exc, manifest.properties if isinstance(exc, PropertyError) else manifest.path)
    return out

