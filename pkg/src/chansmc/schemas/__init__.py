"""JSON schemas for the command-line outputs."""

import json
from importlib import resources


def load_schema(name: str) -> dict:
    """``name`` is one of ``report``, ``diagnostics``, ``compile``, ``trace-record``."""
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text(encoding="utf-8"))
