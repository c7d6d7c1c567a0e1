"""Access to the published JSON schemas (record + instrumentation report).

The canonical copies live at the repo root under schemas/; the packaged copies
under vicorpus/data/ are byte-identical (a test enforces the sync).
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Any

_NAMES = {"record": "record.schema.json", "report": "report.schema.json"}


def load_schema(name: str) -> dict[str, Any]:
    if name not in _NAMES:
        raise KeyError(f"unknown schema {name!r}")
    ref = resources.files("vicorpus").joinpath("data").joinpath(_NAMES[name])
    return json.loads(ref.read_text("utf-8"))
