"""Schema checks for emslab sweep configuration documents."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any

import jsonschema

_SCHEMA_PATH = Path(__file__).resolve().parent.parent / "schemas" / "sweep.schema.json"


@lru_cache(maxsize=1)
def sweep_schema() -> dict[str, Any]:
    loaded: dict[str, Any] = json.loads(_SCHEMA_PATH.read_text(encoding="utf-8"))
    return loaded


def validate_sweep_json(data: object) -> None:
    """Validate a parsed sweep document against sweep.schema.json.

    Parameters
    ----------
    data:
        The decoded JSON document.

    Raises
    ------
    jsonschema.ValidationError
        If the document does not conform to the schema.
    """
    jsonschema.validate(data, sweep_schema())
