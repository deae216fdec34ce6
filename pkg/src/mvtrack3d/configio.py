"""JSON config loading and schema validation.

Every configuration document carries a ``schema_version`` field and is
validated fail-closed against a packaged JSON Schema (unknown fields are
rejected).  Parse errors report the line and column of the offending byte.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

from .errors import ConfigError, ConfigParseError


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    ref = resources.files("mvtrack3d.schemas").joinpath(f"{name}.schema.json")
    with ref.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def validate_document(doc, schema_name: str) -> None:
    """Validate ``doc`` against a packaged schema; raise ConfigError on failure."""
    try:
        jsonschema.validate(doc, _schema(schema_name))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config does not match schema {schema_name!r} at {path}: {exc.message}") from exc


def load_json_config(path, schema_name: str | None = None) -> dict:
    """Load a JSON document, reporting syntax errors with line/column."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if schema_name is not None:
        validate_document(doc, schema_name)
    return doc
