"""JSON Schema loading and validation for the shipped document formats."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any

from jsonschema import Draft202012Validator

from toolchain_assurance.errors import SchemaError


@lru_cache(maxsize=None)
def _validator(name: str) -> Draft202012Validator:
    text = resources.files("toolchain_assurance.schemas").joinpath(f"{name}.schema.json").read_text()
    return Draft202012Validator(json.loads(text))


def schema_text(name: str) -> str:
    return resources.files("toolchain_assurance.schemas").joinpath(f"{name}.schema.json").read_text()


def diagnostics(doc: Any, name: str) -> list[tuple[str, str]]:
    """All (path, message) violations of schema ``name``, in path order."""
    errors = sorted(_validator(name).iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    return [(_path(e.absolute_path), e.message) for e in errors]


def validate(doc: Any, name: str) -> None:
    found = diagnostics(doc, name)
    if found:
        path, msg = found[0]
        err = SchemaError(msg, path)
        err.diagnostics = found
        raise err


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "(root)"
