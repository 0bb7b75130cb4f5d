"""JSON schemas for the case input and every JSON file the CLI writes."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

from ..errors import ValidationError


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    with resources.files(__name__).joinpath(f"{name}.schema.json").open() as fh:
        return json.load(fh)


def validate_output(obj, name: str) -> None:
    try:
        jsonschema.validate(obj, load_schema(name))
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValidationError(f"{name} output violates its schema at {path}: {err.message}") from None
