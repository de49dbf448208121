"""Published JSON schemas and validation helpers for the wire formats."""
from __future__ import annotations

from functools import lru_cache

import jsonschema
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from .util import load_packaged_json

SCHEMA_NAMES = (
    "bundle",
    "report",
    "violation",
    "job",
    "ratings_result",
    "analytics",
    "trace",
    "guidelines",
    "demobank",
)


@lru_cache(maxsize=1)
def _registry() -> Registry:
    resources = []
    for name in SCHEMA_NAMES:
        schema = load_packaged_json(f"schemas/{name}.schema.json")
        resources.append((schema["$id"], Resource.from_contents(schema)))
    return Registry().with_resources(resources)


@lru_cache(maxsize=None)
def validator_for(name: str) -> Draft202012Validator:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema {name!r}; expected one of {SCHEMA_NAMES}")
    schema = load_packaged_json(f"schemas/{name}.schema.json")
    return Draft202012Validator(schema, registry=_registry())


def validate(name: str, document) -> None:
    """Raise jsonschema.ValidationError when ``document`` violates the schema."""
    validator_for(name).validate(document)


def is_valid(name: str, document) -> bool:
    try:
        validate(name, document)
        return True
    except jsonschema.ValidationError:
        return False
