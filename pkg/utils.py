"""Canonical JSON documents.

Every document this project writes (descriptors, gossip, envelopes, config
echoes) goes through ``canonical_dumps``: sorted keys, no insignificant
whitespace, UTF-8. Identical values therefore produce identical bytes.
"""

import json
from typing import Any, Type, TypeVar

from pydantic import BaseModel, ValidationError

from errors import MalformedDocument, SchemaViolation

M = TypeVar("M", bound=BaseModel)


def canonical_dumps(obj: Any) -> bytes:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def loads_document(doc: bytes | str) -> Any:
    """Parse a JSON document, raising MalformedDocument on any syntax error."""
    try:
        text = doc.decode("utf-8") if isinstance(doc, (bytes, bytearray)) else doc
        return json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedDocument(f"not a JSON document: {e}")


def encode_model(model: BaseModel) -> bytes:
    return canonical_dumps(model.model_dump(mode="json", by_alias=True))


def validate_model(cls: Type[M], raw: Any) -> M:
    try:
        return cls.model_validate(raw)
    except ValidationError as e:
        raise SchemaViolation(_summarize(e))


def decode_model(cls: Type[M], doc: bytes | str) -> M:
    return validate_model(cls, loads_document(doc))


def _summarize(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item.get("loc", ())) or "<document>"
        parts.append(f"{loc}: {item.get('msg')}")
    return "; ".join(parts)
