"""Service descriptors, advertisements and parameter matching.

A descriptor is the typed input/output schema a peer publishes for one of
its services, together with the service's activation status. Its canonical
document is sorted-key JSON::

    {"endpoint": "127.0.0.1:8101", "inputs": [{"name": "brand", "type": "string"}],
     "outputs": [...], "provider": "peer1", "service_name": "pc_order",
     "status": "deactivated", "version": 0}
"""

from decimal import Decimal
from typing import Annotated, Any, Iterable

from pydantic import BaseModel, ConfigDict, Field, StringConstraints, model_validator

from constants import ServiceState, TypeTag
from errors import MalformedDocument, SchemaViolation
from utils import encode_model, loads_document, validate_model

IDENTIFIER_PATTERN = r"^[a-z][a-z0-9_]*$"
PEER_ID_PATTERN = r"^[a-z][a-z0-9_-]*$"

Identifier = Annotated[str, StringConstraints(pattern=IDENTIFIER_PATTERN)]
PeerId = Annotated[str, StringConstraints(pattern=PEER_ID_PATTERN)]
# host:port on TCP, a peer label on the simulator
EndpointAddress = Annotated[str, StringConstraints(min_length=1, pattern=r"^\S+$")]


def conforms(type_tag: TypeTag, value: Any) -> bool:
    """True iff ``value`` is a legal value for ``type_tag``."""
    if type_tag is TypeTag.BOOL:
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if type_tag is TypeTag.STRING:
        return isinstance(value, str)
    if type_tag is TypeTag.INT:
        return isinstance(value, int)
    return isinstance(value, (int, float, Decimal))


def parse_literal(type_tag: TypeTag, text: str) -> Any:
    """Parse a command-line literal into a value of ``type_tag``."""
    if type_tag is TypeTag.STRING:
        return text
    if type_tag is TypeTag.INT:
        return int(text)
    if type_tag is TypeTag.DECIMAL:
        return float(text)
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a bool: {text!r}")


class ParameterSpec(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    name: Identifier
    type_tag: TypeTag = Field(alias="type")

    @classmethod
    def parse(cls, text: str) -> "ParameterSpec":
        """Build from ``name:type`` notation, e.g. ``brand:string``."""
        name, sep, tag = text.partition(":")
        if not sep:
            raise ValueError(f"expected name:type, got {text!r}")
        return cls(name=name.strip(), type_tag=TypeTag(tag.strip()))

    def accepts(self, value: Any) -> bool:
        return conforms(self.type_tag, value)

    def __str__(self) -> str:
        return f"{self.name}:{self.type_tag.value}"


class ServiceDescriptor(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    service_name: Identifier
    version: int = Field(default=0, ge=0)
    inputs: tuple[ParameterSpec, ...] = ()
    outputs: tuple[ParameterSpec, ...] = Field(min_length=1)
    status: ServiceState = ServiceState.DEACTIVATED
    provider: PeerId
    endpoint: EndpointAddress

    @model_validator(mode="after")
    def _distinct_parameters(self):
        for label, params in (("inputs", self.inputs), ("outputs", self.outputs)):
            names = [p.name for p in params]
            dupes = sorted({n for n in names if names.count(n) > 1})
            if dupes:
                raise ValueError(f"duplicate {label} parameter(s): {', '.join(dupes)}")
        return self

    def with_status(self, status: ServiceState) -> "ServiceDescriptor":
        return self.model_copy(update={"status": status})

    def output_names(self) -> set[str]:
        return {p.name for p in self.outputs}


class Advertisement(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    origin: PeerId
    descriptor: ServiceDescriptor
    seqno: int = Field(ge=0)
    hops_remaining: int = Field(ge=0)

    @model_validator(mode="after")
    def _provider_is_origin(self):
        if self.descriptor.provider != self.origin:
            raise ValueError(
                f"descriptor provider {self.descriptor.provider!r} != origin {self.origin!r}"
            )
        return self

    @property
    def key(self) -> tuple[str, str]:
        return (self.origin, self.descriptor.service_name)


def encode_descriptor(d: ServiceDescriptor) -> bytes:
    return encode_model(d)


def decode_descriptor(doc: bytes) -> ServiceDescriptor:
    raw = loads_document(doc)
    if not isinstance(raw, dict):
        raise SchemaViolation("descriptor document must be a JSON object")
    return validate_model(ServiceDescriptor, raw)


def decode_descriptor_list(doc: bytes) -> list[ServiceDescriptor]:
    raw = loads_document(doc)
    if not isinstance(raw, list):
        raise MalformedDocument("expected a JSON array of descriptors")
    return [validate_model(ServiceDescriptor, item) for item in raw]


def applicable(d: ServiceDescriptor, available: Iterable[ParameterSpec]) -> bool:
    """Every input of ``d`` is available with identical name and type."""
    pool = available if isinstance(available, (set, frozenset)) else set(available)
    return all(p in pool for p in d.inputs)
