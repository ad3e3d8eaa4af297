"""Peer configuration files.

A peer config is a JSON document::

    {
      "peer_id": "peer1",
      "listen": "127.0.0.1:8101",
      "neighbors": [{"peer_id": "peer2", "endpoint": "127.0.0.1:8102"}],
      "gossip_ttl": 8,
      "readvertise_period": 30,
      "active_services": [...],
      "dormant_services": [
        {"service_name": "pc_order", "implementation_key": "echo",
         "inputs": [{"name": "brand", "type": "string"}, ...],
         "outputs": [{"name": "stock", "type": "int"}, ...],
         "fixture_outputs": {"stock": 12, "delivery_date": "2024-05-02"}}
      ]
    }

Parse and validation failures are raised as ConfigError carrying the field
path and, where it can be found, the line number in the source text.
"""

import json
import re
from pathlib import Path
from typing import Any, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from descriptor import EndpointAddress, Identifier, ParameterSpec, PeerId, ServiceDescriptor
from errors import ConfigError
from repository import FactoryRegistry, RepositoryEntry, default_factories
from settings import settings

M = TypeVar("M", bound=BaseModel)


class ServiceConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    service_name: Identifier
    implementation_key: str = "echo"
    version: int = Field(default=0, ge=0)
    inputs: tuple[ParameterSpec, ...] = ()
    outputs: tuple[ParameterSpec, ...] = Field(min_length=1)
    fixture_outputs: dict[str, Any] = Field(default_factory=dict)
    options: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _fixtures_match_outputs(self):
        declared = {p.name: p for p in self.outputs}
        for name, value in self.fixture_outputs.items():
            if name not in declared:
                raise ValueError(f"fixture output {name!r} is not a declared output")
            if not declared[name].accepts(value):
                raise ValueError(
                    f"fixture output {name!r}={value!r} is not a {declared[name].type_tag.value}"
                )
        return self

    def descriptor(self, provider: str, endpoint: str) -> ServiceDescriptor:
        return ServiceDescriptor(
            service_name=self.service_name,
            version=self.version,
            inputs=self.inputs,
            outputs=self.outputs,
            provider=provider,
            endpoint=endpoint,
        )

    def entry(self, provider: str, endpoint: str) -> RepositoryEntry:
        return RepositoryEntry(
            service_name=self.service_name,
            descriptor_template=self.descriptor(provider, endpoint),
            implementation_key=self.implementation_key,
            fixture_outputs=dict(self.fixture_outputs),
            options=dict(self.options),
        )


class NeighborConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    peer_id: PeerId
    endpoint: EndpointAddress


class PeerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    peer_id: PeerId
    listen: EndpointAddress
    neighbors: tuple[NeighborConfig, ...] = ()
    gossip_ttl: int = Field(default_factory=lambda: settings.GOSSIP_TTL, ge=0)
    readvertise_period: float = Field(default_factory=lambda: settings.READVERTISE_SECONDS, gt=0)
    active_services: tuple[ServiceConfig, ...] = ()
    dormant_services: tuple[ServiceConfig, ...] = ()

    @model_validator(mode="after")
    def _consistent(self):
        seen = set()
        for n in self.neighbors:
            if n.peer_id == self.peer_id:
                raise ValueError(f"{self.peer_id} lists itself as a neighbor")
            if n.peer_id in seen:
                raise ValueError(f"duplicate neighbor {n.peer_id!r}")
            seen.add(n.peer_id)
        names = [s.service_name for s in self.services()]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"service(s) configured twice: {', '.join(dupes)}")
        return self

    def services(self) -> list[ServiceConfig]:
        return list(self.active_services) + list(self.dormant_services)


def check_implementation_keys(config: PeerConfig, factories: FactoryRegistry) -> None:
    for kind in ("active_services", "dormant_services"):
        for i, svc in enumerate(getattr(config, kind)):
            if svc.implementation_key not in factories:
                raise ConfigError(
                    f"unregistered implementation_key {svc.implementation_key!r}",
                    field=f"{kind}.{i}.implementation_key",
                )


def parse_document(cls: Type[M], text: str, source: str = "<config>") -> M:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: {e.msg}", line=e.lineno)
    try:
        return cls.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = [str(p) for p in first.get("loc", ())]
        field_path = ".".join(loc) or "<document>"
        raise ConfigError(
            f"{source}: {first.get('msg')}", field=field_path, line=_line_of(text, loc)
        )


def _line_of(text: str, loc: list[str]) -> Optional[int]:
    """Best-effort line of the innermost key named in ``loc``."""
    for key in reversed(loc):
        if key.isdigit():
            continue
        match = re.search(rf'"{re.escape(key)}"\s*:', text)
        if match:
            return text.count("\n", 0, match.start()) + 1
    return None


def parse_peer_config(
    text: str, source: str = "<config>", factories: Optional[FactoryRegistry] = None
) -> PeerConfig:
    config = parse_document(PeerConfig, text, source)
    check_implementation_keys(config, factories or default_factories())
    return config


def load_peer_config(path: str | Path, factories: Optional[FactoryRegistry] = None) -> PeerConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    return parse_peer_config(text, str(path), factories)
