"""Dormant service store, the factory registry behind it, and the active table.

A repository entry is a service a peer hosts but has not loaded. Activating
it runs the entry's factory once, installs the resulting handle in the
peer's ActiveServiceTable and flips the entry to ACTIVATED. Factories are
looked up by ``implementation_key``::

    factories = default_factories()
    factories.register("lookup", lambda entry: my_lookup_handle)
"""

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from constants import ServiceState
from descriptor import ServiceDescriptor
from errors import (
    DuplicateService,
    InjectionFailed,
    NotActive,
    ServiceNotInRepository,
    UnknownImplementationKey,
)

logger = logging.getLogger(__name__)

# arguments by parameter name -> outputs by parameter name
ServiceHandle = Callable[[dict[str, Any]], dict[str, Any]]


@dataclass
class RepositoryEntry:
    service_name: str
    descriptor_template: ServiceDescriptor
    implementation_key: str = "echo"
    fixture_outputs: dict[str, Any] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)
    state: ServiceState = ServiceState.DEACTIVATED
    activation_events: int = 0
    handle: Optional[ServiceHandle] = None

    def descriptor(self) -> ServiceDescriptor:
        return self.descriptor_template.with_status(self.state)


ServiceFactory = Callable[[RepositoryEntry], ServiceHandle]


def echo_factory(entry: RepositoryEntry) -> ServiceHandle:
    outputs = dict(entry.fixture_outputs)

    def handle(arguments: dict[str, Any]) -> dict[str, Any]:
        return dict(outputs)

    return handle


def slow_echo_factory(entry: RepositoryEntry) -> ServiceHandle:
    outputs = dict(entry.fixture_outputs)
    delay = float(entry.options.get("delay_ms", 0)) / 1000.0

    def handle(arguments: dict[str, Any]) -> dict[str, Any]:
        time.sleep(delay)
        return dict(outputs)

    return handle


class FactoryRegistry:
    def __init__(self):
        self._factories: dict[str, ServiceFactory] = {}

    def register(self, key: str, factory: ServiceFactory, *, replace: bool = False) -> None:
        if key in self._factories and not replace:
            raise ValueError(f"implementation key {key!r} already registered")
        self._factories[key] = factory

    def get(self, key: str) -> ServiceFactory:
        try:
            return self._factories[key]
        except KeyError:
            raise UnknownImplementationKey(f"no factory registered for {key!r}")

    def __contains__(self, key: str) -> bool:
        return key in self._factories

    def keys(self) -> list[str]:
        return sorted(self._factories)


def default_factories() -> FactoryRegistry:
    factories = FactoryRegistry()
    factories.register("echo", echo_factory)
    factories.register("slow_echo", slow_echo_factory)
    return factories


@dataclass(frozen=True)
class ActiveService:
    descriptor: ServiceDescriptor
    handle: ServiceHandle


class ActiveServiceTable:
    """Routing table of invokable services, read by every worker."""

    def __init__(self):
        self._lock = threading.Lock()
        self._services: dict[str, ActiveService] = {}

    def install(self, service: ActiveService) -> None:
        with self._lock:
            self._services[service.descriptor.service_name] = service

    def remove(self, service_name: str) -> None:
        with self._lock:
            self._services.pop(service_name, None)

    def get(self, service_name: str) -> Optional[ActiveService]:
        with self._lock:
            return self._services.get(service_name)

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._services)


@dataclass(frozen=True)
class Activation:
    service: ActiveService
    # True only for the caller that performed the DEACTIVATED -> ACTIVATED flip
    transitioned: bool


class ServiceRepository:
    def __init__(self, factories: FactoryRegistry, table: ActiveServiceTable):
        self.factories = factories
        self.table = table
        self._lock = threading.Lock()
        self._entries: dict[str, RepositoryEntry] = {}

    def store(self, entry: RepositoryEntry) -> None:
        with self._lock:
            self._add(entry)
        logger.info("stored dormant service %s (%s)", entry.service_name, entry.implementation_key)

    def host(self, entry: RepositoryEntry) -> None:
        """Store ``entry`` and load it straight away; start-up is not an injection."""
        with self._lock:
            self._add(entry)
            entry.handle = self._build(entry)
            entry.state = ServiceState.ACTIVATED
            self.table.install(ActiveService(entry.descriptor(), entry.handle))
        logger.info("hosting active service %s (%s)", entry.service_name, entry.implementation_key)

    def _add(self, entry: RepositoryEntry) -> None:
        if entry.service_name in self._entries:
            raise DuplicateService(f"{entry.service_name!r} already stored")
        self.factories.get(entry.implementation_key)
        entry.state = ServiceState.DEACTIVATED
        entry.handle = None
        self._entries[entry.service_name] = entry

    def _build(self, entry: RepositoryEntry) -> ServiceHandle:
        factory = self.factories.get(entry.implementation_key)
        try:
            return factory(entry)
        except Exception as e:
            logger.exception("factory %s failed for %s", entry.implementation_key, entry.service_name)
            raise InjectionFailed(f"{entry.service_name}: {e}")

    def activate(self, service_name: str) -> Activation:
        with self._lock:
            entry = self._entries.get(service_name)
            if entry is None:
                raise ServiceNotInRepository(f"{service_name!r} is not in the repository")
            if entry.state is ServiceState.ACTIVATED:
                return Activation(ActiveService(entry.descriptor(), entry.handle), False)
            handle = self._build(entry)
            entry.handle = handle
            entry.state = ServiceState.ACTIVATED
            entry.activation_events += 1
            service = ActiveService(entry.descriptor(), handle)
            self.table.install(service)
        logger.info("injected %s (activation %d)", service_name, entry.activation_events)
        return Activation(service, True)

    def inject(self, service_name: str) -> ServiceHandle:
        return self.activate(service_name).service.handle

    def deactivate(self, service_name: str) -> None:
        with self._lock:
            entry = self._entries.get(service_name)
            if entry is None:
                raise ServiceNotInRepository(f"{service_name!r} is not in the repository")
            if entry.state is not ServiceState.ACTIVATED:
                raise NotActive(f"{service_name!r} is not active")
            entry.state = ServiceState.DEACTIVATED
            entry.handle = None
            self.table.remove(service_name)
        logger.info("deactivated %s", service_name)

    def list_dormant(self) -> list[RepositoryEntry]:
        with self._lock:
            return sorted(
                (e for e in self._entries.values() if e.state is ServiceState.DEACTIVATED),
                key=lambda e: e.service_name,
            )

    def get(self, service_name: str) -> Optional[RepositoryEntry]:
        with self._lock:
            return self._entries.get(service_name)

    def hosted_descriptors(self) -> list[ServiceDescriptor]:
        with self._lock:
            return [self._entries[name].descriptor() for name in sorted(self._entries)]
