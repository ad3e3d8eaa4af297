import logging
import threading
from typing import Iterable, Optional

from config import PeerConfig
from constants import ErrorCode, Method
from descriptor import ServiceDescriptor, decode_descriptor_list
from errors import (
    InjectionFailed,
    NoCandidatePlan,
    PeerNetError,
    PeerUnreachable,
    PlanStepUnsatisfied,
    RemoteError,
    SchemaViolation,
    ServiceFault,
    UnknownService,
)
from executor import AggregatedResponse, ErrorDocument, Executor
from overlay import NeighborTable, Overlay
from planner import CompositeRequest
from registry import Registry, RegistrySnapshot, decode_snapshot
from repository import ActiveServiceTable, FactoryRegistry, ServiceRepository, default_factories
from transport.base import ROUTE_INVOKE, ROUTE_SERVICES, ServerHandle, Transport, WireRequest, WireResponse
from utils import encode_model, loads_document, validate_model

logger = logging.getLogger(__name__)


class PeerNode:
    """One peer: registry, repository, overlay and executor behind one endpoint."""

    def __init__(
        self,
        config: PeerConfig,
        transport: Transport,
        factories: Optional[FactoryRegistry] = None,
        extra_neighbors: Iterable[tuple[str, str]] = (),
    ):
        self.config = config
        self.peer_id = config.peer_id
        self.endpoint = config.listen
        self.transport = transport

        self.registry = Registry()
        self.table = ActiveServiceTable()
        self.repository = ServiceRepository(factories or default_factories(), self.table)
        neighbors = [(n.peer_id, n.endpoint) for n in config.neighbors]
        neighbors += [n for n in extra_neighbors if n[0] not in {p for p, _ in neighbors}]
        self.neighbors = NeighborTable(self.peer_id, neighbors)
        self.overlay = Overlay(
            self.peer_id,
            self.neighbors,
            self.registry,
            transport,
            self.repository.hosted_descriptors,
            ttl=config.gossip_ttl,
        )
        self.executor = Executor(
            self.peer_id, self.registry, self.repository, self.table, self.overlay, transport
        )

        for svc in config.active_services:
            self.repository.host(svc.entry(self.peer_id, self.endpoint))
        for svc in config.dormant_services:
            self.repository.store(svc.entry(self.peer_id, self.endpoint))

        self._server: Optional[ServerHandle] = None
        self._stop = threading.Event()
        self._ticker: Optional[threading.Thread] = None

    def start(self, advertise: bool = True, periodic: bool = False) -> None:
        self._server = self.transport.serve(self.endpoint, self.executor.handle_request)
        logger.info(
            "peer %s up on %s with %d service(s), %d neighbor(s)",
            self.peer_id,
            self.endpoint,
            len(self.repository.hosted_descriptors()),
            len(self.neighbors),
        )
        if advertise:
            self.overlay.advertise_all()
        if periodic:
            self._stop.clear()
            self._ticker = threading.Thread(
                target=self._readvertise_loop, name=f"readvertise-{self.peer_id}", daemon=True
            )
            self._ticker.start()

    def _readvertise_loop(self) -> None:
        while not self._stop.wait(self.config.readvertise_period):
            try:
                self.overlay.advertise_all()
            except Exception:
                logger.exception("periodic advertisement failed")

    def stop(self) -> None:
        self._stop.set()
        if self._ticker is not None:
            self._ticker.join(timeout=2.0)
            self._ticker = None
        if self._server is not None:
            self._server.stop()
            self._server = None
        logger.info("peer %s stopped", self.peer_id)

    def deactivate(self, service_name: str) -> None:
        self.repository.deactivate(service_name)
        self.overlay.readvertise(service_name)

    def hosted(self) -> list[ServiceDescriptor]:
        return self.repository.hosted_descriptors()


class PeerClient:
    """Client side of the peer protocol, used by the CLI and the bench."""

    def __init__(self, transport: Transport, timeout: Optional[float] = None):
        self.transport = transport
        self.timeout = timeout

    def _call(self, endpoint: str, req: WireRequest) -> WireResponse:
        try:
            return self.transport.request(endpoint, req, self.timeout)
        except PeerNetError as e:
            raise PeerUnreachable(f"{endpoint}: {e.detail}")

    def services(self, endpoint: str) -> list[ServiceDescriptor]:
        reply = self._call(endpoint, WireRequest(Method.GET, ROUTE_SERVICES))
        _raise_for_error(reply)
        return decode_descriptor_list(reply.body)

    def registry(self, endpoint: str) -> RegistrySnapshot:
        reply = self._call(endpoint, WireRequest(Method.GET, f"{ROUTE_SERVICES}?view=registry"))
        _raise_for_error(reply)
        return decode_snapshot(reply.body)

    def invoke(self, endpoint: str, req: CompositeRequest) -> AggregatedResponse:
        reply = self._call(endpoint, WireRequest(Method.POST, ROUTE_INVOKE, encode_model(req)))
        _raise_for_error(reply)
        return validate_model(AggregatedResponse, loads_document(reply.body))


# Error documents coming back to a client are re-raised as the matching local error.
_ERRORS_BY_CODE = {
    ErrorCode.UNKNOWN_SERVICE: UnknownService,
    ErrorCode.PLAN_STEP_UNSATISFIED: PlanStepUnsatisfied,
    ErrorCode.PEER_UNREACHABLE: PeerUnreachable,
    ErrorCode.INJECTION_FAILED: InjectionFailed,
    ErrorCode.SERVICE_FAULT: ServiceFault,
    ErrorCode.NO_CANDIDATE_PLAN: NoCandidatePlan,
    ErrorCode.BAD_REQUEST: SchemaViolation,
}


def _raise_for_error(reply: WireResponse) -> None:
    if reply.ok:
        return
    try:
        doc = validate_model(ErrorDocument, loads_document(reply.body))
    except PeerNetError:
        raise RemoteError(f"peer answered {int(reply.status)} without an error document")
    try:
        code = ErrorCode(doc.error)
    except ValueError:
        raise RemoteError(f"{doc.error}: {doc.detail}")
    if code is ErrorCode.REMOTE_ERROR:
        raise RemoteError(doc.detail, index=doc.index)
    raise _ERRORS_BY_CODE[code](doc.detail, index=doc.index)
