"""Request handling and checklist orchestration for one peer.

``Executor.handle_request`` is the single wire handler a peer serves. Each
call is one WorkerTask: the TCP backend runs every request on its own
threadpool worker, the simulator runs it inline. Composite requests are
planned against the peer's registry snapshot and executed step by step;
the client receives one aggregated document whatever the number of peers.
"""

import itertools
import logging
import threading
import uuid
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Iterator, Optional

from pydantic import BaseModel, ConfigDict, Field

from constants import ERROR_STATUS, ErrorCode, Method, ServiceState, TypeTag, WireStatus
from descriptor import Identifier, PeerId, encode_descriptor
from errors import (
    InvalidArguments,
    PeerNetError,
    PeerUnreachable,
    PlanStepUnsatisfied,
    RemoteError,
    SchemaViolation,
    ServiceFault,
    TransportError,
    UnknownService,
)
from logger import request_context, request_id as current_request_id
from overlay import Overlay
from planner import Checklist, CheckItem, CompositeRequest, KnownValues, checkpoint, plan
from registry import Registry, encode_snapshot
from repository import ActiveServiceTable, ServiceRepository
from transport.base import (
    ROUTE_GOSSIP,
    ROUTE_INVOKE,
    ROUTE_SERVICES,
    Transport,
    WireRequest,
    WireResponse,
)
from utils import canonical_dumps, encode_model, loads_document, validate_model

logger = logging.getLogger(__name__)


def new_request_id() -> str:
    return str(uuid.uuid4())


class InvocationEnvelope(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    service_name: Identifier
    arguments: dict[str, Any] = Field(default_factory=dict)
    request_id: str = Field(default_factory=new_request_id)


class InvocationResult(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    request_id: str
    service_name: Identifier
    outputs: dict[str, Any]
    # True when this call loaded the service from the repository
    injected: bool = False


class GoalValue(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: Identifier
    type_tag: TypeTag = Field(alias="type")
    value: Any


class TraceStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    provider: PeerId
    service_name: Identifier
    status: ServiceState
    outputs: dict[str, Any]


class AggregatedResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    request_id: str
    values: tuple[GoalValue, ...]
    plan_trace: tuple[TraceStep, ...] = ()

    def value_of(self, name: str) -> Any:
        for v in self.values:
            if v.name == name:
                return v.value
        raise KeyError(name)

    def peers(self) -> list[str]:
        return sorted({step.provider for step in self.plan_trace})


class ErrorDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    error: str
    detail: str
    index: Optional[int] = None
    request_id: Optional[str] = None


@dataclass
class WorkerTask:
    request_id: str
    request: WireRequest
    started_at: int
    finished_at: Optional[int] = None


def error_response(err: PeerNetError, request_id: Optional[str] = None) -> WireResponse:
    code = err.code or ErrorCode.BAD_REQUEST
    doc = ErrorDocument(error=code.value, detail=err.detail, index=err.index, request_id=request_id)
    return WireResponse(ERROR_STATUS.get(code, WireStatus.SERVER_ERROR), encode_model(doc))


class Executor:
    def __init__(
        self,
        peer_id: str,
        registry: Registry,
        repository: ServiceRepository,
        table: ActiveServiceTable,
        overlay: Overlay,
        transport: Transport,
        max_plan_len: Optional[int] = None,
    ):
        self.peer_id = peer_id
        self.registry = registry
        self.repository = repository
        self.table = table
        self.overlay = overlay
        self.transport = transport
        self.max_plan_len = max_plan_len
        self._clock = itertools.count(1)
        self._clock_lock = threading.Lock()
        self.completed = 0

    def _tick(self) -> int:
        with self._clock_lock:
            return next(self._clock)

    @contextmanager
    def worker_task(self, req: WireRequest) -> Iterator[WorkerTask]:
        rid = current_request_id.get() or uuid.uuid4().hex[:12]
        task = WorkerTask(request_id=rid, request=req, started_at=self._tick())
        with request_context(self.peer_id, rid):
            try:
                yield task
            finally:
                task.finished_at = self._tick()
                with self._clock_lock:
                    self.completed += 1

    # --- wire handler ---

    def handle_request(self, req: WireRequest) -> WireResponse:
        with self.worker_task(req) as task:
            try:
                return self._route(req)
            except PeerNetError as e:
                logger.info(
                    "%s %s failed: %s %s",
                    req.method.value,
                    req.route,
                    e.code.value if e.code else "-",
                    e.detail,
                )
                return error_response(e, task.request_id)

    def _route(self, req: WireRequest) -> WireResponse:
        route = req.route
        if req.method is Method.GET and route == ROUTE_SERVICES:
            if req.query.get("view") == ["registry"]:
                return WireResponse(WireStatus.OK, encode_snapshot(self.registry.snapshot()))
            docs = [d.model_dump(mode="json", by_alias=True) for d in self.repository.hosted_descriptors()]
            return WireResponse(WireStatus.OK, canonical_dumps(docs))
        if req.method is Method.GET and route.startswith(ROUTE_SERVICES + "/"):
            name = route[len(ROUTE_SERVICES) + 1:]
            for d in self.repository.hosted_descriptors():
                if d.service_name == name:
                    return WireResponse(WireStatus.OK, encode_descriptor(d))
            raise UnknownService(f"{name!r} is not hosted on {self.peer_id}")
        if req.method is Method.POST and route == ROUTE_INVOKE:
            return self._invoke(req.body)
        if req.method is Method.POST and route == ROUTE_GOSSIP:
            self.overlay.receive(req.body)
            return WireResponse(WireStatus.OK, b"")
        return WireResponse(
            WireStatus.NOT_FOUND,
            encode_model(ErrorDocument(error=ErrorCode.BAD_REQUEST.value, detail=f"no route {req.method.value} {route}")),
        )

    def _invoke(self, body: bytes) -> WireResponse:
        raw = loads_document(body)
        if isinstance(raw, dict) and "goals" in raw:
            composite = validate_model(CompositeRequest, raw)
            rid = composite.request_id or current_request_id.get() or new_request_id()
            try:
                response = self.orchestrate(composite.model_copy(update={"request_id": rid}))
            except PeerNetError as e:
                return error_response(e, rid)
            return WireResponse(WireStatus.OK, encode_model(response))
        if isinstance(raw, dict) and "service_name" in raw:
            envelope = validate_model(InvocationEnvelope, raw)
            try:
                result = self.invoke_local(envelope.service_name, envelope.arguments, envelope.request_id)
            except PeerNetError as e:
                return error_response(e, envelope.request_id)
            return WireResponse(WireStatus.OK, encode_model(result))
        raise SchemaViolation("invoke body needs either 'goals' or 'service_name'")

    # --- orchestration ---

    def orchestrate(self, req: CompositeRequest) -> AggregatedResponse:
        checklist = plan(self.registry.snapshot(), req, self.max_plan_len)
        logger.info(
            "plan for %s: %s",
            req.request_id,
            checklist.score.tiebreak_key or "(empty)",
        )
        return self.execute_checklist(checklist, req)

    def execute_checklist(self, checklist: Checklist, req: CompositeRequest) -> AggregatedResponse:
        rid = req.request_id or new_request_id()
        known = KnownValues.for_request(req)
        trace = []
        for index, item in enumerate(checklist.items):
            if not checkpoint(item, known):
                raise PlanStepUnsatisfied(
                    f"inputs of {item.label} are not available", index=index
                )
            arguments = known.arguments_for(item)
            if item.provider == self.peer_id:
                try:
                    result = self.invoke_local(item.service_name, arguments, rid)
                except PeerNetError as e:
                    e.index = index
                    raise
            else:
                result = self._invoke_remote(index, item, arguments, rid)
            known.record(result.outputs)
            status = ServiceState.DEACTIVATED if result.injected else ServiceState.ACTIVATED
            trace.append(
                TraceStep(
                    provider=item.provider,
                    service_name=item.service_name,
                    status=status,
                    outputs=result.outputs,
                )
            )

        values = []
        for goal in sorted(req.goals, key=lambda g: (g.name, g.type_tag.value)):
            found, value = known.goal_value(goal)
            if not found:
                raise PlanStepUnsatisfied(f"goal {goal} was not produced", index=len(checklist.items))
            values.append(GoalValue(name=goal.name, type_tag=goal.type_tag, value=value))
        return AggregatedResponse(request_id=rid, values=tuple(values), plan_trace=tuple(trace))

    def _invoke_remote(
        self, index: int, item: CheckItem, arguments: dict[str, Any], rid: str
    ) -> InvocationResult:
        envelope = InvocationEnvelope(service_name=item.service_name, arguments=arguments, request_id=rid)
        wire = WireRequest(Method.POST, ROUTE_INVOKE, encode_model(envelope))
        try:
            reply = self.transport.request(item.descriptor.endpoint, wire)
        except TransportError as e:
            raise PeerUnreachable(f"{item.provider}: {e.detail}", index=index)
        if not reply.ok:
            remote_code, detail = _read_error(reply)
            raise RemoteError(
                f"{item.label} answered {getattr(remote_code, 'value', remote_code)}: {detail}",
                index=index,
                remote_code=remote_code,
            )
        try:
            return validate_model(InvocationResult, loads_document(reply.body))
        except PeerNetError as e:
            raise RemoteError(f"{item.label} sent an unreadable result: {e.detail}", index=index)

    # --- local services ---

    def invoke_local(
        self, service_name: str, arguments: dict[str, Any], request_id: Optional[str] = None
    ) -> InvocationResult:
        rid = request_id or new_request_id()
        active = self.table.get(service_name)
        injected = False
        if active is None:
            if self.repository.get(service_name) is None:
                raise UnknownService(f"{service_name!r} is not hosted on {self.peer_id}")
            activation = self.repository.activate(service_name)
            if activation.transitioned:
                injected = True
                self.overlay.readvertise(service_name)
            active = activation.service

        expected = {p.name: p for p in active.descriptor.inputs}
        if set(arguments) != set(expected):
            raise InvalidArguments(
                f"{service_name} expects {sorted(expected)}, got {sorted(arguments)}"
            )
        for name, value in arguments.items():
            if not expected[name].accepts(value):
                raise InvalidArguments(f"{service_name}: {name}={value!r} is not a {expected[name].type_tag.value}")

        try:
            produced = active.handle(dict(arguments))
        except Exception as e:
            logger.exception("service %s raised", service_name)
            raise ServiceFault(f"{service_name}: {e}")
        if not isinstance(produced, dict):
            raise ServiceFault(f"{service_name} returned {type(produced).__name__}, not a mapping")

        outputs = {p.name: produced[p.name] for p in active.descriptor.outputs if p.name in produced}
        return InvocationResult(
            request_id=rid, service_name=service_name, outputs=outputs, injected=injected
        )


def _read_error(reply: WireResponse) -> tuple[Any, str]:
    try:
        doc = validate_model(ErrorDocument, loads_document(reply.body))
    except PeerNetError:
        return f"HTTP {int(reply.status)}", reply.body.decode("utf-8", "replace")[:200]
    try:
        return ErrorCode(doc.error), doc.detail
    except ValueError:
        return doc.error, doc.detail
