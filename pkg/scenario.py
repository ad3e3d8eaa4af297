"""Scripted scenarios: deterministic simulator runs, a TCP loopback cluster
and the latency bench.

A scenario file lists peer configs (``listen`` is the simulator label),
undirected ``edges``, ordered ``events`` and named ``assertions``. The
simulator runs to quiescence after every event, so a run's output depends
only on the file.
"""

import logging
import socket
import statistics
import time
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import PeerConfig, check_implementation_keys, parse_document
from constants import ErrorCode, Method, ServiceState
from descriptor import Identifier, PeerId
from errors import ConfigError
from executor import AggregatedResponse, ErrorDocument
from peer import PeerClient, PeerNode
from planner import CompositeRequest
from repository import FactoryRegistry, default_factories
from transport.base import ROUTE_INVOKE, WireRequest
from transport.http import HttpTransport
from transport.simulator import SimNetwork
from utils import encode_model, loads_document, validate_model

logger = logging.getLogger(__name__)


# --- events ---


class AdvertiseEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["advertise"]
    # None: every peer, in file order
    peer: Optional[PeerId] = None


class ReadvertiseEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["readvertise"]
    peer: PeerId
    service_name: Identifier


class DeactivateEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["deactivate"]
    peer: PeerId
    service_name: Identifier


class InvokeEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["invoke"]
    name: Identifier
    peer: PeerId
    request: CompositeRequest


Event = Annotated[
    Union[AdvertiseEvent, ReadvertiseEvent, DeactivateEvent, InvokeEvent],
    Field(discriminator="kind"),
]


# --- assertions ---


class ConvergedAssertion(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["converged"]
    name: str


class RegistryStatusAssertion(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["registry_status"]
    name: str
    origin: PeerId
    service_name: Identifier
    status: ServiceState
    seqno: Optional[int] = None
    # None: every peer
    peers: Optional[tuple[PeerId, ...]] = None


class ResponseValuesAssertion(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["response_values"]
    name: str
    invoke: Identifier
    values: dict[str, Any]


class ResponseErrorAssertion(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["response_error"]
    name: str
    invoke: Identifier
    error: ErrorCode
    index: Optional[int] = None


class TracePeersAssertion(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["trace_peers"]
    name: str
    invoke: Identifier
    peers: tuple[PeerId, ...]


Assertion = Annotated[
    Union[
        ConvergedAssertion,
        RegistryStatusAssertion,
        ResponseValuesAssertion,
        ResponseErrorAssertion,
        TracePeersAssertion,
    ],
    Field(discriminator="kind"),
]


class ScenarioFile(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    peers: tuple[PeerConfig, ...] = Field(min_length=1)
    edges: tuple[tuple[PeerId, PeerId], ...] = ()
    latency: int = Field(default=1, ge=1)
    events: tuple[Event, ...] = ()
    assertions: tuple[Assertion, ...] = ()

    @model_validator(mode="after")
    def _references(self):
        ids = [p.peer_id for p in self.peers]
        if len(ids) != len(set(ids)):
            raise ValueError("peer ids must be unique within a scenario")
        known = set(ids)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge {a}-{b} references an undefined peer")
            if a == b:
                raise ValueError(f"edge {a}-{b} is a self-loop")
        invokes = set()
        for event in self.events:
            peer = getattr(event, "peer", None)
            if peer is not None and peer not in known:
                raise ValueError(f"event references undefined peer {peer!r}")
            if isinstance(event, InvokeEvent):
                if event.name in invokes:
                    raise ValueError(f"invoke name {event.name!r} used twice")
                invokes.add(event.name)
        names = [a.name for a in self.assertions]
        if len(names) != len(set(names)):
            raise ValueError("assertion names must be unique")
        for assertion in self.assertions:
            ref = getattr(assertion, "invoke", None)
            if ref is not None and ref not in invokes:
                raise ValueError(f"assertion {assertion.name!r} refers to unknown invoke {ref!r}")
        return self

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, set[str]] = {p.peer_id: set() for p in self.peers}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return {k: sorted(v) for k, v in adj.items()}

    def first_invoke(self) -> InvokeEvent:
        for event in self.events:
            if isinstance(event, InvokeEvent):
                return event
        raise ConfigError("scenario has no invoke event", field="events")


def load_scenario(path: str | Path, factories: Optional[FactoryRegistry] = None) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    scenario = parse_document(ScenarioFile, text, str(path))
    for peer in scenario.peers:
        check_implementation_keys(peer, factories or default_factories())
    return scenario


def _neighbors(scenario: ScenarioFile, endpoints: dict[str, str]) -> dict[str, list[tuple[str, str]]]:
    return {
        peer_id: [(n, endpoints[n]) for n in adjacent]
        for peer_id, adjacent in scenario.adjacency().items()
    }


# --- simulator runs ---


class ScenarioReport:
    def __init__(self, name: str):
        self.name = name
        self.lines: list[str] = []
        self.failed: list[str] = []
        self.total = 0

    @property
    def passed(self) -> bool:
        return not self.failed

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.total += 1
        if ok:
            self.lines.append(f"PASS {name}")
        else:
            self.failed.append(name)
            self.lines.append(f"FAIL {name}: {detail}")

    def summary(self) -> str:
        verdict = "passed" if self.passed else "failed"
        return f"scenario {self.name} {verdict}: {self.total - len(self.failed)}/{self.total} assertions hold"


class SimulationRunner:
    def __init__(self, scenario: ScenarioFile, factories: Optional[FactoryRegistry] = None):
        self.scenario = scenario
        self.network = SimNetwork(default_latency=scenario.latency)
        endpoints = {p.peer_id: p.listen for p in scenario.peers}
        neighbors = _neighbors(scenario, endpoints)
        self.nodes: dict[str, PeerNode] = {}
        for cfg in scenario.peers:
            self.nodes[cfg.peer_id] = PeerNode(
                cfg,
                self.network.transport(cfg.listen),
                factories=factories,
                extra_neighbors=neighbors[cfg.peer_id],
            )
        # invoke name -> AggregatedResponse or ErrorDocument
        self.responses: dict[str, AggregatedResponse | ErrorDocument] = {}

    def start(self) -> None:
        for node in self.nodes.values():
            node.start(advertise=False)

    def run(self) -> ScenarioReport:
        report = ScenarioReport(self.scenario.name)
        self.start()
        for i, event in enumerate(self.scenario.events, start=1):
            text = self.apply(event)
            delivered = self.network.run_to_quiescence()
            report.lines.append(f"event {i} {text} delivered={delivered}")
        for assertion in self.scenario.assertions:
            ok, detail = self.evaluate(assertion)
            report.check(assertion.name, ok, detail)
        report.lines.append(report.summary())
        return report

    def apply(self, event) -> str:
        if isinstance(event, AdvertiseEvent):
            targets = [event.peer] if event.peer else list(self.nodes)
            sent = sum(len(self.nodes[p].overlay.advertise_all()) for p in targets)
            return f"advertise {event.peer or 'all'} sent={sent}"
        if isinstance(event, ReadvertiseEvent):
            overlay = self.nodes[event.peer].overlay
            overlay.readvertise(event.service_name)
            return f"readvertise {event.peer}/{event.service_name} seqno={overlay.seqno(event.service_name)}"
        if isinstance(event, DeactivateEvent):
            self.nodes[event.peer].deactivate(event.service_name)
            return f"deactivate {event.peer}/{event.service_name}"
        return self._invoke(event)

    def _invoke(self, event: InvokeEvent) -> str:
        node = self.nodes[event.peer]
        req = event.request
        if req.request_id is None:
            req = req.model_copy(update={"request_id": f"{self.scenario.name}-{event.name}"})
        reply = node.executor.handle_request(WireRequest(Method.POST, ROUTE_INVOKE, encode_model(req)))
        doc = loads_document(reply.body)
        if reply.ok:
            response = validate_model(AggregatedResponse, doc)
            self.responses[event.name] = response
            trace = ",".join(f"{s.provider}/{s.service_name}" for s in response.plan_trace) or "-"
            return f"invoke {event.name} at {event.peer}: ok trace={trace}"
        error = validate_model(ErrorDocument, doc)
        self.responses[event.name] = error
        where = "" if error.index is None else f" index={error.index}"
        return f"invoke {event.name} at {event.peer}: error {error.error}{where}"

    # --- assertion checks ---

    def evaluate(self, assertion) -> tuple[bool, str]:
        if isinstance(assertion, ConvergedAssertion):
            return self._converged()
        if isinstance(assertion, RegistryStatusAssertion):
            return self._registry_status(assertion)
        response = self.responses.get(assertion.invoke)
        if response is None:
            return False, f"invoke {assertion.invoke!r} never ran"
        if isinstance(assertion, ResponseErrorAssertion):
            if not isinstance(response, ErrorDocument):
                return False, "request succeeded"
            if response.error != assertion.error.value:
                return False, f"got {response.error}"
            if assertion.index is not None and response.index != assertion.index:
                return False, f"failed at index {response.index}"
            return True, ""
        if not isinstance(response, AggregatedResponse):
            return False, f"request failed with {response.error}"
        if isinstance(assertion, ResponseValuesAssertion):
            got = {v.name: v.value for v in response.values}
            wrong = sorted(k for k, v in assertion.values.items() if got.get(k, _MISSING) != v)
            return (not wrong, f"mismatched {', '.join(wrong)}")
        peers = response.peers()
        return peers == sorted(assertion.peers), f"trace spans {peers}"

    def _converged(self) -> tuple[bool, str]:
        expected = {}
        for node in self.nodes.values():
            for d in node.hosted():
                expected[(node.peer_id, d.service_name)] = node.overlay.seqno(d.service_name)
        for peer_id, node in self.nodes.items():
            snapshot = node.registry.snapshot()
            for (origin, service), seqno in sorted(expected.items()):
                entry = snapshot.get(origin, service)
                if entry is None:
                    return False, f"{peer_id} lacks {origin}/{service}"
                if entry.advertisement.seqno != seqno:
                    return False, f"{peer_id} holds {origin}/{service} seqno {entry.advertisement.seqno}, want {seqno}"
            over = [k for k, n in node.overlay.forwarded.items() if n > 1]
            if over:
                return False, f"{peer_id} forwarded {over[0]} more than once"
        return True, ""

    def _registry_status(self, a: RegistryStatusAssertion) -> tuple[bool, str]:
        for peer_id in a.peers or sorted(self.nodes):
            entry = self.nodes[peer_id].registry.snapshot().get(a.origin, a.service_name)
            if entry is None:
                return False, f"{peer_id} lacks {a.origin}/{a.service_name}"
            if entry.descriptor.status is not a.status:
                return False, f"{peer_id} sees {entry.descriptor.status.value}"
            if a.seqno is not None and entry.advertisement.seqno != a.seqno:
                return False, f"{peer_id} holds seqno {entry.advertisement.seqno}"
        return True, ""


_MISSING = object()


def run_scenario(scenario: ScenarioFile, factories: Optional[FactoryRegistry] = None) -> ScenarioReport:
    return SimulationRunner(scenario, factories).run()


# --- TCP loopback ---


def free_port(host: str = "127.0.0.1") -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind((host, 0))
        return s.getsockname()[1]


class LoopbackCluster:
    """The scenario's peers as real TCP daemons on ephemeral 127.0.0.1 ports."""

    def __init__(self, scenario: ScenarioFile, factories: Optional[FactoryRegistry] = None):
        self.scenario = scenario
        self.endpoints = {p.peer_id: f"127.0.0.1:{free_port()}" for p in scenario.peers}
        neighbors = _neighbors(scenario, self.endpoints)
        self.nodes: dict[str, PeerNode] = {}
        for cfg in scenario.peers:
            cfg = cfg.model_copy(update={"listen": self.endpoints[cfg.peer_id], "neighbors": ()})
            self.nodes[cfg.peer_id] = PeerNode(
                cfg,
                HttpTransport(cfg.peer_id),
                factories=factories,
                extra_neighbors=neighbors[cfg.peer_id],
            )

    def __enter__(self) -> "LoopbackCluster":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def start(self, wait: float = 5.0) -> None:
        for node in self.nodes.values():
            node.start(advertise=False)
        for node in self.nodes.values():
            node.overlay.advertise_all()
        if not self.wait_converged(wait):
            logger.warning("cluster %s did not converge within %.1fs", self.scenario.name, wait)

    def wait_converged(self, timeout: float) -> bool:
        expected = {
            (node.peer_id, d.service_name) for node in self.nodes.values() for d in node.hosted()
        }
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if all(
                expected <= {e.key for e in node.registry.snapshot()} for node in self.nodes.values()
            ):
                return True
            time.sleep(0.02)
        return False

    def stop(self) -> None:
        for node in self.nodes.values():
            node.stop()
            node.transport.close()


# --- bench ---


def run_bench(
    scenario: ScenarioFile,
    runs: int,
    backend: str = "tcp",
    factories: Optional[FactoryRegistry] = None,
) -> list[float]:
    """Latency in milliseconds of the scenario's first invoke, ``runs`` times."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    event = scenario.first_invoke()
    latencies = []
    if backend == "sim":
        runner = SimulationRunner(scenario, factories)
        runner.start()
        runner.apply(AdvertiseEvent(kind="advertise"))
        runner.network.run_to_quiescence()
        node = runner.nodes[event.peer]
        for _ in range(runs):
            started = time.perf_counter()
            node.executor.orchestrate(event.request)
            runner.network.run_to_quiescence()
            latencies.append((time.perf_counter() - started) * 1000.0)
        return latencies
    if backend != "tcp":
        raise ValueError(f"unknown backend {backend!r}")

    with LoopbackCluster(scenario, factories) as cluster:
        client_transport = HttpTransport("bench")
        client = PeerClient(client_transport)
        try:
            for _ in range(runs):
                started = time.perf_counter()
                client.invoke(cluster.endpoints[event.peer], event.request)
                latencies.append((time.perf_counter() - started) * 1000.0)
        finally:
            client_transport.close()
    return latencies


def bench_lines(latencies: list[float]) -> list[str]:
    lines = ["run\tlatency_ms"]
    lines += [f"{i}\t{ms:.3f}" for i, ms in enumerate(latencies, start=1)]
    lines.append(f"min\t{min(latencies):.3f}")
    lines.append(f"median\t{statistics.median(latencies):.3f}")
    lines.append(f"max\t{max(latencies):.3f}")
    return lines
