"""Deterministic in-memory network.

Peers bind handlers under plain labels. One-way sends are queued and only
delivered when the simulator is stepped; request/response calls run the
target handler inline and are charged two link latencies against the
caller's tick budget. Delivery order is (due tick, global send sequence),
which keeps every link FIFO and makes a run reproducible from its inputs.

The network is single-threaded and externally stepped. The queue is
guarded by a lock so handlers running on worker threads may still enqueue.
"""

import heapq
import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Optional

from constants import WireStatus
from errors import EndpointInUse, TransportTimeout, Unreachable
from settings import settings
from transport.base import Handler, WireRequest, WireResponse

logger = logging.getLogger(__name__)


@dataclass(order=True)
class _Pending:
    due: int
    seq: int
    src: str = field(compare=False)
    dst: str = field(compare=False)
    request: WireRequest = field(compare=False)


class SimServerHandle:
    def __init__(self, network: "SimNetwork", endpoint: str):
        self._network = network
        self.endpoint = endpoint

    def stop(self) -> None:
        self._network.unbind(self.endpoint)


class SimNetwork:
    def __init__(self, default_latency: Optional[int] = None):
        self.default_latency = (
            settings.SIM_LATENCY if default_latency is None else default_latency
        )
        self._handlers: dict[str, Handler] = {}
        self._latency: dict[tuple[str, str], int] = {}
        self._queue: list[_Pending] = []
        self._seq = itertools.count()
        self._lock = threading.Lock()
        self.now = 0
        self.delivered_total = 0

    # --- topology ---

    def bind(self, label: str, handler: Handler) -> SimServerHandle:
        with self._lock:
            if label in self._handlers:
                raise EndpointInUse(f"simulator label {label!r} already bound")
            self._handlers[label] = handler
        return SimServerHandle(self, label)

    def unbind(self, label: str) -> None:
        with self._lock:
            self._handlers.pop(label, None)

    def set_latency(self, src: str, dst: str, ticks: int) -> None:
        if ticks < 1:
            raise ValueError("link latency must be at least one tick")
        self._latency[(src, dst)] = ticks

    def latency(self, src: str, dst: str) -> int:
        return self._latency.get((src, dst), self.default_latency)

    def transport(self, label: str) -> "SimTransport":
        return SimTransport(self, label)

    # --- traffic ---

    def enqueue(self, src: str, dst: str, req: WireRequest) -> None:
        with self._lock:
            if dst not in self._handlers:
                raise Unreachable(f"no peer bound at {dst!r}")
            due = self.now + self.latency(src, dst)
            heapq.heappush(self._queue, _Pending(due, next(self._seq), src, dst, req))

    def request(
        self, src: str, dst: str, req: WireRequest, timeout_ticks: Optional[int] = None
    ) -> WireResponse:
        budget = settings.SIM_TIMEOUT_TICKS if timeout_ticks is None else timeout_ticks
        with self._lock:
            handler = self._handlers.get(dst)
        if handler is None:
            raise Unreachable(f"no peer bound at {dst!r}")
        if self.latency(src, dst) + self.latency(dst, src) > budget:
            raise TransportTimeout(f"round trip {src}->{dst} exceeds {budget} ticks")
        return _invoke(handler, req)

    @property
    def pending(self) -> int:
        with self._lock:
            return len(self._queue)

    def step(self) -> int:
        """Advance one tick and deliver everything due by then."""
        with self._lock:
            self.now += 1
            due = []
            while self._queue and self._queue[0].due <= self.now:
                due.append(heapq.heappop(self._queue))
        delivered = 0
        for item in due:
            with self._lock:
                handler = self._handlers.get(item.dst)
            if handler is None:
                logger.debug("dropped %s %s -> %s: unbound", item.request.path, item.src, item.dst)
                continue
            response = _invoke(handler, item.request)
            if not response.ok:
                logger.debug(
                    "%s %s -> %s answered %s", item.request.path, item.src, item.dst, response.status
                )
            delivered += 1
        self.delivered_total += delivered
        return delivered

    def run_to_quiescence(self, max_ticks: int = 100_000) -> int:
        delivered = 0
        for _ in range(max_ticks):
            if not self.pending:
                return delivered
            delivered += self.step()
        raise RuntimeError(f"simulator still busy after {max_ticks} ticks")


class SimTransport:
    """One peer's view of the simulated network."""

    def __init__(self, network: SimNetwork, label: str):
        self.network = network
        self.label = label

    def serve(self, endpoint: str, handler: Handler) -> SimServerHandle:
        return self.network.bind(endpoint, handler)

    def request(
        self, endpoint: str, req: WireRequest, timeout: Optional[float] = None
    ) -> WireResponse:
        ticks = None if timeout is None else int(timeout)
        return self.network.request(self.label, endpoint, req, ticks)

    def send(self, endpoint: str, req: WireRequest) -> None:
        self.network.enqueue(self.label, endpoint, req)


def _invoke(handler: Handler, req: WireRequest) -> WireResponse:
    try:
        return handler(req)
    except Exception:
        logger.exception("handler failed for %s %s", req.method.value, req.path)
        return WireResponse(WireStatus.SERVER_ERROR, b"")
