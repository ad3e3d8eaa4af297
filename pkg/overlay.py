"""Advertisement flooding over the static neighbor graph.

Each hop is charged by the receiver: an advertisement that arrives with
``hops_remaining = h`` is stored with ``h - 1`` and, when that is still
positive, forwarded with ``h - 1`` to every neighbor except the one it came
from. A peer forwards a given (origin, service, seqno) at most once.
"""

import logging
import threading
from collections import Counter
from typing import Callable, Iterable, Optional

from pydantic import BaseModel, ConfigDict

from constants import GossipOutcome, Method
from descriptor import Advertisement, PeerId, ServiceDescriptor
from errors import ConfigError, MalformedDocument, SchemaViolation, TransportError, UnknownLocalService
from registry import Registry
from settings import settings
from transport.base import ROUTE_GOSSIP, Transport, WireRequest
from utils import decode_model, encode_model

logger = logging.getLogger(__name__)

SeenKey = tuple[str, str, int]


class NeighborTable:
    def __init__(self, self_id: str, neighbors: Iterable[tuple[str, str]] = ()):
        self.self_id = self_id
        self._neighbors: dict[str, str] = {}
        for peer_id, endpoint in neighbors:
            if peer_id == self_id:
                raise ConfigError("peer lists itself as a neighbor", field="neighbors")
            if peer_id in self._neighbors:
                raise ConfigError(f"duplicate neighbor {peer_id!r}", field="neighbors")
            self._neighbors[peer_id] = endpoint

    def __len__(self) -> int:
        return len(self._neighbors)

    def __contains__(self, peer_id: str) -> bool:
        return peer_id in self._neighbors

    def items(self) -> list[tuple[str, str]]:
        return sorted(self._neighbors.items())

    def endpoint_of(self, peer_id: str) -> Optional[str]:
        return self._neighbors.get(peer_id)


class GossipMessage(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    advertisement: Advertisement
    forwarder: PeerId


class SeenSet:
    """Triples this peer has already forwarded. Only grows."""

    def __init__(self):
        self._lock = threading.Lock()
        self._seen: set[SeenKey] = set()

    def add_if_absent(self, key: SeenKey) -> bool:
        with self._lock:
            if key in self._seen:
                return False
            self._seen.add(key)
            return True

    def __contains__(self, key: SeenKey) -> bool:
        with self._lock:
            return key in self._seen

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen)


def seen_key(ad: Advertisement) -> SeenKey:
    return (ad.origin, ad.descriptor.service_name, ad.seqno)


class Overlay:
    def __init__(
        self,
        peer_id: str,
        neighbors: NeighborTable,
        registry: Registry,
        transport: Transport,
        hosted: Callable[[], list[ServiceDescriptor]],
        ttl: Optional[int] = None,
    ):
        self.peer_id = peer_id
        self.neighbors = neighbors
        self.registry = registry
        self.transport = transport
        self._hosted = hosted
        self.ttl = settings.GOSSIP_TTL if ttl is None else ttl
        self.seen = SeenSet()
        self.forwarded: Counter[SeenKey] = Counter()
        self.malformed = 0
        self._seqnos: dict[str, int] = {}
        self._advertised: dict[str, ServiceDescriptor] = {}
        self._lock = threading.Lock()

    def seqno(self, service_name: str) -> int:
        with self._lock:
            return self._seqnos.get(service_name, 0)

    def advertise_all(self, ttl: Optional[int] = None) -> list[GossipMessage]:
        ttl = self.ttl if ttl is None else ttl
        if ttl < 0:
            raise ValueError("ttl must be >= 0")
        with self._lock:
            pending = [(d, self._claim_seqno(d, bump=False)) for d in self._hosted()]
        sent = []
        for descriptor, seqno in pending:
            sent.extend(self._originate(descriptor, seqno, ttl))
        return sent

    def readvertise(self, service_name: str) -> list[GossipMessage]:
        with self._lock:
            descriptor = next(
                (d for d in self._hosted() if d.service_name == service_name), None
            )
            if descriptor is None:
                raise UnknownLocalService(f"{service_name!r} is not hosted on {self.peer_id}")
            seqno = self._claim_seqno(descriptor, bump=True)
        logger.info(
            "readvertise %s seqno=%d status=%s", service_name, seqno, descriptor.status.value
        )
        return self._originate(descriptor, seqno, self.ttl)

    def _claim_seqno(self, descriptor: ServiceDescriptor, bump: bool) -> int:
        """Seqno to send descriptor under. Caller holds _lock.

        A descriptor that differs from the last one sent always gets a fresh
        seqno, so one (service, seqno) never names two descriptors.
        """
        name = descriptor.service_name
        if name not in self._seqnos:
            seqno = 1 if bump else 0
        elif bump or self._advertised[name] != descriptor:
            seqno = self._seqnos[name] + 1
        else:
            seqno = self._seqnos[name]
        self._seqnos[name] = seqno
        self._advertised[name] = descriptor
        return seqno

    def _originate(
        self, descriptor: ServiceDescriptor, seqno: int, ttl: int
    ) -> list[GossipMessage]:
        ad = Advertisement(
            origin=self.peer_id, descriptor=descriptor, seqno=seqno, hops_remaining=ttl
        )
        self.registry.upsert(ad)
        self.seen.add_if_absent(seen_key(ad))
        msg = GossipMessage(advertisement=ad, forwarder=self.peer_id)
        return self._flood(msg, exclude=None)

    def receive(self, body: bytes) -> GossipOutcome:
        """Decode a POST /gossip body and apply it; malformed bodies are counted."""
        try:
            msg = decode_model(GossipMessage, body)
        except (MalformedDocument, SchemaViolation):
            with self._lock:
                self.malformed += 1
            logger.warning("dropped malformed gossip (%d so far)", self.malformed)
            raise
        return self.on_gossip(msg)

    def on_gossip(self, msg: GossipMessage) -> GossipOutcome:
        received = msg.advertisement
        stored = received.model_copy(
            update={"hops_remaining": max(received.hops_remaining - 1, 0)}
        )
        self.registry.upsert(stored)

        key = seen_key(stored)
        if key in self.seen:
            return GossipOutcome.DUPLICATE_DROPPED
        if stored.hops_remaining == 0:
            return GossipOutcome.ABSORBED
        if not self.seen.add_if_absent(key):
            return GossipOutcome.DUPLICATE_DROPPED

        with self._lock:
            self.forwarded[key] += 1
        self._flood(GossipMessage(advertisement=stored, forwarder=self.peer_id), exclude=msg.forwarder)
        return GossipOutcome.ABSORBED_AND_FORWARDED

    def _flood(self, msg: GossipMessage, exclude: Optional[str]) -> list[GossipMessage]:
        body = encode_model(msg)
        sent = []
        for peer_id, endpoint in self.neighbors.items():
            if peer_id == exclude:
                continue
            try:
                self.transport.send(endpoint, WireRequest(Method.POST, ROUTE_GOSSIP, body))
            except TransportError as e:
                logger.warning("gossip to %s (%s) failed: %s", peer_id, endpoint, e)
                continue
            sent.append(msg)
        return sent
