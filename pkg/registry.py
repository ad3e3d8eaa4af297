"""Per-peer cache of advertisements learned from the network.

Freshness is decided by the origin's sequence number only: one entry per
(origin, service_name), holding the highest seqno ever seen. Equal seqnos
keep whatever arrived first.
"""

import itertools
import logging
import threading
from dataclasses import dataclass
from typing import Iterator

from constants import UpsertOutcome
from descriptor import Advertisement, ParameterSpec, ServiceDescriptor, encode_descriptor, decode_descriptor
from errors import MalformedDocument
from utils import canonical_dumps, loads_document, validate_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegistryEntry:
    advertisement: Advertisement
    # logical arrival counter, not wall clock
    received_at: int

    @property
    def key(self) -> tuple[str, str]:
        return self.advertisement.key

    @property
    def descriptor(self) -> ServiceDescriptor:
        return self.advertisement.descriptor


@dataclass(frozen=True)
class RegistrySnapshot:
    entries: tuple[RegistryEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RegistryEntry]:
        return iter(self.entries)

    def get(self, origin: str, service_name: str) -> RegistryEntry | None:
        for entry in self.entries:
            if entry.key == (origin, service_name):
                return entry
        return None

    def descriptors(self) -> list[ServiceDescriptor]:
        return [e.descriptor for e in self.entries]


class Registry:
    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], RegistryEntry] = {}
        self._clock = itertools.count(1)

    def upsert(self, ad: Advertisement) -> UpsertOutcome:
        with self._lock:
            current = self._entries.get(ad.key)
            if current is not None and ad.seqno <= current.advertisement.seqno:
                return UpsertOutcome.IGNORED_STALE
            self._entries[ad.key] = RegistryEntry(ad, next(self._clock))
        if current is None:
            logger.debug("registry insert %s/%s seqno=%d", *ad.key, ad.seqno)
            return UpsertOutcome.INSERTED
        logger.debug("registry update %s/%s seqno=%d", *ad.key, ad.seqno)
        return UpsertOutcome.UPDATED

    def snapshot(self) -> RegistrySnapshot:
        with self._lock:
            entries = sorted(self._entries.values(), key=lambda e: e.key)
        return RegistrySnapshot(tuple(entries))

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def find_providers(
    snapshot: RegistrySnapshot, goal: ParameterSpec
) -> list[tuple[str, ServiceDescriptor]]:
    """All (provider, descriptor) pairs whose outputs contain ``goal`` exactly."""
    found = [
        (entry.advertisement.origin, entry.descriptor)
        for entry in snapshot
        if goal in entry.descriptor.outputs
    ]
    return sorted(found, key=lambda pair: (pair[0], pair[1].service_name))


# --- dump format: "<origin> <seqno> <canonical descriptor document>" per line ---


def dump_lines(snapshot: RegistrySnapshot) -> list[str]:
    return [
        f"{e.advertisement.origin} {e.advertisement.seqno} "
        f"{encode_descriptor(e.descriptor).decode('utf-8')}"
        for e in snapshot
    ]


def parse_dump(text: str) -> RegistrySnapshot:
    """Rebuild a snapshot from ``registry dump`` output."""
    registry = Registry()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(" ", 2)
        if len(parts) != 3:
            raise MalformedDocument(f"line {lineno}: expected 'origin seqno document'")
        origin, seqno, doc = parts
        try:
            seq = int(seqno)
        except ValueError:
            raise MalformedDocument(f"line {lineno}: bad seqno {seqno!r}")
        descriptor = decode_descriptor(doc.encode("utf-8"))
        ad = validate_model(
            Advertisement,
            {"origin": origin, "descriptor": descriptor, "seqno": seq, "hops_remaining": 0},
        )
        registry.upsert(ad)
    return registry.snapshot()


# --- wire view: GET /services?view=registry ---


def encode_snapshot(snapshot: RegistrySnapshot) -> bytes:
    return canonical_dumps(
        [e.advertisement.model_dump(mode="json", by_alias=True) for e in snapshot]
    )


def decode_snapshot(doc: bytes) -> RegistrySnapshot:
    raw = loads_document(doc)
    if not isinstance(raw, list):
        raise MalformedDocument("expected a JSON array of advertisements")
    registry = Registry()
    for item in raw:
        registry.upsert(validate_model(Advertisement, item))
    return registry.snapshot()
