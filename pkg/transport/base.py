from dataclasses import dataclass
from typing import Callable, Optional, Protocol
from urllib.parse import parse_qs, urlsplit

from constants import Method, WireStatus

ROUTE_SERVICES = "/services"
ROUTE_INVOKE = "/invoke"
ROUTE_GOSSIP = "/gossip"


@dataclass(frozen=True)
class WireRequest:
    method: Method
    path: str
    body: bytes = b""

    @property
    def route(self) -> str:
        return urlsplit(self.path).path

    @property
    def query(self) -> dict[str, list[str]]:
        return parse_qs(urlsplit(self.path).query)


@dataclass(frozen=True)
class WireResponse:
    status: WireStatus
    body: bytes = b""

    @property
    def ok(self) -> bool:
        return self.status is WireStatus.OK


Handler = Callable[[WireRequest], WireResponse]


class ServerHandle(Protocol):
    endpoint: str

    def stop(self) -> None: ...


class Transport(Protocol):
    """What a peer needs from the wire, whichever backend carries it."""

    def serve(self, endpoint: str, handler: Handler) -> ServerHandle: ...

    def request(
        self, endpoint: str, req: WireRequest, timeout: Optional[float] = None
    ) -> WireResponse: ...

    def send(self, endpoint: str, req: WireRequest) -> None:
        """One-way delivery; the response is discarded."""
        ...


def status_from_code(code: int) -> WireStatus:
    """Fold an arbitrary HTTP status into the four the protocol knows."""
    try:
        return WireStatus(code)
    except ValueError:
        return WireStatus.SERVER_ERROR if code >= 500 else WireStatus.BAD_REQUEST
