"""TCP backend: FastAPI + uvicorn on the serving side, httpx on the client side.

The transport binds the listening socket itself so that a taken port is
reported as EndpointInUse before uvicorn ever starts, then hands the socket
to a uvicorn server running on a background thread.
"""

import errno
import logging
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import httpx
import uvicorn

from errors import EndpointInUse, TransportError, TransportTimeout, Unreachable
from main import create_app
from settings import settings
from transport.base import Handler, WireRequest, WireResponse, status_from_code

logger = logging.getLogger(__name__)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port_s = endpoint.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    port = int(port_s)
    if not 1 <= port <= 65535:
        raise ValueError(f"port out of range in {endpoint!r}")
    return host, port


class HttpServerHandle:
    def __init__(self, endpoint: str, server: uvicorn.Server, sock: socket.socket):
        self.endpoint = endpoint
        self._server = server
        self._sock = sock
        self._thread = threading.Thread(
            target=server.run,
            kwargs={"sockets": [sock]},
            name=f"peer-server-{endpoint}",
            daemon=True,
        )

    def start(self, wait: float = 5.0) -> None:
        self._thread.start()
        deadline = time.monotonic() + wait
        while not self._server.started:
            if not self._thread.is_alive() or time.monotonic() > deadline:
                self._sock.close()
                raise TransportError(f"server on {self.endpoint} failed to start")
            time.sleep(0.01)

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=5.0)
        try:
            self._sock.close()
        except OSError:
            pass


class HttpTransport:
    def __init__(self, peer_id: str = "-", timeout: Optional[float] = None):
        self.peer_id = peer_id
        self.timeout = settings.CLIENT_TIMEOUT if timeout is None else timeout
        self._client = httpx.Client(headers={"Connection": "close"})
        self._pool = ThreadPoolExecutor(
            max_workers=settings.WORKER_THREADS, thread_name_prefix="gossip-send"
        )

    def serve(self, endpoint: str, handler: Handler) -> HttpServerHandle:
        host, port = parse_endpoint(endpoint)
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
            sock.listen(128)
        except OSError as e:
            sock.close()
            if e.errno == errno.EADDRINUSE:
                raise EndpointInUse(f"{endpoint} already in use")
            raise
        config = uvicorn.Config(
            create_app(handler, self.peer_id),
            lifespan="on",
            access_log=False,
            log_config=None,
            log_level=settings.log_level.lower(),
        )
        handle = HttpServerHandle(endpoint, uvicorn.Server(config), sock)
        handle.start()
        logger.info("serving on %s", endpoint)
        return handle

    def request(
        self, endpoint: str, req: WireRequest, timeout: Optional[float] = None
    ) -> WireResponse:
        url = f"http://{endpoint}{req.path}"
        try:
            reply = self._client.request(
                req.method.value,
                url,
                content=req.body if req.body else None,
                timeout=self.timeout if timeout is None else timeout,
            )
        except httpx.TimeoutException as e:
            raise TransportTimeout(f"{req.method.value} {url}: {e}")
        except httpx.TransportError as e:
            raise Unreachable(f"{req.method.value} {url}: {e}")
        return WireResponse(status_from_code(reply.status_code), reply.content)

    def send(self, endpoint: str, req: WireRequest) -> None:
        future = self._pool.submit(self.request, endpoint, req)

        def _report(f):
            exc = f.exception()
            if exc is not None:
                logger.warning("send %s to %s failed: %s", req.path, endpoint, exc)
            elif not f.result().ok:
                logger.warning("send %s to %s answered %s", req.path, endpoint, f.result().status)

        future.add_done_callback(_report)

    def close(self) -> None:
        self._pool.shutdown(wait=False)
        self._client.close()
