import socket
import time

import pytest

from constants import Method, WireStatus
from errors import EndpointInUse, TransportError, TransportTimeout, Unreachable
from scenario import free_port
from transport.base import WireRequest, WireResponse
from transport.http import HttpServerHandle, HttpTransport, parse_endpoint

pytestmark = pytest.mark.tcp


def route_handler(req: WireRequest) -> WireResponse:
    if req.route == "/services":
        view = req.query.get("view", ["hosted"])[0]
        return WireResponse(WireStatus.OK, f'["{view}"]'.encode())
    if req.route == "/invoke":
        if req.body == b"slow":
            time.sleep(1.0)
        return WireResponse(WireStatus.OK, req.body)
    return WireResponse(WireStatus.NOT_FOUND, b"")


@pytest.fixture
def transport():
    t = HttpTransport("test", timeout=2.0)
    yield t
    t.close()


@pytest.fixture
def served(transport):
    endpoint = f"127.0.0.1:{free_port()}"
    handle = transport.serve(endpoint, route_handler)
    yield endpoint
    handle.stop()


class TestHttpTransport:
    def test_get_services(self, transport, served):
        reply = transport.request(served, WireRequest(Method.GET, "/services"))
        assert reply.ok and reply.body == b'["hosted"]'

    def test_query_reaches_handler(self, transport, served):
        reply = transport.request(served, WireRequest(Method.GET, "/services?view=registry"))
        assert reply.body == b'["registry"]'

    def test_post_body_round_trip(self, transport, served):
        payload = '{"k":"ünïcode"}'.encode("utf-8")
        assert transport.request(served, WireRequest(Method.POST, "/invoke", payload)).body == payload

    def test_health(self, transport, served):
        assert transport.request(served, WireRequest(Method.GET, "/health")).ok

    def test_endpoint_in_use(self, transport, served):
        with pytest.raises(EndpointInUse):
            transport.serve(served, route_handler)

    def test_server_that_never_starts(self):
        class ExitsAtOnce:
            started = False
            should_exit = False

            def run(self, sockets=None):
                return

        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        handle = HttpServerHandle("127.0.0.1:1", ExitsAtOnce(), sock)
        with pytest.raises(TransportError) as err:
            handle.start(wait=1.0)
        assert not isinstance(err.value, EndpointInUse)
        assert sock.fileno() == -1

    def test_stopped_server_refuses(self, transport):
        endpoint = f"127.0.0.1:{free_port()}"
        handle = transport.serve(endpoint, route_handler)
        handle.stop()
        with pytest.raises(Unreachable):
            transport.request(endpoint, WireRequest(Method.GET, "/services"))

    def test_timeout_leaves_server_running(self, transport, served):
        with pytest.raises(TransportTimeout):
            transport.request(served, WireRequest(Method.POST, "/invoke", b"slow"), timeout=0.2)
        assert transport.request(served, WireRequest(Method.GET, "/services")).ok

    def test_unknown_status_is_folded(self, transport, served):
        # FastAPI answers 405 for a GET on a POST-only route
        reply = transport.request(served, WireRequest(Method.GET, "/invoke"))
        assert reply.status is WireStatus.BAD_REQUEST


@pytest.mark.parametrize("bad", ["localhost", ":80", "host:0", "host:70000", "host:http"])
def test_parse_endpoint_rejects(bad):
    with pytest.raises(ValueError):
        parse_endpoint(bad)


def test_parse_endpoint():
    assert parse_endpoint("127.0.0.1:8101") == ("127.0.0.1", 8101)
