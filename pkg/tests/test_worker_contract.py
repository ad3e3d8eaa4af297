import threading
import time

import pytest

from conftest import peer_config, request, service
from peer import PeerClient, PeerNode
from scenario import free_port
from transport.http import HttpTransport

pytestmark = pytest.mark.tcp

SLOW = service("slow", [], ["slow_done:bool"], {"slow_done": True}, key="slow_echo", options={"delay_ms": 500})
FAST = service("fast", [], ["fast_done:bool"], {"fast_done": True})


@pytest.fixture
def solo_peer():
    endpoint = f"127.0.0.1:{free_port()}"
    config = peer_config("solo", active=[SLOW, FAST]).model_copy(update={"listen": endpoint})
    transport = HttpTransport("solo")
    node = PeerNode(config, transport)
    node.start(advertise=True)
    yield endpoint
    node.stop()
    transport.close()


def test_slow_request_does_not_hold_up_fast_ones(solo_peer):
    transport = HttpTransport("client", timeout=5.0)
    client = PeerClient(transport)
    timings = {}
    lock = threading.Lock()

    def timed(label, goal):
        started = time.monotonic()
        response = client.invoke(solo_peer, request({}, [goal]))
        with lock:
            timings[label] = (time.monotonic() - started, response)

    slow = threading.Thread(target=timed, args=("slow", "slow_done:bool"))
    slow.start()
    time.sleep(0.05)
    fast = [threading.Thread(target=timed, args=(f"fast{i}", "fast_done:bool")) for i in range(8)]
    for t in fast:
        t.start()
    for t in fast:
        t.join()
    slow.join()
    transport.close()

    assert len(timings) == 9
    for i in range(8):
        elapsed, response = timings[f"fast{i}"]
        assert response.value_of("fast_done") is True
        assert elapsed < 0.25, f"fast{i} took {elapsed:.3f}s"
    elapsed, response = timings["slow"]
    assert response.value_of("slow_done") is True
    assert 0.5 <= elapsed < 1.5
