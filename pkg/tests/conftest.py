import os
import sys
from pathlib import Path

import pytest

# Make the top-level modules importable, as the scripts at the root expect
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from config import PeerConfig, ServiceConfig  # noqa: E402
from constants import ServiceState  # noqa: E402
from descriptor import ParameterSpec, ServiceDescriptor  # noqa: E402
from peer import PeerNode  # noqa: E402
from planner import CompositeRequest, ProvidedValue  # noqa: E402
from transport.simulator import SimNetwork  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
CONFIGS = ROOT / "configs"


def spec(text: str) -> ParameterSpec:
    return ParameterSpec.parse(text)


def service(name, inputs, outputs, fixtures=None, key="echo", options=None) -> ServiceConfig:
    return ServiceConfig(
        service_name=name,
        implementation_key=key,
        inputs=tuple(spec(p) for p in inputs),
        outputs=tuple(spec(p) for p in outputs),
        fixture_outputs=fixtures or {},
        options=options or {},
    )


def descriptor(provider, name, inputs, outputs, status=ServiceState.ACTIVATED) -> ServiceDescriptor:
    return ServiceDescriptor(
        service_name=name,
        inputs=tuple(spec(p) for p in inputs),
        outputs=tuple(spec(p) for p in outputs),
        status=status,
        provider=provider,
        endpoint=provider,
    )


def request(provided: dict, goals, request_id=None) -> CompositeRequest:
    """``provided`` maps "name:type" to the value."""
    values = []
    for key, value in provided.items():
        p = spec(key)
        values.append(ProvidedValue(name=p.name, type_tag=p.type_tag, value=value))
    return CompositeRequest(
        provided=tuple(values), goals=tuple(spec(g) for g in goals), request_id=request_id
    )


PC_ORDER = service(
    "pc_order",
    ["brand:string", "qty:int"],
    ["stock:int", "delivery_date:string"],
    {"stock": 12, "delivery_date": "2024-05-02"},
)
PRINTER_ORDER = service(
    "printer_order",
    ["printer_brand:string", "qty:int"],
    ["printer_stock:int", "printer_delivery_date:string"],
    {"printer_stock": 7, "printer_delivery_date": "2024-05-04"},
)
ROUTER_ORDER = service(
    "router_order",
    ["router_brand:string", "qty:int"],
    ["router_stock:int", "router_delivery_date:string"],
    {"router_stock": 3, "router_delivery_date": "2024-05-06"},
)

ORDER_GOALS = [
    "stock:int",
    "delivery_date:string",
    "printer_stock:int",
    "printer_delivery_date:string",
    "router_stock:int",
    "router_delivery_date:string",
]
ORDER_INPUTS = {
    "brand:string": "Dell",
    "printer_brand:string": "HP",
    "router_brand:string": "Cisco",
    "qty:int": 2,
}
ORDER_VALUES = {
    "stock": 12,
    "delivery_date": "2024-05-02",
    "printer_stock": 7,
    "printer_delivery_date": "2024-05-04",
    "router_stock": 3,
    "router_delivery_date": "2024-05-06",
}


class SimCluster:
    """Peers on one simulated network; edges are undirected."""

    def __init__(self, configs, edges, factories=None, latency=1):
        self.network = SimNetwork(default_latency=latency)
        adjacency = {c.peer_id: set() for c in configs}
        for a, b in edges:
            adjacency[a].add(b)
            adjacency[b].add(a)
        self.nodes = {}
        for cfg in configs:
            self.nodes[cfg.peer_id] = PeerNode(
                cfg,
                self.network.transport(cfg.listen),
                factories=factories,
                extra_neighbors=[(n, n) for n in sorted(adjacency[cfg.peer_id])],
            )

    def __getitem__(self, peer_id) -> PeerNode:
        return self.nodes[peer_id]

    def start(self, advertise=True):
        for node in self.nodes.values():
            node.start(advertise=False)
        if advertise:
            for node in self.nodes.values():
                node.overlay.advertise_all()
            self.network.run_to_quiescence()
        return self


def peer_config(peer_id, active=(), dormant=(), ttl=8) -> PeerConfig:
    return PeerConfig(
        peer_id=peer_id,
        listen=peer_id,
        gossip_ttl=ttl,
        active_services=tuple(active),
        dormant_services=tuple(dormant),
    )


def order_cluster(factories=None) -> SimCluster:
    configs = [
        peer_config("peer1", active=[PC_ORDER]),
        peer_config("peer2", dormant=[PRINTER_ORDER]),
        peer_config("peer3", dormant=[ROUTER_ORDER]),
    ]
    edges = [("peer1", "peer2"), ("peer1", "peer3"), ("peer2", "peer3")]
    return SimCluster(configs, edges, factories)


@pytest.fixture
def order_sim():
    return order_cluster().start()


@pytest.fixture
def order_scenario_path():
    return SCENARIOS / "order_scenario.json"
