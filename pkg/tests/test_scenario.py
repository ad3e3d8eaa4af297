import json

import pytest

from conftest import SCENARIOS
from errors import ConfigError
from scenario import SimulationRunner, bench_lines, load_scenario, run_bench, run_scenario


def test_order_scenario_passes(order_scenario_path):
    report = run_scenario(load_scenario(order_scenario_path))
    assert report.passed, report.lines
    assert report.lines[-1] == "scenario order passed: 9/9 assertions hold"
    assert any(
        line.startswith("event 2 invoke order at peer1: ok trace=peer1/pc_order,peer2/printer_order,peer3/router_order ")
        for line in report.lines
    )


def test_replay_is_identical(order_scenario_path):
    scenario = load_scenario(order_scenario_path)
    assert run_scenario(scenario).lines == run_scenario(scenario).lines


def test_error_event_is_reported(order_scenario_path):
    report = run_scenario(load_scenario(order_scenario_path))
    assert any(line.startswith("event 6 invoke warranty at peer1: error NO_CANDIDATE_PLAN") for line in report.lines)


def test_ring_converges():
    report = run_scenario(load_scenario(SCENARIOS / "convergence_ring.json"))
    assert report.passed
    assert "PASS ring_converged" in report.lines


def test_short_ttl_fails_named_assertion():
    report = run_scenario(load_scenario(SCENARIOS / "ttl_too_small.json"))
    assert not report.passed
    assert report.failed == ["line_converged"]
    assert "PASS neighbor_sees_a" in report.lines
    assert report.lines[-1] == "scenario ttl_too_small failed: 1/2 assertions hold"


def test_runner_keeps_responses(order_scenario_path):
    runner = SimulationRunner(load_scenario(order_scenario_path))
    runner.run()
    assert runner.responses["order"].value_of("router_delivery_date") == "2024-05-06"
    assert runner.responses["warranty"].error == "NO_CANDIDATE_PLAN"
    assert runner.nodes["peer2"].repository.get("printer_order").activation_events == 2


def scenario_text(**overrides):
    raw = {
        "name": "t",
        "peers": [{"peer_id": "a", "listen": "a"}, {"peer_id": "b", "listen": "b"}],
        "edges": [["a", "b"]],
    }
    raw.update(overrides)
    return json.dumps(raw)


class TestValidation:
    def _load(self, tmp_path, text):
        path = tmp_path / "scenario.json"
        path.write_text(text)
        return load_scenario(path)

    def test_edge_to_unknown_peer(self, tmp_path):
        with pytest.raises(ConfigError):
            self._load(tmp_path, scenario_text(edges=[["a", "z"]]))

    def test_assertion_on_unknown_invoke(self, tmp_path):
        assertions = [{"kind": "trace_peers", "name": "x", "invoke": "nope", "peers": []}]
        with pytest.raises(ConfigError):
            self._load(tmp_path, scenario_text(assertions=assertions))

    def test_unknown_event_kind(self, tmp_path):
        with pytest.raises(ConfigError):
            self._load(tmp_path, scenario_text(events=[{"kind": "partition"}]))

    def test_duplicate_peer(self, tmp_path):
        peers = [{"peer_id": "a", "listen": "a"}, {"peer_id": "a", "listen": "b"}]
        with pytest.raises(ConfigError):
            self._load(tmp_path, scenario_text(peers=peers, edges=[]))


class TestBench:
    def test_sim_backend(self, order_scenario_path):
        latencies = run_bench(load_scenario(order_scenario_path), 3, backend="sim")
        assert len(latencies) == 3 and all(ms >= 0 for ms in latencies)

    def test_runs_must_be_positive(self, order_scenario_path):
        with pytest.raises(ValueError):
            run_bench(load_scenario(order_scenario_path), 0, backend="sim")

    def test_unknown_backend(self, order_scenario_path):
        with pytest.raises(ValueError):
            run_bench(load_scenario(order_scenario_path), 1, backend="udp")

    def test_needs_an_invoke(self):
        with pytest.raises(ConfigError):
            run_bench(load_scenario(SCENARIOS / "convergence_ring.json"), 1, backend="sim")

    def test_lines(self):
        assert bench_lines([3.0, 1.0, 2.0]) == [
            "run\tlatency_ms",
            "1\t3.000",
            "2\t1.000",
            "3\t2.000",
            "min\t1.000",
            "median\t2.000",
            "max\t3.000",
        ]
