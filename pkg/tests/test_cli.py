import pytest

from cli import build_request, main
from conftest import SCENARIOS
from errors import ConfigError
from scenario import load_scenario


def test_sim_run_is_byte_identical(order_scenario_path, capsys):
    assert main(["sim", "run", str(order_scenario_path)]) == 0
    first = capsys.readouterr().out
    assert main(["sim", "run", str(order_scenario_path)]) == 0
    assert capsys.readouterr().out == first
    assert first.rstrip().endswith("scenario order passed: 9/9 assertions hold")


def test_sim_run_failure_names_assertion(capsys):
    assert main(["sim", "run", str(SCENARIOS / "ttl_too_small.json")]) == 1
    out = capsys.readouterr().out
    assert "FAIL line_converged:" in out


def test_bench_sim_backend(order_scenario_path, capsys):
    code = main(["bench", "run", "--runs", "10", "--scenario", str(order_scenario_path), "--backend", "sim"])
    lines = capsys.readouterr().out.splitlines()
    assert code == 0
    assert lines[0] == "run\tlatency_ms"
    assert [line.split("\t")[0] for line in lines[1:11]] == [str(i) for i in range(1, 11)]
    assert [line.split("\t")[0] for line in lines[11:]] == ["min", "median", "max"]


def test_bench_zero_runs(order_scenario_path, capsys):
    assert main(["bench", "run", "--runs", "0", "--scenario", str(order_scenario_path)]) == 2
    assert "--runs" in capsys.readouterr().err


def test_malformed_peer_config(tmp_path, capsys):
    path = tmp_path / "peer.json"
    path.write_text('{"peer_id": "peer1",\n "listen": "127.0.0.1:8101",\n "gossip_ttl": "many"}')
    assert main(["peer", "run", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "gossip_ttl" in err and "line 3" in err


def test_missing_scenario(tmp_path, capsys):
    assert main(["sim", "run", str(tmp_path / "nope.json")]) == 2


def test_plan_explain_from_dump(tmp_path, capsys):
    dump = tmp_path / "snapshot.txt"
    dump.write_text(
        'peer1 0 {"endpoint":"peer1","inputs":[{"name":"x","type":"int"}],"outputs":[{"name":"y","type":"int"}],'
        '"provider":"peer1","service_name":"a","status":"activated","version":0}\n'
        'peer2 4 {"endpoint":"peer2","inputs":[{"name":"y","type":"int"}],"outputs":[{"name":"z","type":"int"}],'
        '"provider":"peer2","service_name":"b","status":"deactivated","version":0}\n'
    )
    code = main(["plan", "explain", "--snapshot", str(dump), "--goal", "z:int", "--input", "x:int=1"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.splitlines() == [
        "1. peer1/a (activated) <- x:int=provided",
        "2. peer2/b (deactivated) <- y:int=#1",
        "score (2, 1, 2, 'peer1/a;peer2/b')",
    ]
    assert "1 candidate checklist(s)" in captured.err


def test_plan_explain_without_plan(tmp_path, capsys):
    dump = tmp_path / "snapshot.txt"
    dump.write_text("")
    assert main(["plan", "explain", "--snapshot", str(dump), "--goal", "z:int"]) == 10
    assert "NO_CANDIDATE_PLAN" in capsys.readouterr().err


def test_bad_input_literal(capsys):
    assert main(["plan", "explain", "--snapshot", "x", "--goal", "z:int", "--input", "x:int=seven"]) == 2


@pytest.mark.parametrize("argv", [[], ["sim"], ["bench", "run"], ["nonsense"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_help(capsys):
    assert main(["--help"]) == 0


def test_build_request():
    req = build_request(["stock:int"], ["brand:string=Dell", "qty:int=2", "gift:bool=true", "price:decimal=9.5"])
    assert {p.name: p.value for p in req.provided} == {"brand": "Dell", "qty": 2, "gift": True, "price": 9.5}
    assert req.request_id


def test_scenario_loader_checks_keys(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(
        '{"name": "k", "peers": [{"peer_id": "a", "listen": "a", "active_services": '
        '[{"service_name": "s", "implementation_key": "ghost", "outputs": [{"name": "y", "type": "int"}]}]}]}'
    )
    with pytest.raises(ConfigError) as err:
        load_scenario(path)
    assert err.value.field == "active_services.0.implementation_key"
