#!/usr/bin/env python3
"""
Peer service network command line

Runs peer daemons, sends composite requests, inspects registries, replays
simulator scenarios and times the order scenario.

Quick Reference:
    python cli.py peer run --config configs/peer1.json
    python cli.py client invoke --to 127.0.0.1:8101 --goal stock:int --input brand:string=Dell --input qty:int=2
    python cli.py registry dump --to 127.0.0.1:8101 > snapshot.txt
    python cli.py plan explain --snapshot snapshot.txt --goal stock:int --input brand:string=Dell --input qty:int=2
    python cli.py sim run scenarios/order_scenario.json
    python cli.py bench run --runs 10 --scenario scenarios/order_scenario.json

Exit codes:
    0 success, 1 scenario assertion failed, 2 usage or config error,
    10 NO_CANDIDATE_PLAN, 11 PLAN_STEP_UNSATISFIED, 12 PEER_UNREACHABLE,
    13 REMOTE_ERROR, 14 UNKNOWN_SERVICE, 15 INJECTION_FAILED,
    16 SERVICE_FAULT, 17 BAD_REQUEST
"""

import argparse
import signal
import sys
import threading
import uuid
from pathlib import Path
from typing import Optional

from config import PeerConfig, load_peer_config
from constants import EXIT_ASSERTION_FAILED, EXIT_CODES, EXIT_OK, EXIT_USAGE
from descriptor import ParameterSpec, parse_literal
from errors import ConfigError, PeerNetError
from peer import PeerClient, PeerNode
from planner import CompositeRequest, ProvidedValue, enumerate_checklists, explain, select_checklist
from registry import dump_lines, parse_dump
from scenario import bench_lines, load_scenario, run_bench, run_scenario
from settings import settings
from transport.http import HttpTransport, parse_endpoint
from utils import encode_model


class UsageError(Exception):
    pass


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def build_request(goals: list[str], inputs: list[str]) -> CompositeRequest:
    """Turn ``--goal name:type`` and ``--input name:type=value`` flags into a request."""
    try:
        goal_specs = [ParameterSpec.parse(g) for g in goals]
        provided = []
        for item in inputs:
            spec_text, sep, literal = item.partition("=")
            if not sep:
                raise ValueError(f"--input needs name:type=value, got {item!r}")
            spec = ParameterSpec.parse(spec_text)
            provided.append(
                ProvidedValue(name=spec.name, type_tag=spec.type_tag, value=parse_literal(spec.type_tag, literal))
            )
        return CompositeRequest(provided=tuple(provided), goals=tuple(goal_specs), request_id=str(uuid.uuid4()))
    except ValueError as e:
        raise UsageError(str(e))


def _check_endpoint(endpoint: str) -> str:
    try:
        parse_endpoint(endpoint)
    except ValueError as e:
        raise UsageError(str(e))
    return endpoint


def serve_peer(config: PeerConfig, stop: threading.Event) -> None:
    """Run one TCP peer until ``stop`` is set."""
    transport = HttpTransport(config.peer_id)
    node = PeerNode(config, transport)
    node.start(advertise=True, periodic=True)
    try:
        while not stop.wait(0.5):
            pass
    finally:
        node.stop()
        transport.close()


def cmd_peer_run(args) -> int:
    config = load_peer_config(args.config)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        serve_peer(config, stop)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_client_invoke(args) -> int:
    req = build_request(args.goal, args.input or [])
    transport = HttpTransport("client", timeout=args.timeout)
    try:
        response = PeerClient(transport).invoke(_check_endpoint(args.to), req)
    finally:
        transport.close()
    print(encode_model(response).decode())
    for k, step in enumerate(response.plan_trace, start=1):
        _err(f"{k}. {step.provider}/{step.service_name} ({step.status.value})")
    return EXIT_OK


def cmd_registry_dump(args) -> int:
    transport = HttpTransport("client", timeout=args.timeout)
    try:
        snapshot = PeerClient(transport).registry(_check_endpoint(args.to))
    finally:
        transport.close()
    for line in dump_lines(snapshot):
        print(line)
    _err(f"{len(snapshot)} entr{'y' if len(snapshot) == 1 else 'ies'} from {args.to}")
    return EXIT_OK


def cmd_plan_explain(args) -> int:
    try:
        text = Path(args.snapshot).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {args.snapshot}: {e.strerror}")
    snapshot = parse_dump(text)
    req = build_request(args.goal, args.input or [])
    max_len = settings.MAX_PLAN_LEN if args.max_len is None else args.max_len
    if max_len < 0:
        raise UsageError("--max-len must be >= 0")
    candidates = enumerate_checklists(snapshot, req, max_len)
    chosen = select_checklist(candidates)
    for line in explain(chosen):
        print(line)
    _err(f"{len(candidates)} candidate checklist(s)")
    return EXIT_OK


def cmd_sim_run(args) -> int:
    report = run_scenario(load_scenario(args.scenario))
    for line in report.lines:
        print(line)
    return EXIT_OK if report.passed else EXIT_ASSERTION_FAILED


def cmd_bench_run(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    scenario = load_scenario(args.scenario)
    for line in bench_lines(run_bench(scenario, args.runs, backend=args.backend)):
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peernet",
        description="Peer service network",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    groups = parser.add_subparsers(dest="group", help="Available command groups")

    # peer run
    peer_parser = groups.add_parser("peer", help="Run a peer daemon")
    peer_cmds = peer_parser.add_subparsers(dest="command")
    run_parser = peer_cmds.add_parser("run", help="Serve a peer until terminated")
    run_parser.add_argument("--config", required=True, help="Peer config JSON file")
    run_parser.set_defaults(handler=cmd_peer_run)

    # client invoke
    client_parser = groups.add_parser("client", help="Send requests to a peer")
    client_cmds = client_parser.add_subparsers(dest="command")
    invoke_parser = client_cmds.add_parser("invoke", help="Send a composite request")
    invoke_parser.add_argument("--to", required=True, help="Orchestrating peer host:port")
    invoke_parser.add_argument("--goal", action="append", required=True, help="Goal as name:type (repeatable)")
    invoke_parser.add_argument("--input", action="append", help="Input as name:type=value (repeatable)")
    invoke_parser.add_argument("--timeout", type=float, default=None, help="Client timeout in seconds")
    invoke_parser.set_defaults(handler=cmd_client_invoke)

    # registry dump
    registry_parser = groups.add_parser("registry", help="Inspect a peer's registry")
    registry_cmds = registry_parser.add_subparsers(dest="command")
    dump_parser = registry_cmds.add_parser("dump", help="Print 'origin seqno descriptor' lines")
    dump_parser.add_argument("--to", required=True, help="Peer host:port")
    dump_parser.add_argument("--timeout", type=float, default=None, help="Client timeout in seconds")
    dump_parser.set_defaults(handler=cmd_registry_dump)

    # plan explain
    plan_parser = groups.add_parser("plan", help="Plan locally against a dumped registry")
    plan_cmds = plan_parser.add_subparsers(dest="command")
    explain_parser = plan_cmds.add_parser("explain", help="Show the selected checklist")
    explain_parser.add_argument("--snapshot", required=True, help="File written by 'registry dump'")
    explain_parser.add_argument("--goal", action="append", required=True, help="Goal as name:type (repeatable)")
    explain_parser.add_argument("--input", action="append", help="Input as name:type=value (repeatable)")
    explain_parser.add_argument("--max-len", type=int, default=None, help="Longest checklist considered")
    explain_parser.set_defaults(handler=cmd_plan_explain)

    # sim run
    sim_parser = groups.add_parser("sim", help="Deterministic simulator")
    sim_cmds = sim_parser.add_subparsers(dest="command")
    sim_run_parser = sim_cmds.add_parser("run", help="Replay a scenario file")
    sim_run_parser.add_argument("scenario", help="Scenario JSON file")
    sim_run_parser.set_defaults(handler=cmd_sim_run)

    # bench run
    bench_parser = groups.add_parser("bench", help="Latency bench")
    bench_cmds = bench_parser.add_subparsers(dest="command")
    bench_run_parser = bench_cmds.add_parser("run", help="Time the scenario's first request")
    bench_run_parser.add_argument("--runs", type=int, required=True, help="Number of runs (>= 1)")
    bench_run_parser.add_argument("--scenario", required=True, help="Scenario JSON file")
    bench_run_parser.add_argument("--backend", choices=["tcp", "sim"], default="tcp", help="Transport (default: tcp)")
    bench_run_parser.set_defaults(handler=cmd_bench_run)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    try:
        return handler(args)
    except UsageError as e:
        _err(f"usage error: {e}")
        return EXIT_USAGE
    except ConfigError as e:
        _err(f"config error: {e.detail}")
        return EXIT_USAGE
    except PeerNetError as e:
        where = "" if e.index is None else f" at step {e.index}"
        code = e.code.value if e.code else "ERROR"
        _err(f"{code}{where}: {e.detail}")
        return EXIT_CODES.get(e.code, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
