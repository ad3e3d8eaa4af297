import itertools
import random

import pytest
from pydantic import ValidationError

from conftest import ORDER_GOALS, ORDER_INPUTS, PC_ORDER, PRINTER_ORDER, ROUTER_ORDER, descriptor, request, spec
from constants import ServiceState, TypeTag
from descriptor import Advertisement, ParameterSpec, ServiceDescriptor, applicable
from errors import NoCandidatePlan
from planner import (
    Binding,
    CheckItem,
    KnownValues,
    PlanScore,
    build_checklist,
    checkpoint,
    enumerate_checklists,
    explain,
    plan,
    score_items,
    select_checklist,
)
from registry import Registry

A = ServiceState.ACTIVATED
D = ServiceState.DEACTIVATED


def snapshot_of(descriptors, order=None):
    registry = Registry()
    for d in order or descriptors:
        registry.upsert(Advertisement(origin=d.provider, descriptor=d, seqno=0, hops_remaining=0))
    return registry.snapshot()


def order_snapshot():
    return snapshot_of(
        [
            PC_ORDER.descriptor("peer1", "peer1").with_status(A),
            PRINTER_ORDER.descriptor("peer2", "peer2"),
            ROUTER_ORDER.descriptor("peer3", "peer3"),
        ]
    )


CHAIN = [
    descriptor("peer1", "a", ["x:int"], ["y:int"]),
    descriptor("peer2", "b", ["y:int"], ["z:int"]),
]


class TestRequest:
    def test_value_must_conform(self):
        with pytest.raises(ValidationError):
            request({"qty:int": "two"}, ["stock:int"])

    def test_goals_required(self):
        with pytest.raises(ValidationError):
            request({}, [])

    def test_duplicate_provided(self):
        with pytest.raises(ValidationError):
            request({"qty:int": 1, "qty:string": "1"}, ["stock:int"])


class TestEnumerate:
    def test_goal_already_provided(self):
        found = enumerate_checklists(order_snapshot(), request({"qty:int": 2}, ["qty:int"]), 5)
        assert len(found) == 1
        assert found[0].items == ()
        assert found[0].score == PlanScore(0, 0, 0, "")

    def test_order_fixture_all_orders(self):
        found = enumerate_checklists(order_snapshot(), request(ORDER_INPUTS, ORDER_GOALS), 5)
        assert len(found) == 6
        orders = {tuple(item.service_name for item in c.items) for c in found}
        assert orders == set(itertools.permutations(["pc_order", "printer_order", "router_order"]))

    def test_chain(self):
        found = enumerate_checklists(snapshot_of(CHAIN), request({"x:int": 1}, ["z:int"]), 2)
        assert [[i.label for i in c.items] for c in found] == [["peer1/a", "peer2/b"]]
        assert found[0].items[1].bindings == (Binding(spec("y:int"), 0),)

    def test_length_bound(self):
        assert enumerate_checklists(snapshot_of(CHAIN), request({"x:int": 1}, ["z:int"]), 1) == []

    def test_negative_bound(self):
        with pytest.raises(ValueError):
            enumerate_checklists(snapshot_of(CHAIN), request({"x:int": 1}, ["z:int"]), -1)

    def test_no_pair_repeats(self):
        loop = [descriptor("peer1", "inc", ["n:int"], ["n:int", "m:int"])]
        found = enumerate_checklists(snapshot_of(loop), request({"n:int": 0}, ["m:int"]), 5)
        assert [len(c) for c in found] == [1]

    def test_same_service_on_two_peers(self):
        both = [descriptor("peer2", "s", [], ["y:int"]), descriptor("peer1", "s", [], ["y:int"])]
        found = enumerate_checklists(snapshot_of(both), request({}, ["y:int"]), 3)
        assert sorted(c.score.tiebreak_key for c in found) == ["peer1/s", "peer2/s"]


def checklist(descriptors, provided=frozenset()):
    return build_checklist(list(descriptors), frozenset(provided))


class TestSelect:
    def test_fewer_injections_win(self):
        active = checklist([descriptor("p2", "a", [], ["y:int"]), descriptor("p2", "b", [], ["z:int"])])
        dormant = checklist([descriptor("p1", "a", [], ["y:int"], status=D), descriptor("p1", "b", [], ["z:int"])])
        assert select_checklist([dormant, active]) is active

    def test_fewer_items_win_over_injections(self):
        short = checklist([descriptor("p1", "a", [], ["y:int"], status=D)])
        long = checklist([descriptor("p1", "b", [], ["x:int"]), descriptor("p1", "c", [], ["y:int"])])
        assert select_checklist([long, short]) is short

    def test_fewer_peers_win(self):
        one_peer = checklist([descriptor("p2", "a", [], ["y:int"]), descriptor("p2", "b", [], ["z:int"])])
        two_peers = checklist([descriptor("p1", "a", [], ["y:int"]), descriptor("p2", "b", [], ["z:int"])])
        assert select_checklist([two_peers, one_peer]) is one_peer

    def test_single_candidate(self):
        only = checklist([descriptor("p1", "a", [], ["y:int"])])
        assert select_checklist([only]) is only

    def test_tie_goes_to_smallest_key(self):
        ab = checklist([descriptor("p1", "a", [], ["y:int"]), descriptor("p1", "b", [], ["z:int"])])
        ba = checklist([descriptor("p1", "b", [], ["z:int"]), descriptor("p1", "a", [], ["y:int"])])
        assert select_checklist([ba, ab]) is ab

    def test_empty(self):
        with pytest.raises(NoCandidatePlan):
            select_checklist([])


class TestPlan:
    def test_order_fixture(self):
        chosen = plan(order_snapshot(), request(ORDER_INPUTS, ORDER_GOALS))
        assert chosen.score == PlanScore(3, 2, 3, "peer1/pc_order;peer2/printer_order;peer3/router_order")
        assert {i.provider for i in chosen.items} == {"peer1", "peer2", "peer3"}

    def test_unprovided_goal(self):
        with pytest.raises(NoCandidatePlan):
            plan(order_snapshot(), request(ORDER_INPUTS, ["warranty:int"]))

    def test_missing_input(self):
        with pytest.raises(NoCandidatePlan):
            plan(order_snapshot(), request({"brand:string": "Dell"}, ["stock:int"]))

    def test_deterministic(self):
        req = request(ORDER_INPUTS, ORDER_GOALS)
        assert plan(order_snapshot(), req) == plan(order_snapshot(), req)


class TestCheckpoint:
    def _item(self):
        return build_checklist(CHAIN, frozenset({spec("x:int")})).items[1]

    def test_resolvable(self):
        known = KnownValues(provided={spec("x:int"): 1})
        known.record({"y": 4})
        assert checkpoint(self._item(), known)
        assert known.arguments_for(self._item()) == {"y": 4}

    def test_earlier_item_missing_output(self):
        known = KnownValues(provided={spec("x:int"): 1})
        assert not checkpoint(self._item(), known)
        known.record({"other": 4})
        assert not checkpoint(self._item(), known)

    def test_wrong_type(self):
        known = KnownValues(provided={spec("x:int"): 1})
        known.record({"y": "four"})
        assert not checkpoint(self._item(), known)

    def test_provided_binding(self):
        first = build_checklist(CHAIN, frozenset({spec("x:int")})).items[0]
        assert checkpoint(first, KnownValues(provided={spec("x:int"): 1}))
        assert not checkpoint(first, KnownValues(provided={}))

    def test_no_inputs(self):
        item = CheckItem(descriptor("p", "s", [], ["y:int"]), ())
        assert checkpoint(item, KnownValues(provided={}))


def test_explain_chain():
    chosen = plan(snapshot_of(CHAIN), request({"x:int": 1}, ["z:int"]))
    assert explain(chosen) == [
        "1. peer1/a (activated) <- x:int=provided",
        "2. peer2/b (activated) <- y:int=#1",
        "score (2, 0, 2, 'peer1/a;peer2/b')",
    ]


def test_explain_empty():
    chosen = plan(snapshot_of(CHAIN), request({"z:int": 1}, ["z:int"]))
    assert explain(chosen) == ["(empty checklist: goals already provided)", "score (0, 0, 0, '')"]


# --- exhaustive oracle ---

PARAMS = [ParameterSpec(name=n, type_tag=t) for n in ("a", "b", "c", "d") for t in (TypeTag.INT, TypeTag.STRING)]


def random_instance(rng):
    descriptors = []
    for i in range(rng.randint(1, 6)):
        inputs = {p.name: p for p in rng.sample(PARAMS, rng.randint(0, 2))}
        outputs = {p.name: p for p in rng.sample(PARAMS, rng.randint(1, 2))}
        descriptors.append(
            ServiceDescriptor(
                service_name=f"s{i}",
                inputs=tuple(inputs.values()),
                outputs=tuple(outputs.values()),
                status=rng.choice([A, D]),
                provider=rng.choice(["p1", "p2", "p3"]),
                endpoint="x",
            )
        )
    provided = {p.name: p for p in rng.sample(PARAMS, rng.randint(0, 2))}
    goals = rng.sample(PARAMS, rng.randint(1, 2))
    values = {f"{p}": (1 if p.type_tag is TypeTag.INT else "v") for p in provided.values()}
    return descriptors, request(values, [str(g) for g in goals])


def all_valid_sequences(descriptors, req, max_len):
    """Every applicable sequence of distinct services that ends with the goals covered."""
    goals = set(req.goals)
    found = set()
    for n in range(max_len + 1):
        for seq in itertools.permutations(descriptors, n):
            known = set(req.provided_specs())
            for d in seq:
                if not applicable(d, known):
                    break
                known |= set(d.outputs)
            else:
                if goals <= known:
                    found.add(tuple((d.provider, d.service_name) for d in seq))
    return found


def test_plan_matches_exhaustive_minimum():
    rng = random.Random(2024)
    checked = 0
    for _ in range(200):
        descriptors, req = random_instance(rng)
        snapshot = snapshot_of(descriptors)
        live = snapshot.descriptors()
        valid = all_valid_sequences(live, req, 4)
        found = {tuple((i.provider, i.service_name) for i in c.items) for c in enumerate_checklists(snapshot, req, 4)}
        assert found <= valid
        assert bool(found) == bool(valid)
        if not valid:
            with pytest.raises(NoCandidatePlan):
                plan(snapshot, req, max_len=4)
            continue
        by_key = {(d.provider, d.service_name): d for d in live}
        best = min(score_items([by_key[k] for k in seq]) for seq in valid)
        chosen = plan(snapshot, req, max_len=4)
        assert chosen.score == best
        assert chosen.is_valid_for(req)
        checked += 1
    assert checked > 20


def test_arrival_order_does_not_change_plan():
    rng = random.Random(9)
    for _ in range(50):
        descriptors, req = random_instance(rng)
        shuffled = descriptors[:]
        rng.shuffle(shuffled)
        try:
            first = plan(snapshot_of(descriptors), req, max_len=4)
        except NoCandidatePlan:
            with pytest.raises(NoCandidatePlan):
                plan(snapshot_of(descriptors, order=shuffled), req, max_len=4)
            continue
        assert plan(snapshot_of(descriptors, order=shuffled), req, max_len=4) == first


def test_deactivating_a_step_never_lowers_injections():
    rng = random.Random(17)
    for _ in range(100):
        descriptors, req = random_instance(rng)
        try:
            chosen = plan(snapshot_of(descriptors), req, max_len=4)
        except NoCandidatePlan:
            continue
        active = [i for i in chosen.items if i.descriptor.status is A]
        if not active:
            continue
        flipped_key = (active[0].provider, active[0].service_name)
        flipped = [
            d.with_status(D) if (d.provider, d.service_name) == flipped_key else d for d in descriptors
        ]
        again = plan(snapshot_of(flipped), req, max_len=4)
        assert again.score.injection_count >= chosen.score.injection_count
