"""Checklist planning by forward chaining over a registry snapshot.

A checklist is an ordered sequence of (provider, service) steps. A step may
be appended once every one of its inputs is known, either supplied by the
client or produced by an earlier step. Enumeration is exhaustive up to
``max_len`` steps; selection takes the minimum PlanScore:

    fewest items, then fewest injections, then fewest distinct peers,
    then the lexicographically smallest "provider/service;..." key.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from constants import ServiceState, TypeTag
from descriptor import Identifier, ParameterSpec, ServiceDescriptor, applicable, conforms
from errors import NoCandidatePlan
from registry import RegistrySnapshot
from settings import settings

logger = logging.getLogger(__name__)


class ProvidedValue(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    name: Identifier
    type_tag: TypeTag = Field(alias="type")
    value: Any

    @model_validator(mode="after")
    def _value_conforms(self):
        if not conforms(self.type_tag, self.value):
            raise ValueError(f"{self.name}: {self.value!r} is not a {self.type_tag.value}")
        return self

    @property
    def spec(self) -> ParameterSpec:
        return ParameterSpec(name=self.name, type_tag=self.type_tag)


class CompositeRequest(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    provided: tuple[ProvidedValue, ...] = ()
    goals: tuple[ParameterSpec, ...] = Field(min_length=1)
    request_id: Optional[str] = None

    @model_validator(mode="after")
    def _distinct(self):
        names = [p.name for p in self.provided]
        if len(names) != len(set(names)):
            raise ValueError("provided parameter names must be distinct")
        if len(self.goals) != len(set(self.goals)):
            raise ValueError("goals must be distinct")
        return self

    def provided_specs(self) -> frozenset[ParameterSpec]:
        return frozenset(p.spec for p in self.provided)

    def provided_values(self) -> dict[ParameterSpec, Any]:
        return {p.spec: p.value for p in self.provided}


@dataclass(frozen=True)
class Binding:
    parameter: ParameterSpec
    # None: a provided value; otherwise the index of the producing item
    source: Optional[int]

    def __str__(self) -> str:
        origin = "provided" if self.source is None else f"#{self.source + 1}"
        return f"{self.parameter}={origin}"


@dataclass(frozen=True)
class CheckItem:
    descriptor: ServiceDescriptor
    bindings: tuple[Binding, ...]

    @property
    def provider(self) -> str:
        return self.descriptor.provider

    @property
    def service_name(self) -> str:
        return self.descriptor.service_name

    @property
    def label(self) -> str:
        return f"{self.provider}/{self.service_name}"


class PlanScore(NamedTuple):
    item_count: int
    injection_count: int
    distinct_peer_count: int
    tiebreak_key: str


@dataclass(frozen=True)
class Checklist:
    items: tuple[CheckItem, ...]
    score: PlanScore

    def __len__(self) -> int:
        return len(self.items)

    def is_valid_for(self, req: CompositeRequest) -> bool:
        known = set(req.provided_specs())
        for item in self.items:
            if not applicable(item.descriptor, known):
                return False
            known.update(item.descriptor.outputs)
        return set(req.goals) <= known


def score_items(descriptors: list[ServiceDescriptor]) -> PlanScore:
    return PlanScore(
        item_count=len(descriptors),
        injection_count=sum(d.status is ServiceState.DEACTIVATED for d in descriptors),
        distinct_peer_count=len({d.provider for d in descriptors}),
        tiebreak_key=";".join(f"{d.provider}/{d.service_name}" for d in descriptors),
    )


def build_checklist(descriptors: list[ServiceDescriptor], provided: frozenset[ParameterSpec]) -> Checklist:
    items = []
    for d in descriptors:
        bindings = []
        for param in d.inputs:
            if param in provided:
                bindings.append(Binding(param, None))
                continue
            source = next(i for i, prior in enumerate(descriptors) if param in prior.outputs)
            bindings.append(Binding(param, source))
        items.append(CheckItem(d, tuple(bindings)))
    return Checklist(tuple(items), score_items(descriptors))


def enumerate_checklists(
    snapshot: RegistrySnapshot, req: CompositeRequest, max_len: int
) -> list[Checklist]:
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    candidates = sorted(snapshot.descriptors(), key=lambda d: (d.provider, d.service_name))
    goals = set(req.goals)
    provided = req.provided_specs()
    found: list[Checklist] = []

    def extend(seq: list[ServiceDescriptor], known: frozenset[ParameterSpec]):
        if goals <= known:
            found.append(build_checklist(seq, provided))
            return
        if len(seq) == max_len:
            return
        used = {(d.provider, d.service_name) for d in seq}
        for d in candidates:
            if (d.provider, d.service_name) in used or not applicable(d, known):
                continue
            seq.append(d)
            extend(seq, known | frozenset(d.outputs))
            seq.pop()

    extend([], provided)
    return found


def select_checklist(candidates: list[Checklist]) -> Checklist:
    if not candidates:
        raise NoCandidatePlan("no checklist satisfies the request")
    return min(candidates, key=lambda c: c.score)


def plan(
    snapshot: RegistrySnapshot, req: CompositeRequest, max_len: Optional[int] = None
) -> Checklist:
    max_len = settings.MAX_PLAN_LEN if max_len is None else max_len
    candidates = enumerate_checklists(snapshot, req, max_len)
    if not candidates:
        goals = ", ".join(str(g) for g in req.goals)
        raise NoCandidatePlan(f"no plan of at most {max_len} steps produces {goals}")
    chosen = select_checklist(candidates)
    logger.debug("selected %s out of %d candidates", chosen.score, len(candidates))
    return chosen


@dataclass
class KnownValues:
    """Values gathered while a checklist runs."""

    provided: dict[ParameterSpec, Any]
    produced: list[dict[str, Any]] = field(default_factory=list)

    @classmethod
    def for_request(cls, req: CompositeRequest) -> "KnownValues":
        return cls(provided=req.provided_values())

    def record(self, outputs: dict[str, Any]) -> None:
        self.produced.append(dict(outputs))

    def resolve(self, binding: Binding) -> tuple[bool, Any]:
        param = binding.parameter
        if binding.source is None:
            if param not in self.provided:
                return False, None
            value = self.provided[param]
        else:
            if binding.source >= len(self.produced):
                return False, None
            outputs = self.produced[binding.source]
            if param.name not in outputs:
                return False, None
            value = outputs[param.name]
        return conforms(param.type_tag, value), value

    def arguments_for(self, item: CheckItem) -> dict[str, Any]:
        return {b.parameter.name: self.resolve(b)[1] for b in item.bindings}

    def goal_value(self, goal: ParameterSpec) -> tuple[bool, Any]:
        if goal in self.provided:
            return True, self.provided[goal]
        for outputs in self.produced:
            if goal.name in outputs and conforms(goal.type_tag, outputs[goal.name]):
                return True, outputs[goal.name]
        return False, None


def checkpoint(item: CheckItem, known: KnownValues) -> bool:
    return all(known.resolve(b)[0] for b in item.bindings)


def explain(checklist: Checklist) -> list[str]:
    lines = []
    for k, item in enumerate(checklist.items, start=1):
        bindings = ", ".join(str(b) for b in item.bindings) or "-"
        lines.append(f"{k}. {item.label} ({item.descriptor.status.value}) <- {bindings}")
    if not checklist.items:
        lines.append("(empty checklist: goals already provided)")
    s = checklist.score
    lines.append(
        f"score ({s.item_count}, {s.injection_count}, {s.distinct_peer_count}, {s.tiebreak_key!r})"
    )
    return lines
