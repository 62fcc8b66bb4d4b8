"""Assurance cases structured as process reductions.

A case records an agreed (unprovable) implication: the hypotheses together
imply the root claim G. Hypotheses the toolchain architect cannot influence
are *uncontrolled* and form the reduction source. Every other hypothesis is
*controlled* and carries an independent Beta variable. The root variable is
the conjunction of the controlled variables, so

    strength   = E[conjunction of controlled nodes]
    confidence = var[conjunction of controlled nodes]

Moving a node from controlled to uncontrolled removes a factor from the
product, which can only raise the strength. The price is admitting that
hypothesis as an uncontrolled threat.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

from toolchain_assurance import _schema
from toolchain_assurance.beta_logic import NO_EVIDENCE, BetaParams, Moments, fold_and, moments_of
from toolchain_assurance.errors import (
    DanglingReference,
    DuplicateId,
    InsufficientEvidence,
    LastControlledNode,
    NoReductionSource,
    SchemaError,
    UnknownCounter,
    UnknownNode,
)


class Classification(enum.Enum):
    CONTROLLED = "controlled"
    UNCONTROLLED = "uncontrolled"


@dataclass(frozen=True)
class FixedPrior:
    params: BetaParams


@dataclass(frozen=True)
class CounterSource:
    counter_id: str


@dataclass(frozen=True)
class TrackerSource:
    tracker_id: str


EvidenceSource = Union[FixedPrior, CounterSource, TrackerSource]


@dataclass(frozen=True)
class HypothesisNode:
    id: str
    statement: str
    classification: Classification
    evidence: Optional[EvidenceSource] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "classification", Classification(self.classification))
        if self.classification is Classification.UNCONTROLLED and self.evidence is not None:
            raise SchemaError(
                f"uncontrolled node {self.id!r} must not carry evidence", f"nodes.{self.id}.evidence"
            )

    @property
    def controlled(self) -> bool:
        return self.classification is Classification.CONTROLLED


@dataclass(frozen=True)
class Group:
    """Display-only grouping node, e.g. an intermediate sub-conjunction."""

    id: str
    statement: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class AssuranceCase:
    root_id: str
    root_statement: str
    nodes: tuple[HypothesisNode, ...]
    groups: tuple[Group, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "groups", tuple(self.groups))
        seen = {self.root_id}
        for i, ident in enumerate([n.id for n in self.nodes] + [g.id for g in self.groups]):
            if ident in seen:
                raise DuplicateId(f"duplicate id {ident!r}", f"nodes[{i}].id" if i < len(self.nodes) else "groups")
            seen.add(ident)
        node_ids = {n.id for n in self.nodes}
        for gi, g in enumerate(self.groups):
            for mi, m in enumerate(g.members):
                if m not in node_ids:
                    raise DanglingReference(f"group {g.id!r} names unknown node {m!r}", f"groups[{gi}].members[{mi}]")
        if not self.conjunction:
            raise LastControlledNode("the root conjunction has no controlled nodes")

    @property
    def conjunction(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.controlled)

    @property
    def uncontrolled_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if not n.controlled)

    def node(self, node_id: str) -> HypothesisNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNode(node_id)

    def to_document(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "root": {"id": self.root_id, "statement": self.root_statement},
            "nodes": [_node_doc(n) for n in self.nodes],
        }
        if self.groups:
            doc["groups"] = [{"id": g.id, "statement": g.statement, "members": list(g.members)} for g in self.groups]
        return doc


def _node_doc(n: HypothesisNode) -> dict[str, Any]:
    d: dict[str, Any] = {"id": n.id, "statement": n.statement, "classification": n.classification.value}
    ev = n.evidence
    if isinstance(ev, FixedPrior):
        prior: dict[str, Any] = ev.params.to_dict()
        if ev.params.is_no_evidence:
            prior["no_evidence"] = True
        d["evidence"] = {"prior": prior}
    elif isinstance(ev, CounterSource):
        d["evidence"] = {"counter": ev.counter_id}
    elif isinstance(ev, TrackerSource):
        d["evidence"] = {"tracker": ev.tracker_id}
    return d


@dataclass(frozen=True)
class ReductionReport:
    strength: float
    confidence_variance: float
    conjunction: tuple[str, ...]
    uncontrolled_ids: tuple[str, ...]
    per_node_moments: Mapping[str, Moments]
    per_node_params: Mapping[str, BetaParams] = field(default_factory=dict)
    evaluated_at: Optional[int] = None


def load_case(document: Mapping[str, Any]) -> AssuranceCase:
    """Build a case from a parsed case document, validating it on the way."""
    _schema.validate(document, "case")
    nodes = []
    for i, nd in enumerate(document["nodes"]):
        cls = Classification(nd["classification"])
        ev = _evidence(nd.get("evidence"), f"nodes[{i}].evidence")
        if cls is Classification.UNCONTROLLED and ev is not None:
            raise SchemaError(f"uncontrolled node {nd['id']!r} must not carry evidence", f"nodes[{i}].evidence")
        if cls is Classification.CONTROLLED and ev is None:
            raise SchemaError(f"controlled node {nd['id']!r} needs an evidence source", f"nodes[{i}]")
        nodes.append(HypothesisNode(nd["id"], nd["statement"], cls, ev))
    groups = [Group(g["id"], g["statement"], tuple(g["members"])) for g in document.get("groups", [])]
    root = document["root"]
    case = AssuranceCase(root["id"], root["statement"], tuple(nodes), tuple(groups))
    _require_reduction_source(case)
    return case


def _require_reduction_source(case: AssuranceCase) -> None:
    # checked on load and evaluation only, so reclassify can pass through a
    # state with no uncontrolled node on its way elsewhere
    if not case.uncontrolled_ids:
        raise NoReductionSource("a process reduction needs at least one uncontrolled node", "nodes")


def _evidence(doc: Optional[Mapping[str, Any]], path: str) -> Optional[EvidenceSource]:
    if doc is None:
        return None
    if "prior" in doc:
        p = doc["prior"]
        params = BetaParams(p["alpha"], p["beta"])
        if params.is_no_evidence and not p.get("no_evidence", False):
            raise SchemaError("Beta(0, 0) prior must be marked no_evidence: true", path + ".prior")
        return FixedPrior(params)
    if "counter" in doc:
        return CounterSource(doc["counter"])
    return TrackerSource(doc["tracker"])


def read_case(path: str | Path) -> AssuranceCase:
    """Read and load a case document. OSError propagates for I/O problems."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}") from e
    return load_case(doc)


Resolver = Callable[[str], BetaParams]


def source_resolver(
    case: AssuranceCase,
    counter: Optional[Callable[[str], BetaParams]] = None,
    tracker: Optional[Callable[[str], BetaParams]] = None,
    overrides: Optional[Mapping[str, BetaParams]] = None,
) -> Resolver:
    """Resolver mapping node ids to Beta state through each node's evidence source.

    ``counter`` and ``tracker`` look up counter-backed and tracker-backed
    nodes; a missing id in either surfaces as DanglingReference.
    ``overrides`` replaces the state of specific nodes outright.
    """
    overrides = dict(overrides or {})

    def resolve(node_id: str) -> BetaParams:
        if node_id in overrides:
            return overrides[node_id]
        src = case.node(node_id).evidence
        if src is None:
            return NO_EVIDENCE
        if isinstance(src, FixedPrior):
            return src.params
        if isinstance(src, CounterSource):
            if counter is None:
                raise DanglingReference(f"node {node_id!r} needs counter {src.counter_id!r} but no ledger was given")
            try:
                return counter(src.counter_id)
            except (UnknownCounter, KeyError) as e:
                raise DanglingReference(f"node {node_id!r} references unknown counter {src.counter_id!r}") from e
        if tracker is None:
            raise DanglingReference(f"node {node_id!r} needs tracker {src.tracker_id!r} but none was given")
        try:
            return tracker(src.tracker_id)
        except KeyError as e:
            raise DanglingReference(f"node {node_id!r} references unknown tracker {src.tracker_id!r}") from e

    return resolve


def evaluate_strength(
    case: AssuranceCase, resolve: Resolver, evaluated_at: Optional[int] = None
) -> ReductionReport:
    _require_reduction_source(case)
    params = {nid: resolve(nid) for nid in case.conjunction}
    missing = [nid for nid, p in params.items() if p.is_no_evidence]
    if missing:
        raise InsufficientEvidence(missing)
    moments = {nid: moments_of(p) for nid, p in params.items()}
    root = fold_and(moments[nid] for nid in case.conjunction)
    return ReductionReport(
        strength=root.mean,
        confidence_variance=root.variance,
        conjunction=case.conjunction,
        uncontrolled_ids=case.uncontrolled_ids,
        per_node_moments=moments,
        per_node_params=params,
        evaluated_at=evaluated_at,
    )


def reclassify(
    case: AssuranceCase,
    node_id: str,
    to: Classification | str,
    evidence: Optional[EvidenceSource] = None,
) -> AssuranceCase:
    """Return a new case with ``node_id`` moved to classification ``to``.

    A node becoming uncontrolled drops its evidence source. A node becoming
    controlled takes ``evidence``; without one it resolves to no evidence.
    """
    to = Classification(to)
    target = case.node(node_id)
    if target.classification is to:
        return case
    if to is Classification.UNCONTROLLED:
        if case.conjunction == (node_id,):
            raise LastControlledNode(f"reclassifying {node_id!r} would leave the conjunction empty")
        new = replace(target, classification=to, evidence=None)
    else:
        new = replace(target, classification=to, evidence=evidence)
    nodes = tuple(new if n.id == node_id else n for n in case.nodes)
    return replace(case, nodes=nodes)
