"""Test-driven measurement of sanitizer completeness.

The state is (Units, Tests, Beta(a, b)). Each application of ``step`` picks
one undefined-behavior instance in the ground-truth system model and
credits or blames the sanitizer:

    unit case 1   detected by a meaningful test already in Tests     a + 1
    unit case 2   detectable, but only by a test not yet in Tests    a + 1, test added
    unit case 3   no input detects it                                b + 1
    integ 1..3    same three cases for a UB that only shows up when a
                  group of units R runs together

After each case the affected unit (or group) is replaced by a fixed version
without that instance. With no instance left ``step`` is the identity.
Integration cases never fire for a behavior unit testing alone can find;
those entries only mirror a unit-level instance and disappear with it.

Cases are tried in a fixed order (unit before integration, detection before
failure, lowest unit id then UB id) so traces are reproducible. Every
non-identity step removes exactly one instance, so from k instances the
iteration reaches the fixed point after k steps with

    a_final - a_0 = number of detectable instances
    b_final - b_0 = number of undetectable instances
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

from toolchain_assurance import _schema
from toolchain_assurance.beta_logic import BetaParams
from toolchain_assurance.errors import (
    AdaptationError,
    MonotonicityViolation,
    NonConvergence,
    NotAFixedPoint,
    SchemaError,
)


@dataclass(frozen=True)
class UBInstance:
    """One undefined-behavior instance and the test inputs that expose it.

    ``fix_introduces`` lists instances that the fix for this one brings in.
    It exists to model bad fixes; a faithful scenario leaves it empty.
    """

    ub_id: str
    triggers: frozenset[str] = frozenset()
    fix_introduces: tuple[UBInstance, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "triggers", frozenset(self.triggers))
        object.__setattr__(self, "fix_introduces", tuple(self.fix_introduces))

    @property
    def detectable(self) -> bool:
        return bool(self.triggers)


@dataclass(frozen=True)
class Unit:
    unit_id: str
    ub_instances: tuple[UBInstance, ...] = ()
    # None means every test is meaningful for this unit
    meaningful_tests: Optional[frozenset[str]] = None

    def __post_init__(self) -> None:
        ubs = tuple(sorted(self.ub_instances, key=lambda u: u.ub_id))
        ids = [u.ub_id for u in ubs]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"duplicate UB id in unit {self.unit_id!r}", f"units.{self.unit_id}.ubs")
        object.__setattr__(self, "ub_instances", ubs)
        if self.meaningful_tests is not None:
            meaningful = frozenset(self.meaningful_tests)
            object.__setattr__(self, "meaningful_tests", meaningful)
            for ub in ubs:
                if not ub.triggers <= meaningful:
                    raise SchemaError(
                        f"triggers of {ub.ub_id!r} must be meaningful tests for {self.unit_id!r}",
                        f"units.{self.unit_id}.ubs.{ub.ub_id}",
                    )

    def is_meaningful(self, test: str) -> bool:
        return self.meaningful_tests is None or test in self.meaningful_tests

    def has(self, ub_id: str) -> bool:
        return any(u.ub_id == ub_id for u in self.ub_instances)

    def without(self, ub: UBInstance) -> Unit:
        """unit': the fixed version lacking this instance."""
        kept = [u for u in self.ub_instances if u.ub_id != ub.ub_id]
        meaningful = self.meaningful_tests
        if meaningful is not None:
            for new in ub.fix_introduces:
                meaningful = meaningful | new.triggers
        return replace(self, ub_instances=tuple(kept) + ub.fix_introduces, meaningful_tests=meaningful)


@dataclass(frozen=True)
class IntegrationUB:
    """A behavior observed when the units in ``units`` run together.

    With ``unit_detectable`` set the entry only mirrors an instance of the
    same id held by one of those units; unit testing gets the credit for it.
    """

    units: frozenset[str]
    ub: UBInstance
    unit_detectable: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", frozenset(self.units))
        if not self.units:
            raise SchemaError("integration UB needs at least one unit", "integration.units")


class HCase(enum.Enum):
    UNIT_DETECTED_EXISTING_TEST = "unit-detected-existing-test"
    UNIT_DETECTED_NEW_TEST = "unit-detected-new-test"
    UNIT_UNDETECTABLE = "unit-undetectable"
    INTEG_DETECTED_EXISTING_TEST = "integ-detected-existing-test"
    INTEG_DETECTED_NEW_TEST = "integ-detected-new-test"
    INTEG_UNDETECTABLE = "integ-undetectable"
    IDENTITY = "identity"


@dataclass(frozen=True)
class SystemState:
    units: tuple[Unit, ...]
    tests: frozenset[str]
    beta: BetaParams
    integration_ubs: tuple[IntegrationUB, ...] = ()
    project: str = "default"

    def __post_init__(self) -> None:
        units = tuple(sorted(self.units, key=lambda u: u.unit_id))
        ids = [u.unit_id for u in units]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate unit id", "units")
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "tests", frozenset(self.tests))
        object.__setattr__(self, "integration_ubs", tuple(self.integration_ubs))
        if self.beta.is_no_evidence:
            raise SchemaError("a prior with alpha + beta > 0 is required", "prior")
        by_id = {u.unit_id: u for u in units}
        own = [i.ub.ub_id for i in self.integration_ubs if not i.unit_detectable]
        if len(set(own)) != len(own):
            raise SchemaError("duplicate integration UB id", "integration")
        for k, iub in enumerate(self.integration_ubs):
            missing = sorted(iub.units - by_id.keys())
            if missing:
                raise SchemaError(f"integration UB names unknown unit(s) {missing}", f"integration[{k}].units")
            if iub.unit_detectable and not any(by_id[u].has(iub.ub.ub_id) for u in iub.units):
                raise SchemaError(
                    f"unit-detectable integration UB {iub.ub.ub_id!r} must mirror a UB held by one of its units",
                    f"integration[{k}]",
                )

    def unit(self, unit_id: str) -> Unit:
        for u in self.units:
            if u.unit_id == unit_id:
                return u
        raise KeyError(unit_id)

    @property
    def ub_count(self) -> int:
        return sum(len(u.ub_instances) for u in self.units) + sum(
            1 for i in self.integration_ubs if not i.unit_detectable
        )

    def ground_truth_counts(self) -> tuple[int, int]:
        """(detectable, undetectable) instance counts, ignoring mirrors."""
        ubs = [ub for u in self.units for ub in u.ub_instances]
        ubs += [i.ub for i in self.integration_ubs if not i.unit_detectable]
        det = sum(1 for ub in ubs if ub.detectable)
        return det, len(ubs) - det


@dataclass(frozen=True)
class HStepOutcome:
    new_state: SystemState
    case_fired: HCase
    removed_ub: Optional[str] = None
    location: tuple[str, ...] = ()
    added_test: Optional[str] = None

    @property
    def is_identity(self) -> bool:
        return self.case_fired is HCase.IDENTITY


def _credit(b: BetaParams) -> BetaParams:
    return BetaParams(b.alpha + 1, b.beta)


def _blame(b: BetaParams) -> BetaParams:
    return BetaParams(b.alpha, b.beta + 1)


def _fix_unit(state: SystemState, unit: Unit, ub: UBInstance, beta: BetaParams, tests: frozenset[str]) -> SystemState:
    fixed = unit.without(ub)
    units = tuple(fixed if u.unit_id == unit.unit_id else u for u in state.units)
    holders = {u.unit_id for u in units if u.has(ub.ub_id)}
    # mirrors vanish once no unit in their group still holds the instance
    integ = tuple(
        i
        for i in state.integration_ubs
        if not (i.unit_detectable and i.ub.ub_id == ub.ub_id and unit.unit_id in i.units and not (i.units & holders))
    )
    return replace(state, units=units, tests=tests, beta=beta, integration_ubs=integ)


def _fix_group(state: SystemState, iub: IntegrationUB, beta: BetaParams, tests: frozenset[str]) -> SystemState:
    integ = [i for i in state.integration_ubs if i is not iub]
    integ += [IntegrationUB(iub.units, new, False) for new in iub.ub.fix_introduces]
    return replace(state, tests=tests, beta=beta, integration_ubs=tuple(integ))


def step(state: SystemState) -> HStepOutcome:
    """One application of H."""
    tests = state.tests

    for unit in state.units:
        for ub in unit.ub_instances:
            if any(t in tests and unit.is_meaningful(t) for t in ub.triggers):
                new = _fix_unit(state, unit, ub, _credit(state.beta), tests)
                return HStepOutcome(new, HCase.UNIT_DETECTED_EXISTING_TEST, ub.ub_id, (unit.unit_id,))
    for unit in state.units:
        for ub in unit.ub_instances:
            if ub.detectable:
                test = min(ub.triggers)
                new = _fix_unit(state, unit, ub, _credit(state.beta), tests | {test})
                return HStepOutcome(new, HCase.UNIT_DETECTED_NEW_TEST, ub.ub_id, (unit.unit_id,), test)
    for unit in state.units:
        for ub in unit.ub_instances:
            new = _fix_unit(state, unit, ub, _blame(state.beta), tests)
            return HStepOutcome(new, HCase.UNIT_UNDETECTABLE, ub.ub_id, (unit.unit_id,))

    # unit-detectable mirrors never earn integration credit
    group_ubs = sorted(
        (i for i in state.integration_ubs if not i.unit_detectable),
        key=lambda i: (sorted(i.units), i.ub.ub_id),
    )
    for iub in group_ubs:
        if iub.ub.triggers & tests:
            new = _fix_group(state, iub, _credit(state.beta), tests)
            return HStepOutcome(new, HCase.INTEG_DETECTED_EXISTING_TEST, iub.ub.ub_id, tuple(sorted(iub.units)))
    for iub in group_ubs:
        if iub.ub.detectable:
            test = min(iub.ub.triggers)
            new = _fix_group(state, iub, _credit(state.beta), tests | {test})
            return HStepOutcome(new, HCase.INTEG_DETECTED_NEW_TEST, iub.ub.ub_id, tuple(sorted(iub.units)), test)
    for iub in group_ubs:
        new = _fix_group(state, iub, _blame(state.beta), tests)
        return HStepOutcome(new, HCase.INTEG_UNDETECTABLE, iub.ub.ub_id, tuple(sorted(iub.units)))

    return HStepOutcome(state, HCase.IDENTITY)


@dataclass(frozen=True)
class FixedPointRun:
    """Result of ``fixed_point``; unpacks as ``state, trace``."""

    state: SystemState
    trace: tuple[HStepOutcome, ...]
    ub_counts: tuple[int, ...]

    def __iter__(self):
        return iter((self.state, self.trace))

    @property
    def steps(self) -> int:
        return sum(1 for o in self.trace if not o.is_identity)


def fixed_point(state: SystemState, max_iter: Optional[int] = None) -> FixedPointRun:
    """Iterate x_{n+1} = H(x_n) until H returns its argument.

    ``max_iter`` defaults to the initial instance count plus one, enough for
    one removal per instance and a final identity step. Raises
    NonConvergence when the budget runs out or a step fails to strictly
    decrease the instance count.
    """
    if max_iter is None:
        max_iter = state.ub_count + 1
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    counts = [state.ub_count]
    trace: list[HStepOutcome] = []
    for _ in range(max_iter):
        out = step(state)
        trace.append(out)
        if out.is_identity:
            return FixedPointRun(state, tuple(trace), tuple(counts))
        counts.append(out.new_state.ub_count)
        if counts[-1] >= counts[-2]:
            raise NonConvergence(max_iter, counts, "UB count did not strictly decrease")
        state = out.new_state
    raise NonConvergence(max_iter, counts)


@dataclass(frozen=True)
class FrozenAssessment:
    """Posterior at the last fixed point, with the tests it was learned on.

    A later clean sanitizer run may use ``probability`` only when its test
    set contains every frozen test.
    """

    project: str
    beta: BetaParams
    tests: frozenset[str]

    @property
    def probability(self) -> float:
        return self.beta.mean

    def is_valid_for(self, tests: Iterable[str]) -> bool:
        return self.tests <= frozenset(tests)

    def to_dict(self) -> dict[str, Any]:
        return {
            "project": self.project,
            "alpha": self.beta.alpha,
            "beta": self.beta.beta,
            "probability": self.probability,
            "tests": sorted(self.tests),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FrozenAssessment:
        return cls(d["project"], BetaParams(d["alpha"], d["beta"]), frozenset(d["tests"]))


def freeze(state: SystemState) -> FrozenAssessment:
    if not step(state).is_identity:
        raise NotAFixedPoint(f"state still holds {state.ub_count} UB instance(s)")
    return FrozenAssessment(state.project, state.beta, state.tests)


class AssessmentStore:
    """Frozen assessments on disk, one JSON file per project id."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def path(self, assessment_id: str) -> Path:
        return self.directory / f"{assessment_id}.json"

    def put(self, assessment: FrozenAssessment) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.path(assessment.project)
        p.write_text(json.dumps(assessment.to_dict(), indent=2, sort_keys=True) + "\n")
        return p

    def get(self, assessment_id: str) -> FrozenAssessment:
        p = self.path(assessment_id)
        if not p.exists():
            raise KeyError(assessment_id)
        return FrozenAssessment.from_dict(json.loads(p.read_text()))

    def beta(self, assessment_id: str) -> BetaParams:
        return self.get(assessment_id).beta


def _locate(state: SystemState, ub_id: str, unit_id: Optional[str]):
    hits = []
    for u in state.units:
        if unit_id is not None and u.unit_id != unit_id:
            continue
        hits += [("unit", u, ub) for ub in u.ub_instances if ub.ub_id == ub_id]
    if unit_id is None:
        hits += [("integ", i, i.ub) for i in state.integration_ubs if not i.unit_detectable and i.ub.ub_id == ub_id]
    if not hits:
        raise AdaptationError(f"no UB instance {ub_id!r}")
    if len(hits) > 1:
        raise AdaptationError(f"UB id {ub_id!r} is ambiguous; name its unit")
    return hits[0]


def adapt_instrumentation(
    state: SystemState, ub_id: str, new_trigger: str, unit_id: Optional[str] = None
) -> SystemState:
    """Model a sanitizer change that makes an undetectable instance detectable.

    The new trigger joins Tests if absent, so the next ``step`` records a
    success for this instance instead of a failure.
    """
    kind, holder, ub = _locate(state, ub_id, unit_id)
    if ub.detectable:
        raise AdaptationError(f"UB {ub_id!r} is already detectable")
    new_ub = replace(ub, triggers=frozenset({new_trigger}))
    if kind == "unit":
        meaningful = holder.meaningful_tests
        if meaningful is not None:
            meaningful = meaningful | {new_trigger}
        ubs = tuple(new_ub if u.ub_id == ub_id else u for u in holder.ub_instances)
        fixed = replace(holder, ub_instances=ubs, meaningful_tests=meaningful)
        units = tuple(fixed if u.unit_id == holder.unit_id else u for u in state.units)
        new = replace(state, units=units, tests=state.tests | {new_trigger})
    else:
        integ = tuple(replace(i, ub=new_ub) if i is holder else i for i in state.integration_ubs)
        new = replace(state, integration_ubs=integ, tests=state.tests | {new_trigger})
    check_monotone(state, new)
    return new


def _trigger_map(state: SystemState) -> dict[tuple, frozenset[str]]:
    out: dict[tuple, frozenset[str]] = {}
    for u in state.units:
        for ub in u.ub_instances:
            out[("unit", u.unit_id, ub.ub_id)] = ub.triggers
    for i in state.integration_ubs:
        if not i.unit_detectable:
            out[("integ", tuple(sorted(i.units)), i.ub.ub_id)] = i.ub.triggers
    return out


def check_monotone(before: SystemState, after: SystemState) -> None:
    """Raise MonotonicityViolation if an instrumentation change lost ground.

    Every instance present in both states must keep all its triggers, and
    the test set must not shrink.
    """
    old, new = _trigger_map(before), _trigger_map(after)
    for key, triggers in old.items():
        if key in new and not triggers <= new[key]:
            lost = sorted(triggers - new[key])
            raise MonotonicityViolation(f"{key[0]} UB {key[2]!r} at {key[1]} lost trigger(s) {lost}")
    if not before.tests <= after.tests:
        raise MonotonicityViolation(f"tests removed: {sorted(before.tests - after.tests)}")


# -- scenario files -----------------------------------------------------------


def _ub(doc: Mapping[str, Any]) -> UBInstance:
    return UBInstance(
        doc["id"],
        frozenset(doc.get("triggers", [])),
        tuple(_ub(d) for d in doc.get("fix_introduces", [])),
    )


def load_scenario(doc: Mapping[str, Any]) -> tuple[SystemState, Optional[int]]:
    """Parse a scenario document into an initial state and optional max_iter."""
    _schema.validate(doc, "scenario")
    units = []
    for ud in doc["units"]:
        meaningful = ud.get("meaningful_tests")
        units.append(
            Unit(
                ud["id"],
                tuple(_ub(b) for b in ud.get("ubs", [])),
                None if meaningful is None else frozenset(meaningful),
            )
        )
    integ = tuple(
        IntegrationUB(frozenset(d["units"]), _ub(d["ub"]), d["unit_detectable"]) for d in doc.get("integration", [])
    )
    prior = doc["prior"]
    state = SystemState(
        units=tuple(units),
        tests=frozenset(doc.get("tests", [])),
        beta=BetaParams(prior["alpha"], prior["beta"]),
        integration_ubs=integ,
        project=doc.get("project", "default"),
    )
    return state, doc.get("max_iter")


def read_scenario(path: str | Path) -> tuple[SystemState, Optional[int]]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}") from e
    return load_scenario(doc)


def trace_records(trace: Iterable[HStepOutcome]) -> list[dict[str, Any]]:
    rows = []
    for i, o in enumerate(trace):
        s = o.new_state
        rows.append(
            {
                "step": i,
                "case": o.case_fired.value,
                "removed_ub": o.removed_ub,
                "location": list(o.location),
                "added_test": o.added_test,
                "alpha": s.beta.alpha,
                "beta": s.beta.beta,
                "ub_count": s.ub_count,
                "tests": sorted(s.tests),
            }
        )
    return rows


def export_trace(trace: Iterable[HStepOutcome]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in trace_records(trace))
