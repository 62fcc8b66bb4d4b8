"""Conjugate Beta-Binomial updating and the sanitizer completeness rules.

With a Beta(a, b) prior and y successes in n Binomial trials the posterior
is Beta(a + y, b + n - y), so an update only adds to the shape parameters.

A sound sanitizer observed on one program p updates the completeness prior
as follows:

    accepts p (a UB was found)            -> Beta(a + 1, b)
    rejects p and p has a UB              -> Beta(a, b + 1)
    rejects p and p has no UB             -> no update (uninformative)

A rejection whose ground truth was never inspected is kept on record but
does not move the prior until someone inspects it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from toolchain_assurance.beta_logic import BetaParams
from toolchain_assurance.errors import SoundnessViolation


@dataclass(frozen=True)
class Evidence:
    successes: int
    trials: int

    def __post_init__(self) -> None:
        for name in ("successes", "trials"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
        if self.successes > self.trials:
            raise ValueError(
                f"successes ({self.successes}) cannot exceed trials ({self.trials})"
            )

    @property
    def failures(self) -> int:
        return self.trials - self.successes

    def __add__(self, other: Evidence) -> Evidence:
        return Evidence(self.successes + other.successes, self.trials + other.trials)


def posterior(prior: BetaParams, e: Evidence) -> BetaParams:
    return BetaParams(prior.alpha + e.successes, prior.beta + e.failures)


class Verdict(enum.Enum):
    # "accepted" means the sanitizer reported an undefined behavior
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class GroundTruth(enum.Enum):
    HAS_UB = "has_ub"
    NO_UB = "no_ub"
    UNKNOWN = "unknown"


class Rule(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    UNINFORMATIVE = "uninformative"
    UNINSPECTED = "uninspected"


@dataclass(frozen=True)
class SanitizerObservation:
    verdict: Verdict
    ground_truth: GroundTruth = GroundTruth.UNKNOWN

    def __post_init__(self) -> None:
        verdict = Verdict(self.verdict)
        truth = GroundTruth(self.ground_truth)
        if verdict is Verdict.ACCEPTED:
            if truth is GroundTruth.NO_UB:
                raise SoundnessViolation(
                    "sanitizer accepted a program recorded as free of undefined behavior"
                )
            # an accept proves a behavior exists
            truth = GroundTruth.HAS_UB
        object.__setattr__(self, "verdict", verdict)
        object.__setattr__(self, "ground_truth", truth)

    @property
    def rule(self) -> Rule:
        if self.verdict is Verdict.ACCEPTED:
            return Rule.SUCCESS
        if self.ground_truth is GroundTruth.HAS_UB:
            return Rule.FAILURE
        if self.ground_truth is GroundTruth.NO_UB:
            return Rule.UNINFORMATIVE
        return Rule.UNINSPECTED


def sanitizer_update(prior: BetaParams, obs: SanitizerObservation) -> BetaParams:
    rule = obs.rule
    if rule is Rule.SUCCESS:
        return BetaParams(prior.alpha + 1, prior.beta)
    if rule is Rule.FAILURE:
        return BetaParams(prior.alpha, prior.beta + 1)
    return prior


@dataclass(frozen=True)
class SanitizerHistory:
    """Ordered record of sanitizer observations for one completeness prior.

    Uninspected rejections stay in the record so a later inspection can turn
    them into a failure or an uninformative no-op.
    """

    prior: BetaParams
    observations: tuple[SanitizerObservation, ...] = ()

    def append(self, obs: SanitizerObservation) -> SanitizerHistory:
        return replace(self, observations=self.observations + (obs,))

    def extend(self, obs: Iterable[SanitizerObservation]) -> SanitizerHistory:
        return replace(self, observations=self.observations + tuple(obs))

    def uninspected(self) -> list[int]:
        return [i for i, o in enumerate(self.observations) if o.rule is Rule.UNINSPECTED]

    def inspect(self, index: int, truth: GroundTruth) -> SanitizerHistory:
        old = self.observations[index]
        if old.rule is not Rule.UNINSPECTED:
            raise ValueError(f"observation {index} was already inspected ({old.rule.value})")
        new = SanitizerObservation(old.verdict, truth)
        obs = self.observations[:index] + (new,) + self.observations[index + 1 :]
        return replace(self, observations=obs)

    def updates(self) -> Iterator[BetaParams]:
        params = self.prior
        for obs in self.observations:
            params = sanitizer_update(params, obs)
            yield params

    @property
    def current(self) -> BetaParams:
        params = self.prior
        for params in self.updates():
            pass
        return params
