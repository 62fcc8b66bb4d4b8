"""Boolean logic over independent Beta-distributed random variables.

Logical terms are evaluated on (mean, variance) pairs:

    X and Y  ->  product XY
    not X    ->  1 - X
    X or Y   ->  not(not X and not Y)

and converted back to Beta hyperparameters by moment matching when needed.
Beta(1, 0) and Beta(0, 1) are the identities for ``and`` and ``or``.

Only first and second moments are tracked. The distribution of a product of
Betas is not itself Beta; ``params_from_moments`` gives the moment-matched
Beta.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Optional

from toolchain_assurance.errors import EmptyConjunction, InfeasibleMoments, NoEvidence

# slack on variance <= mean * (1 - mean) for rounding in products
FEASIBILITY_TOL = 1e-12


def _finite_nonneg(value: float, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


@dataclass(frozen=True)
class BetaParams:
    """Hyperparameters of one Beta PDF.

    ``BetaParams(0, 0)`` may be built as an explicit "no evidence yet" marker
    but every moment operation rejects it.
    """

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _finite_nonneg(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _finite_nonneg(self.beta, "beta"))

    @property
    def is_no_evidence(self) -> bool:
        return self.alpha + self.beta == 0.0

    @property
    def mean(self) -> float:
        return moments_of(self).mean

    @property
    def variance(self) -> float:
        return moments_of(self).variance

    def to_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> BetaParams:
        return cls(d["alpha"], d["beta"])

    def __str__(self) -> str:
        return f"Beta({self.alpha:g}, {self.beta:g})"


NO_EVIDENCE = BetaParams(0.0, 0.0)
TRUE = BetaParams(1.0, 0.0)
FALSE = BetaParams(0.0, 1.0)


@dataclass(frozen=True)
class Moments:
    """Mean and variance of a [0, 1]-valued random variable.

    ``complement`` holds 1 - mean. Negation swaps it with ``mean`` instead of
    subtracting, which makes double negation exact in floating point.
    """

    mean: float
    variance: float
    complement: Optional[float] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        mean = _finite_nonneg(self.mean, "mean")
        var = _finite_nonneg(self.variance, "variance")
        if mean > 1.0:
            raise ValueError(f"mean must be in [0, 1], got {mean}")
        comp = 1.0 - mean if self.complement is None else float(self.complement)
        if abs(comp - (1.0 - mean)) > FEASIBILITY_TOL:
            raise ValueError(f"complement {comp} is not 1 - mean for mean {mean}")
        if var > mean * (1.0 - mean) + FEASIBILITY_TOL:
            raise ValueError(
                f"variance {var} exceeds mean*(1-mean) = {mean * (1.0 - mean)}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "complement", comp)


def moments_of(params: BetaParams) -> Moments:
    a, b = params.alpha, params.beta
    s = a + b
    if s == 0.0:
        raise NoEvidence("mean and variance are undefined for Beta(0, 0)")
    return Moments(a / s, a * b / (s * s * (s + 1.0)))


def and_(x: Moments, y: Moments) -> Moments:
    """Conjunction of two independent variables (their product)."""
    mean = x.mean * y.mean
    var = (
        x.variance * y.variance
        + y.variance * x.mean * x.mean
        + x.variance * y.mean * y.mean
    )
    # 1 - xy = (1 - x) + x(1 - y), which keeps not(and(true, y)) exact
    return Moments(mean, var, x.complement + x.mean * y.complement)


def not_(x: Moments) -> Moments:
    return Moments(x.complement, x.variance, x.mean)


def or_(x: Moments, y: Moments) -> Moments:
    return not_(and_(not_(x), not_(y)))


def fold_and(values: Iterable[Moments]) -> Moments:
    """Left fold of ``and_``. Exact for mutually independent variables."""
    values = list(values)
    if not values:
        raise EmptyConjunction("conjunction needs at least one operand")
    return reduce(and_, values)


def params_from_moments(m: Moments) -> BetaParams:
    """Moment-matched Beta hyperparameters.

    Zero variance is only defined at the identities: mean 1 gives Beta(1, 0)
    and mean 0 gives Beta(0, 1).
    """
    mu, var = m.mean, m.variance
    if var == 0.0:
        if mu == 1.0:
            return TRUE
        if mu == 0.0:
            return FALSE
        raise InfeasibleMoments(
            f"zero variance with mean {mu} strictly inside (0, 1) has no Beta"
        )
    if var >= mu * (1.0 - mu):
        raise InfeasibleMoments(
            f"variance {var} >= mean*(1-mean) = {mu * (1.0 - mu)}; shapes would be <= 0"
        )
    alpha = mu * mu * (1.0 - mu) / var - mu
    beta = mu * (1.0 - mu) ** 2 / var - (1.0 - mu)
    return BetaParams(alpha, beta)
