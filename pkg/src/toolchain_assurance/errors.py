"""Exception hierarchy.

Every error raised on purpose by this package derives from AssuranceError.
The CLI maps the subclasses below onto its exit codes.
"""

from __future__ import annotations

from typing import Sequence


class AssuranceError(Exception):
    """Base class for all package errors."""


# -- beta logic ---------------------------------------------------------------


class NoEvidence(AssuranceError, ValueError):
    """Moments were requested for Beta(0, 0)."""


class InfeasibleMoments(AssuranceError, ValueError):
    """A (mean, variance) pair names no Beta distribution."""


class EmptyConjunction(AssuranceError, ValueError):
    pass


# -- bayes --------------------------------------------------------------------


class SoundnessViolation(AssuranceError, ValueError):
    """The sanitizer accepted a program whose ground truth says it has no UB."""


# -- schema / validation (CLI exit 2) -----------------------------------------


class SchemaError(AssuranceError, ValueError):
    """A document failed validation. ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = "(root)") -> None:
        super().__init__(f"[{path}] {message}")
        self.path = path
        self.detail = message


class DuplicateId(SchemaError):
    pass


class DanglingReference(SchemaError):
    pass


class NoReductionSource(SchemaError):
    pass


class MalformedEvent(SchemaError):
    pass


class SequenceRegression(SchemaError):
    pass


class CorruptLog(SchemaError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(message, path=f"line {line}")
        self.line = line


# -- case ---------------------------------------------------------------------


class InsufficientEvidence(AssuranceError):
    """One or more controlled nodes resolved to Beta(0, 0)."""

    def __init__(self, node_ids: str | Sequence[str]) -> None:
        ids = [node_ids] if isinstance(node_ids, str) else list(node_ids)
        super().__init__("insufficient evidence for node(s): " + ", ".join(ids))
        self.node_ids = ids
        self.node_id = ids[0]


class LastControlledNode(AssuranceError, ValueError):
    pass


class UnknownNode(AssuranceError, KeyError):
    pass


# -- ledger -------------------------------------------------------------------


class UnknownCounter(AssuranceError, KeyError):
    pass


# -- completeness tracker -----------------------------------------------------


class NonConvergence(AssuranceError):
    """Fixed-point iteration gave up. ``ub_counts`` is the audited sequence."""

    def __init__(self, max_iter: int, ub_counts: Sequence[int], reason: str = "") -> None:
        msg = f"no fixed point after {max_iter} iteration(s); UB counts {list(ub_counts)}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.max_iter = max_iter
        self.ub_counts = list(ub_counts)


class NotAFixedPoint(AssuranceError, ValueError):
    pass


class MonotonicityViolation(AssuranceError):
    pass


class AdaptationError(AssuranceError, ValueError):
    """Precondition of an instrumentation change failed."""
