"""Append-only ledger of toolchain trials and the evidence counters they feed.

A trial is one instance of a stage: running a stage again on the same input
is not a new trial. Instances are identified by (stage, input_id, opt_level)
and later events with the same key are logged as duplicates without touching
the counters. Sanitizer detection depends on optimization, so -O0 and
-O1/2/3 trials are counted separately.

Counters per optimization level, over the n code-signing trials:

    s1  alpha: Alice signed and the sanitizer rejected (found no UB in) the source
        beta:  Alice signed and the sanitizer did not reject the source
    s3  alpha: Alice authenticated and Q signed with the private key
        beta:  an impostor authenticated and Q signed with the private key
    p1  alpha: Alice was issued the key pair;  beta = n - alpha
    p3  alpha: key pair issued and private key known only to Alice
        beta:  key pair issued and private key known to others

m counts distinct trials of every stage and is reported only.
"""

from __future__ import annotations

import contextlib
import enum
import fcntl
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from toolchain_assurance import _schema
from toolchain_assurance.beta_logic import BetaParams
from toolchain_assurance.errors import (
    CorruptLog,
    MalformedEvent,
    SchemaError,
    SequenceRegression,
    UnknownCounter,
)


class Stage(enum.Enum):
    COMPILE = "compile"
    COMPILE_SANITIZE = "compile-sanitize"
    COMPILE_CODE_SIGN = "compile-code-sign"
    COMPILE_SANITIZE_CODE_SIGN = "compile-sanitize-code-sign"

    @property
    def signs(self) -> bool:
        return self in (Stage.COMPILE_CODE_SIGN, Stage.COMPILE_SANITIZE_CODE_SIGN)

    @property
    def sanitizes(self) -> bool:
        return self in (Stage.COMPILE_SANITIZE, Stage.COMPILE_SANITIZE_CODE_SIGN)


class OptLevel(enum.Enum):
    O0 = "O0"
    O123 = "O123"

    @classmethod
    def parse(cls, text: str) -> OptLevel:
        for level in cls:
            if level.value.lower() == str(text).lower():
                return level
        raise ValueError(f"unknown optimization level {text!r} (expected o0 or o123)")


SANITIZER_FACTS = ("sanitizer_rejected_source",)
SIGNING_FACTS = (
    "alice_signed",
    "signer_authenticated_as_alice",
    "impostor_authenticated",
    "q_signed_with_private_key",
    "alice_issued_keypair",
    "private_key_known_only_to_alice",
)
# every code-sign trial reauthenticates the signer
AUTH_FACTS = ("signer_authenticated_as_alice", "impostor_authenticated")


@dataclass(frozen=True)
class TrialFacts:
    """Observed facts of one trial. ``None`` means the fact was not recorded."""

    alice_signed: Optional[bool] = None
    sanitizer_rejected_source: Optional[bool] = None
    signer_authenticated_as_alice: Optional[bool] = None
    impostor_authenticated: Optional[bool] = None
    q_signed_with_private_key: Optional[bool] = None
    alice_issued_keypair: Optional[bool] = None
    private_key_known_only_to_alice: Optional[bool] = None

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not isinstance(v, bool):
                raise MalformedEvent(f"fact must be a boolean, got {v!r}", f"facts.{f.name}")

    def holds(self, name: str) -> bool:
        return bool(getattr(self, name))

    def to_dict(self) -> dict[str, bool]:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class TrialEvent:
    stage: Stage
    input_id: str
    opt_level: OptLevel
    facts: TrialFacts = TrialFacts()
    sequence: int = 0

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "stage", Stage(self.stage))
            object.__setattr__(self, "opt_level", OptLevel(self.opt_level))
        except ValueError as e:
            raise MalformedEvent(str(e)) from e
        if not self.input_id:
            raise MalformedEvent("input_id must be non-empty", "input_id")
        f = self.facts
        if f.holds("impostor_authenticated") and f.holds("signer_authenticated_as_alice"):
            raise MalformedEvent(
                "impostor_authenticated and signer_authenticated_as_alice are mutually exclusive", "facts"
            )
        if not self.stage.signs:
            for name in SIGNING_FACTS:
                if getattr(f, name) is not None:
                    raise MalformedEvent(f"signing fact on non-signing stage {self.stage.value}", f"facts.{name}")
        else:
            for name in AUTH_FACTS:
                if getattr(f, name) is None:
                    raise MalformedEvent(f"code-sign trial must record {name}", f"facts.{name}")
        if not self.stage.sanitizes and f.sanitizer_rejected_source is not None:
            raise MalformedEvent(
                f"sanitizer fact on non-sanitizing stage {self.stage.value}", "facts.sanitizer_rejected_source"
            )

    @property
    def key(self) -> tuple[Stage, str, OptLevel]:
        return (self.stage, self.input_id, self.opt_level)

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "stage": self.stage.value,
            "input_id": self.input_id,
            "opt_level": self.opt_level.value,
            "facts": self.facts.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: Mapping) -> TrialEvent:
        _schema.validate(doc, "event")
        return cls(
            stage=Stage(doc["stage"]),
            input_id=doc["input_id"],
            opt_level=OptLevel(doc["opt_level"]),
            facts=TrialFacts(**doc.get("facts", {})),
            sequence=doc["sequence"],
        )


def fileset_digest(files: Mapping[str, bytes], options: Sequence[str] = ()) -> str:
    """Instance identity of a source fileset.

    Sanitizer options are excluded, so recompiling the same sources without
    ``-fsanitize=...`` yields the same identity and is not a new trial.
    """
    h = hashlib.sha256()
    for path in sorted(files):
        data = files[path]
        h.update(path.encode() + b"\0" + str(len(data)).encode() + b"\0" + data)
    kept = sorted(o for o in options if not o.startswith(("-fsanitize", "-fno-sanitize")))
    h.update(b"\0options\0" + "\0".join(kept).encode())
    return "sha256:" + h.hexdigest()


@dataclass(frozen=True)
class CounterSet:
    s1: tuple[int, int] = (0, 0)
    s3: tuple[int, int] = (0, 0)
    p1: tuple[int, int] = (0, 0)
    p3: tuple[int, int] = (0, 0)
    m: int = 0
    n: int = 0

    COUNTER_IDS = ("s1", "s3", "p1", "p3")

    def beta_params(self, counter_id: str) -> BetaParams:
        if counter_id not in self.COUNTER_IDS:
            raise UnknownCounter(counter_id)
        a, b = getattr(self, counter_id)
        return BetaParams(a, b)

    def summary(self) -> str:
        parts = [f"m={self.m}", f"n={self.n}"]
        parts += [f"{c}=({getattr(self, c)[0]},{getattr(self, c)[1]})" for c in self.COUNTER_IDS]
        return " ".join(parts)


@dataclass(frozen=True)
class Recorded:
    event: TrialEvent
    duplicate: bool


class TrialLedger:
    """Single-writer trial ledger.

    Every event is kept in the log; duplicates are derived on the fly and
    never stored.
    """

    def __init__(self) -> None:
        self._log: list[Recorded] = []
        self._keys: set[tuple[Stage, str, OptLevel]] = set()
        self._tallies: dict[OptLevel, dict[str, int]] = {lvl: _zero_tally() for lvl in OptLevel}

    def __len__(self) -> int:
        return len(self._log)

    @property
    def position(self) -> int:
        return len(self._log)

    @property
    def last_sequence(self) -> Optional[int]:
        return self._log[-1].event.sequence if self._log else None

    def events(self) -> list[TrialEvent]:
        return [r.event for r in self._log]

    def entries(self) -> list[Recorded]:
        return list(self._log)

    def record(self, event: TrialEvent) -> Recorded:
        last = self.last_sequence
        if last is not None and event.sequence <= last:
            raise SequenceRegression(f"sequence {event.sequence} does not follow {last}", "sequence")
        duplicate = event.key in self._keys
        if not duplicate:
            self._keys.add(event.key)
            _tally(self._tallies[event.opt_level], event)
        rec = Recorded(event, duplicate)
        self._log.append(rec)
        return rec

    def counters(self, opt_level: OptLevel) -> CounterSet:
        t = self._tallies[OptLevel(opt_level)]
        return CounterSet(
            s1=(t["s1a"], t["s1b"]),
            s3=(t["s3a"], t["s3b"]),
            p1=(t["p1a"], t["n"] - t["p1a"]),
            p3=(t["p3a"], t["p3b"]),
            m=t["m"],
            n=t["n"],
        )

    def resolve(self, counter_id: str, opt_level: OptLevel) -> BetaParams:
        """Beta state of a counter-backed node; Beta(0, 0) when no evidence yet."""
        return self.counters(opt_level).beta_params(counter_id)

    def export_log(self) -> str:
        return "".join(r.event.to_json() + "\n" for r in self._log)


def _zero_tally() -> dict[str, int]:
    return dict.fromkeys(("m", "n", "s1a", "s1b", "s3a", "s3b", "p1a", "p3a", "p3b"), 0)


def _tally(t: dict[str, int], e: TrialEvent) -> None:
    f = e.facts
    t["m"] += 1
    if not e.stage.signs:
        return
    t["n"] += 1
    if f.holds("alice_signed"):
        t["s1a" if f.holds("sanitizer_rejected_source") else "s1b"] += 1
    if f.holds("q_signed_with_private_key"):
        if f.holds("signer_authenticated_as_alice"):
            t["s3a"] += 1
        elif f.holds("impostor_authenticated"):
            t["s3b"] += 1
    if f.holds("alice_issued_keypair"):
        t["p1a"] += 1
        t["p3a" if f.holds("private_key_known_only_to_alice") else "p3b"] += 1


def parse_log(lines: Iterable[str]) -> Iterator[TrialEvent]:
    for lineno, line in enumerate(lines, start=1):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorruptLog(f"invalid JSON: {e.msg}", lineno) from e
        try:
            yield TrialEvent.from_dict(doc)
        except SchemaError as e:
            raise CorruptLog(e.detail, lineno) from e


def replay(lines: Iterable[str]) -> TrialLedger:
    """Rebuild a ledger from JSON-lines text. Deterministic."""
    ledger = TrialLedger()
    if isinstance(lines, str):
        lines = lines.splitlines()
    lines = list(lines)
    for lineno, event in enumerate(parse_log(lines), start=1):
        try:
            ledger.record(event)
        except SchemaError as e:
            raise CorruptLog(e.detail, lineno) from e
    return ledger


def read_ledger(path: str | Path) -> TrialLedger:
    """Replay a log file. A missing log is an empty ledger."""
    path = Path(path)
    if not path.exists():
        return TrialLedger()
    return replay(path.read_text().splitlines())


@contextlib.contextmanager
def locked_log(path: str | Path):
    """Open ``path`` for append under an exclusive advisory lock.

    Yields ``(ledger, handle)`` where the ledger reflects the log as it was
    when the lock was taken.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a+") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        try:
            fh.seek(0)
            ledger = replay(fh.read().splitlines())
            yield ledger, fh
            fh.flush()
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
