"""Command-line interface.

Verbs: validate, record, eval, simulate, report.

Exit codes (same for every verb):
    0  success
    2  schema or validation error
    3  I/O error
    4  insufficient evidence
    5  fixed-point iteration did not converge

The workspace root comes from $TOOLCHAIN_ASSURANCE_HOME, falling back to the
current directory. Inside it the defaults are case.json, events.jsonl and
out/. Explicit flags always win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from toolchain_assurance import _schema, history
from toolchain_assurance.beta_logic import BetaParams
from toolchain_assurance.case import (
    Classification,
    FixedPrior,
    evaluate_strength,
    load_case,
    read_case,
    reclassify,
    source_resolver,
)
from toolchain_assurance.completeness import (
    AssessmentStore,
    export_trace,
    fixed_point,
    freeze,
    read_scenario,
)
from toolchain_assurance.errors import (
    AssuranceError,
    InsufficientEvidence,
    NonConvergence,
    SchemaError,
)
from toolchain_assurance.ledger import (
    OptLevel,
    Stage,
    TrialEvent,
    TrialFacts,
    locked_log,
    read_ledger,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_IO = 3
EXIT_INSUFFICIENT = 4
EXIT_NONCONVERGENCE = 5

ENV_HOME = "TOOLCHAIN_ASSURANCE_HOME"

# initial completeness prior for the sanitizer node when none is declared
DEFAULT_S2_PRIOR = BetaParams(19, 43)
S2_NODE = "s2"


@dataclass(frozen=True)
class Workspace:
    case: Path
    log: Path
    out: Path

    @property
    def history(self) -> Path:
        return self.out / "history.csv"

    @property
    def frozen(self) -> AssessmentStore:
        return AssessmentStore(self.out / "frozen")

    @classmethod
    def resolve(cls, args: argparse.Namespace, environ: Optional[dict] = None) -> Workspace:
        environ = os.environ if environ is None else environ
        root = Path(environ.get(ENV_HOME) or ".")
        case = Path(args.case) if args.case else root / "case.json"
        log = Path(args.log) if args.log else root / "events.jsonl"
        out = Path(args.out) if args.out else root / "out"
        return cls(case.resolve(), log.resolve(), out.resolve())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "y"):
        return True
    if low in ("0", "false", "no", "n"):
        return False
    raise SchemaError(f"not a boolean: {text!r}", "fact")


def _print_err(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- verbs --------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace, ws: Workspace) -> int:
    path = Path(args.path) if args.path else ws.case
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}") from e
    found = _schema.diagnostics(doc, "case")
    if found:
        _print_err(f"{path}: {len(found)} schema error(s)")
        for p, msg in found:
            _print_err(f"  [{p}] {msg}")
        return EXIT_SCHEMA
    case = load_case(doc)
    print(f"OK: {path}")
    print(f"  root {case.root_id}; conjunction [{', '.join(case.conjunction)}]; "
          f"uncontrolled [{', '.join(case.uncontrolled_ids)}]")
    return EXIT_OK


def _event_from_args(args: argparse.Namespace, next_sequence: int) -> TrialEvent:
    if args.event is not None:
        raw = sys.stdin.read() if args.event == "-" else Path(args.event).read_text()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON event: {e.msg}") from e
        if not isinstance(doc, dict):
            raise SchemaError("event document must be an object")
        doc = dict(doc)
        doc.setdefault("sequence", next_sequence)
        doc.setdefault("opt_level", OptLevel.parse(args.opt_level or "o0").value)
        return TrialEvent.from_dict(doc)
    if not args.stage or not args.input_id:
        raise SchemaError("record needs --stage and --input-id, or --event")
    facts = {}
    for item in args.fact or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise SchemaError(f"fact must be NAME=true|false, got {item!r}", "fact")
        facts[name] = _bool(value)
    try:
        tf = TrialFacts(**facts)
    except TypeError as e:
        raise SchemaError(f"unknown fact in {sorted(facts)}", "facts") from e
    seq = args.sequence if args.sequence is not None else next_sequence
    return TrialEvent(
        stage=Stage(args.stage),
        input_id=args.input_id,
        opt_level=OptLevel.parse(args.opt_level or "o0"),
        facts=tf,
        sequence=seq,
    )


def cmd_record(args: argparse.Namespace, ws: Workspace) -> int:
    with locked_log(ws.log) as (ledger, fh):
        last = ledger.last_sequence
        event = _event_from_args(args, 0 if last is None else last + 1)
        rec = ledger.record(event)
        fh.write(event.to_json() + "\n")
    counters = ledger.counters(event.opt_level)
    if rec.duplicate:
        print("duplicate, counters unchanged")
    else:
        print(f"recorded, n={counters.n}")
    print(f"{event.opt_level.value}: {counters.summary()}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, ws: Workspace) -> int:
    case = read_case(ws.case)
    document_controlled = case.conjunction
    for node_id in args.uncontrolled or []:
        case = reclassify(case, node_id, Classification.UNCONTROLLED)
    level = OptLevel.parse(args.opt_level or "o0")
    ledger = read_ledger(ws.log)
    store = ws.frozen

    overrides = {}
    source = args.s2_source or "declared"
    if args.s2_source is not None:
        if S2_NODE not in case.conjunction:
            raise SchemaError(f"--s2-source given but node {S2_NODE!r} is not controlled in the case")
        if args.s2_source == "prior":
            ev = case.node(S2_NODE).evidence
            overrides[S2_NODE] = ev.params if isinstance(ev, FixedPrior) else DEFAULT_S2_PRIOR
        elif args.s2_source.startswith("frozen:"):
            ident = args.s2_source[len("frozen:"):]
            try:
                overrides[S2_NODE] = store.beta(ident)
            except KeyError:
                raise SchemaError(f"no frozen assessment {ident!r} in {store.directory}", "--s2-source") from None
        else:
            raise SchemaError("--s2-source must be 'prior' or 'frozen:<id>'", "--s2-source")

    resolve = source_resolver(
        case,
        counter=lambda cid: ledger.resolve(cid, level),
        tracker=store.beta,
        overrides=overrides,
    )
    report = evaluate_strength(case, resolve, evaluated_at=ledger.position)

    print(f"root {case.root_id} at log position {report.evaluated_at} ({level.value})")
    print(f"strength   {report.strength:.6f}")
    print(f"confidence {report.confidence_variance:.6g} (variance)")
    print(f"uncontrolled: {', '.join(report.uncontrolled_ids)}")
    for nid in report.conjunction:
        p, m = report.per_node_params[nid], report.per_node_moments[nid]
        print(f"  {nid:<6} {str(p):<18} mean {m.mean:.6f}  var {m.variance:.6g}")

    row = history.row_from_report(report, level.value, source)
    history.append_row(ws.history, document_controlled, row)
    print(history.render_csv(document_controlled, [row], header=False), end="")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, ws: Workspace) -> int:
    state, max_iter = read_scenario(args.scenario)
    if args.max_iter is not None:
        max_iter = args.max_iter
    try:
        run = fixed_point(state, max_iter)
    except NonConvergence as e:
        _print_err(f"non-convergence: {e}")
        _print_err("UB counts: " + " ".join(str(c) for c in e.ub_counts))
        return EXIT_NONCONVERGENCE
    ws.out.mkdir(parents=True, exist_ok=True)
    trace_path = ws.out / f"trace-{state.project}.jsonl"
    trace_path.write_text(export_trace(run.trace))
    frozen = freeze(run.state)
    frozen_path = ws.frozen.put(frozen)
    print(f"project {state.project}: fixed point after {run.steps} step(s)")
    print("UB counts: " + " ".join(str(c) for c in run.ub_counts))
    print(f"prior {state.beta} -> final {run.state.beta}")
    print(f"frozen probability {frozen.probability:.6f}")
    print(f"trace  {trace_path}")
    print(f"frozen {frozen_path} (use --s2-source frozen:{frozen.project})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace, ws: Workspace) -> int:
    path = ws.history
    if not path.exists():
        _print_err(f"no evaluation history at {path}")
        return EXIT_INSUFFICIENT
    node_ids, rows = history.parse_csv(path.read_text())
    if not rows:
        _print_err(f"evaluation history at {path} is empty")
        return EXIT_INSUFFICIENT
    if args.format == "csv":
        text = history.render_csv(node_ids, rows)
    else:
        text = history.render_text(node_ids, rows)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--case", default=default, help="case document (JSON)")
    p.add_argument("--log", default=default, help="event log (JSON lines)")
    p.add_argument("--opt-level", default=default, help="o0 or o123 (default o0)")
    p.add_argument("--out", default=default, help="report output directory")
    p.add_argument("--s2-source", default=default, help="'prior' or 'frozen:<id>'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolchain-assurance",
        description="Quantitative toolchain assurance cases as process reductions.",
    )
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate a case document")
    p.add_argument("path", nargs="?", help="case document (defaults to --case)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("record", parents=[common], help="append a trial event")
    p.add_argument("--stage", choices=[s.value for s in Stage])
    p.add_argument("--input-id")
    p.add_argument("--fact", action="append", metavar="NAME=BOOL")
    p.add_argument("--sequence", type=int)
    p.add_argument("--event", metavar="FILE", help="event JSON document, '-' for stdin")
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("eval", parents=[common], help="evaluate reduction strength")
    p.add_argument(
        "--uncontrolled", action="append", metavar="NODE", help="treat NODE as uncontrolled for this evaluation"
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", parents=[common], help="run the H fixed-point iteration on a scenario")
    p.add_argument("scenario")
    p.add_argument("--max-iter", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="render the evaluation history")
    p.add_argument("--format", choices=["csv", "text"], default="text")
    p.add_argument("--output", help="write to FILE instead of stdout")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ws = Workspace.resolve(args)
        return args.func(args, ws)
    except SchemaError as e:
        _print_err(f"{type(e).__name__}: {e}")
        return EXIT_SCHEMA
    except InsufficientEvidence as e:
        _print_err(f"InsufficientEvidence: {e}")
        return EXIT_INSUFFICIENT
    except NonConvergence as e:
        _print_err(f"NonConvergence: {e}")
        return EXIT_NONCONVERGENCE
    except OSError as e:
        _print_err(f"I/O error: {e}")
        return EXIT_IO
    except (AssuranceError, ValueError) as e:
        _print_err(f"{type(e).__name__}: {e}")
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
