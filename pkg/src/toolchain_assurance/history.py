"""Strength-over-time history: one CSV row per evaluation.

Column order is fixed:

    position, opt_level, s2_source, uncontrolled, strength, variance,
    <node>_alpha, <node>_beta   for each node controlled in the case document

Reals are written with ``repr`` so a parse/render round trip is byte-exact.
Nodes reclassified as uncontrolled for an evaluation leave their cells empty.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from toolchain_assurance.beta_logic import BetaParams
from toolchain_assurance.case import ReductionReport
from toolchain_assurance.errors import SchemaError

FIXED_COLUMNS = ("position", "opt_level", "s2_source", "uncontrolled", "strength", "variance")


@dataclass(frozen=True)
class HistoryRow:
    position: int
    opt_level: str
    s2_source: str
    uncontrolled: tuple[str, ...]
    strength: float
    variance: float
    params: Mapping[str, Optional[BetaParams]] = field(default_factory=dict)


def columns(node_ids: Sequence[str]) -> list[str]:
    cols = list(FIXED_COLUMNS)
    for n in node_ids:
        cols += [f"{n}_alpha", f"{n}_beta"]
    return cols


def row_from_report(report: ReductionReport, opt_level: str, s2_source: str) -> HistoryRow:
    return HistoryRow(
        position=report.evaluated_at or 0,
        opt_level=opt_level,
        s2_source=s2_source,
        uncontrolled=tuple(report.uncontrolled_ids),
        strength=report.strength,
        variance=report.confidence_variance,
        params=dict(report.per_node_params),
    )


def _cells(row: HistoryRow, node_ids: Sequence[str]) -> list[str]:
    cells = [
        str(row.position),
        row.opt_level,
        row.s2_source,
        ";".join(row.uncontrolled),
        repr(row.strength),
        repr(row.variance),
    ]
    for n in node_ids:
        p = row.params.get(n)
        cells += ["", ""] if p is None else [repr(p.alpha), repr(p.beta)]
    return cells


def render_csv(node_ids: Sequence[str], rows: Sequence[HistoryRow], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(columns(node_ids))
    for r in rows:
        w.writerow(_cells(r, node_ids))
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[HistoryRow]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return [], []
    if tuple(header[: len(FIXED_COLUMNS)]) != FIXED_COLUMNS or (len(header) - len(FIXED_COLUMNS)) % 2:
        raise SchemaError("unrecognized history header", "history.csv line 1")
    node_ids = [c[: -len("_alpha")] for c in header[len(FIXED_COLUMNS) :: 2]]
    if header != columns(node_ids):
        raise SchemaError("unrecognized history header", "history.csv line 1")
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) != len(header):
            raise SchemaError(f"expected {len(header)} cells, got {len(cells)}", f"history.csv line {lineno}")
        params: dict[str, Optional[BetaParams]] = {}
        for k, n in enumerate(node_ids):
            a, b = cells[len(FIXED_COLUMNS) + 2 * k : len(FIXED_COLUMNS) + 2 * k + 2]
            if a or b:
                params[n] = BetaParams(float(a), float(b))
        rows.append(
            HistoryRow(
                position=int(cells[0]),
                opt_level=cells[1],
                s2_source=cells[2],
                uncontrolled=tuple(cells[3].split(";")) if cells[3] else (),
                strength=float(cells[4]),
                variance=float(cells[5]),
                params=params,
            )
        )
    return node_ids, rows


def append_row(path: str | Path, node_ids: Sequence[str], row: HistoryRow) -> None:
    path = Path(path)
    if path.exists() and path.stat().st_size > 0:
        with open(path) as fh:
            first = fh.readline().rstrip("\n")
        if first != ",".join(columns(node_ids)):
            raise SchemaError(
                "history was written for a different case; use another --out directory", str(path)
            )
        text = render_csv(node_ids, [row], header=False)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        text = render_csv(node_ids, [row])
    with open(path, "a") as fh:
        fh.write(text)


def render_text(node_ids: Sequence[str], rows: Sequence[HistoryRow]) -> str:
    head = ["position", "opt", "s2_source", "uncontrolled", "strength", "variance", *node_ids]
    body = []
    for r in rows:
        line = [
            str(r.position),
            r.opt_level,
            r.s2_source,
            ",".join(r.uncontrolled),
            f"{r.strength:.6f}",
            f"{r.variance:.6g}",
        ]
        for n in node_ids:
            p = r.params.get(n)
            line.append("-" if p is None else f"{p.alpha:g}:{p.beta:g}")
        body.append(line)
    widths = [max(len(row[i]) for row in [head, *body]) for i in range(len(head))]
    out = []
    for row in [head, *body]:
        out.append("  ".join(c.rjust(w) if i >= 4 else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))).rstrip())
    return "\n".join(out) + "\n"
