"""Recovery metrics and report rendering.

Gate-error percentages GE0/GE1/GE2 count anchors whose predicted snapshot has
that many wrong gate types and zero link errors; the R score weights them
1 / 0.66 / 0.33. Per-level recovery fractions print as "pct (num/den)", and an
empty level renders as "NAN (0/0)".
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .netlist import NetlistError

REPORT_SCHEMA = "sail-report/1"

R_WEIGHTS = (1.0, 0.66, 0.33)

CSV_COLUMNS = (
    ["circuit", "anchors", "ge0", "ge1", "ge2", "r_metric", "l1_rec", "l2_rec", "l3_rec"]
    + [f"cp_acc_n{n}" for n in range(3, 11)]
    + ["heuristic", "key_ratio"]
)


def r_metric(ge0: float, ge1: float, ge2: float) -> float:
    """Weighted recovery score over gate-error percentages at link error 0."""
    for v in (ge0, ge1, ge2):
        if not 0.0 <= v <= 100.0:
            raise NetlistError(f"gate-error percentage {v!r} outside [0, 100]")
    return ge0 * R_WEIGHTS[0] + ge1 * R_WEIGHTS[1] + ge2 * R_WEIGHTS[2]


@dataclass
class RecoveryRow:
    circuit: str
    anchors: int
    ge: tuple[float, float, float]  # percentages at link error 0
    r: float
    levels: dict  # level -> (complete, total)
    cp_acc: dict = field(default_factory=dict)  # locality size -> percent
    heuristic: str = "rnd"
    key_ratio: float = 1.0

    def level_cell(self, level: int) -> str:
        num, den = self.levels.get(level, (0, 0))
        if den == 0:
            return "NAN (0/0)"
        return f"{100.0 * num / den:.2f} ({num}/{den})"

    def to_json(self) -> dict:
        return {
            "circuit": self.circuit,
            "anchors": self.anchors,
            "ge0": round(self.ge[0], 2),
            "ge1": round(self.ge[1], 2),
            "ge2": round(self.ge[2], 2),
            "r_metric": round(self.r, 2),
            "levels": {
                str(k): {"complete": v[0], "total": v[1]} for k, v in self.levels.items()
            },
            "cp_acc": {str(k): round(v, 2) for k, v in self.cp_acc.items()},
            "heuristic": self.heuristic,
            "key_ratio": self.key_ratio,
        }


def aggregate(
    results: list,
    circuit: str,
    cp_acc: dict | None = None,
    heuristic: str = "rnd",
    key_ratio: float = 1.0,
) -> RecoveryRow:
    """Fold per-anchor attack results (with truth diffs) into one table row."""
    if not results:
        raise NetlistError("no results to aggregate")
    if any(r.diff is None for r in results):
        raise NetlistError("results are missing truth diffs")
    n = len(results)
    ge = []
    for k in range(3):
        hits = sum(1 for r in results if r.diff.gate_error == k and r.diff.link_error == 0)
        ge.append(100.0 * hits / n)
    levels = {}
    for level in (1, 2, 3):
        pool = [r for r in results if r.level == level]
        complete = sum(1 for r in pool if r.diff == type(r.diff)(0, 0))
        levels[level] = (complete, len(pool))
    return RecoveryRow(
        circuit=circuit,
        anchors=n,
        ge=tuple(ge),
        r=r_metric(*ge),
        levels=levels,
        cp_acc=dict(cp_acc or {}),
        heuristic=heuristic,
        key_ratio=key_ratio,
    )


def render_csv(rows: list[RecoveryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        record = [
            row.circuit,
            row.anchors,
            f"{row.ge[0]:.2f}",
            f"{row.ge[1]:.2f}",
            f"{row.ge[2]:.2f}",
            f"{row.r:.2f}",
            row.level_cell(1),
            row.level_cell(2),
            row.level_cell(3),
        ]
        record += [f"{row.cp_acc[n]:.2f}" if n in row.cp_acc else "" for n in range(3, 11)]
        record += [row.heuristic, f"{row.key_ratio:g}"]
        w.writerow(record)
    return buf.getvalue()


def render_json(rows: list[RecoveryRow], config: dict | None = None) -> str:
    doc = {
        "schema": REPORT_SCHEMA,
        "config": config or {},
        "rows": [row.to_json() for row in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def emit_report(rows: list[RecoveryRow], path, fmt: str = "csv", config: dict | None = None):
    """Write the table as CSV or schema-versioned JSON; returns the path."""
    if fmt == "csv":
        text = render_csv(rows)
    elif fmt == "json":
        text = render_json(rows, config)
    else:
        raise NetlistError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return path
