"""CSV / Markdown rendering of the result tables."""
from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .early_metrics import DecisionMetrics, RankingCheckpoint

CORPUS_HEADER = ["Corpus", "Total", "Pos", "Neg", "#posts",
                 "Posts Med", "Posts Min", "Posts Max", "Words Med", "Words Min", "Words Max"]
RUN_HEADER = ["Run", "AP", "R-PREC", "P@10", "NDCG@1000"]
CHECKPOINT_HEADER = ["Ranking", "Metric", "Value"]
TIMING_HEADER = ["Run", "#posts processed", "Total time"]


def fmt(value, precision: int = 3) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.{precision}f}"
    return str(value)


class Table:
    def __init__(self, header: Sequence[str], rows: Iterable[Sequence] = ()):
        self.header = list(header)
        self.rows = [list(r) for r in rows]

    def cells(self, precision: int = 3) -> list[list[str]]:
        return [[fmt(v, precision) for v in row] for row in self.rows]

    def to_csv(self, precision: int = 3) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.cells(precision))
        return buf.getvalue()

    def to_markdown(self, precision: int = 3) -> str:
        def line(cells):
            return "| " + " | ".join(c.replace("|", "\\|") for c in cells) + " |"

        out = [line(self.header), "|" + "|".join("---" for _ in self.header) + "|"]
        out.extend(line(r) for r in self.cells(precision))
        return "\n".join(out) + "\n"

    def render(self, fmt_name: str = "csv", precision: int = 3) -> str:
        if fmt_name == "csv":
            return self.to_csv(precision)
        if fmt_name == "md":
            return self.to_markdown(precision)
        raise ValueError(f"unknown format {fmt_name!r}")


def parse_markdown(text: str) -> tuple[list[str], list[list[str]]]:
    """Inverse of :meth:`Table.to_markdown` (header, cell strings)."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]

    def cells(ln):
        body = ln.strip()[1:-1]
        return [c.strip().replace("\\|", "|") for c in re.split(r"(?<!\\)\|", body)]

    return cells(lines[0]), [cells(ln) for ln in lines[2:]]


def decision_table(metrics: DecisionMetrics | Sequence[DecisionMetrics]) -> Table:
    rows = [metrics] if isinstance(metrics, DecisionMetrics) else list(metrics)
    header = list(rows[0].as_row()) if rows else ["P", "R", "F1", "ERDE_5", "ERDE_50", "latencyTP", "speed", "F_latency"]
    return Table(header, [list(m.as_row().values()) for m in rows])


def checkpoint_table(checkpoints: Sequence[RankingCheckpoint]) -> Table:
    rows = []
    for cp in checkpoints:
        label = f"{cp.k} post" + ("s" if cp.k != 1 else "")
        rows += [[label, "P@10", cp.p_at_10], [label, "NDCG@10", cp.ndcg_at_10], [label, "NDCG@100", cp.ndcg_at_100]]
    return Table(CHECKPOINT_HEADER, rows)


def run_table(results: dict) -> Table:
    """Symptom-ranking summary: one row per run name from ``{name: evaluate_run(...) output}``."""
    return Table(RUN_HEADER, [[name] + [r["macro"][m] for m in RUN_HEADER[1:]] for name, r in results.items()])


def per_symptom_table(result: dict) -> Table:
    return Table(["Symptom"] + RUN_HEADER[1:],
                 [[row["symptom_id"]] + [row[m] for m in RUN_HEADER[1:]] for row in result["per_symptom"]])


def corpus_table(stats: Sequence) -> Table:
    return Table(CORPUS_HEADER, [list(s.as_row().values()) for s in stats])


def timing_table(timing: dict) -> Table:
    return Table(TIMING_HEADER, [[run, t["rounds"], t["total"]] for run, t in sorted(timing.items())])


def write_report(table: Table, path: Optional[str], fmt_name: str = "csv", precision: int = 3) -> str:
    text = table.render(fmt_name, precision)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    return text


def table_from_json(obj: dict) -> Table:
    """Rebuild a table from a ``{"header": [...], "rows": [[...]]}`` dump."""
    return Table(obj["header"], obj["rows"])


def table_to_json(table: Table) -> str:
    return json.dumps({"header": table.header, "rows": table.rows}, ensure_ascii=False)
