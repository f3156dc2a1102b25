"""Append-only JSONL run logs and their replay into per-user traces."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional


class RunLogError(ValueError):
    pass


@dataclass(frozen=True)
class RunLogRecord:
    run: int
    round: int
    nick: str
    decision: int
    score: float
    elapsed_ms: int = 0

    def __post_init__(self):
        if self.elapsed_ms < 0:
            raise RunLogError(f"negative elapsed_ms for {self.nick!r}")
        if self.decision not in (0, 1):
            raise RunLogError(f"decision must be 0 or 1, got {self.decision!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunLogRecord":
        return cls(
            run=int(d["run"]), round=int(d["round"]), nick=str(d["nick"]),
            decision=int(d["decision"]), score=float(d["score"]),
            elapsed_ms=int(d.get("elapsed_ms", 0)),
        )


@dataclass
class UserTrace:
    """Scores and decisions of one user in one run, one entry per round."""

    scores: list
    decisions: list

    @property
    def alarm_round(self) -> Optional[int]:
        for i, d in enumerate(self.decisions, start=1):
            if d:
                return i
        return None


def append_records(path, records: Iterable[RunLogRecord]) -> None:
    """Write a batch with a single write call and fsync it."""
    data = "".join(r.to_json() + "\n" for r in records)
    if not data:
        return
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())


def export_run_logs(records: Iterable[RunLogRecord], path) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in records), encoding="utf-8")


def read_records(path) -> list[RunLogRecord]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(RunLogRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise RunLogError(f"{path}:{lineno}: corrupt run log record ({exc})") from exc
    return out


def traces_from_records(records: Iterable[RunLogRecord]) -> dict:
    """``{run: {nick: UserTrace}}``; rounds must arrive in order per user."""
    runs: dict = {}
    for rec in records:
        trace = runs.setdefault(rec.run, {}).setdefault(rec.nick, UserTrace([], []))
        if rec.round != len(trace.scores):
            raise RunLogError(
                f"run {rec.run} user {rec.nick!r}: round {rec.round} out of sequence "
                f"(expected {len(trace.scores)})"
            )
        trace.scores.append(rec.score)
        trace.decisions.append(rec.decision)
    return runs


def replay_run_logs(path) -> dict:
    return traces_from_records(read_records(path))
