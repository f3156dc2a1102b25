"""Per-user streaming decisions: the historic rule and the posts window."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .textprep import truncate_tokens


@dataclass(frozen=True)
class HistoricRuleParams:
    threshold: float = 0.7
    m: int = 10
    min_delay: int = 10

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if self.min_delay < 1:
            raise ValueError(f"min_delay must be >= 1, got {self.min_delay}")

    @property
    def earliest_alarm(self) -> int:
        return max(self.min_delay, self.m + 1)


@dataclass(frozen=True)
class WindowConfig:
    n: int = 10
    token_budget: int = 512

    def __post_init__(self):
        if self.n < 1 or self.token_budget < 1:
            raise ValueError("window n and token_budget must be >= 1")


@dataclass(frozen=True)
class UserDecisionState:
    nick: str
    scores: tuple = ()
    alarmed: bool = False
    alarm_round: Optional[int] = None

    def __post_init__(self):
        if self.alarmed != (self.alarm_round is not None):
            raise ValueError("alarm_round must be set exactly when alarmed")
        if self.alarm_round is not None and not 1 <= self.alarm_round <= len(self.scores):
            raise ValueError("alarm_round outside the observed rounds")


@dataclass(frozen=True)
class Decision:
    value: int
    score: float


def build_window(history: Sequence[str], current_round: int, w: WindowConfig = WindowConfig()) -> str:
    """Current post followed by up to n-1 earlier posts, newest first.

    ``history`` holds normalized post texts; ``current_round`` is 1-based.
    """
    if not 1 <= current_round <= len(history):
        raise ValueError(f"round {current_round} outside 1..{len(history)}")
    start = max(0, current_round - w.n)
    posts = history[start:current_round][::-1]
    return truncate_tokens(" ".join(p for p in posts if p), w.token_budget)


def _fires(scores: Sequence[float], p: HistoricRuleParams) -> bool:
    r = len(scores)
    if r < p.min_delay or r < p.m + 1:
        return False
    return all(s > p.threshold for s in scores[r - p.m - 1:])


def observe(s: UserDecisionState, score: float, p: HistoricRuleParams) -> tuple[UserDecisionState, Decision]:
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} out of range [0, 1]")
    scores = s.scores + (score,)
    if s.alarmed:
        return replace(s, scores=scores), Decision(1, score)
    if _fires(scores, p):
        return UserDecisionState(s.nick, scores, True, len(scores)), Decision(1, score)
    return replace(s, scores=scores), Decision(0, score)


def finalize(s: UserDecisionState) -> int:
    return int(s.alarmed)


@dataclass(frozen=True)
class PolicyConfig:
    rule: HistoricRuleParams = field(default_factory=HistoricRuleParams)
    window: WindowConfig = field(default_factory=WindowConfig)

    def to_dict(self) -> dict:
        return {
            "type": "historic",
            "threshold": self.rule.threshold,
            "m": self.rule.m,
            "min_delay": self.rule.min_delay,
            "window": {"n": self.window.n, "token_budget": self.window.token_budget},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        kind = d.get("type", "historic")
        if kind != "historic":
            raise ValueError(f"unsupported policy type {kind!r}")
        defaults = HistoricRuleParams()
        rule = HistoricRuleParams(
            threshold=float(d.get("threshold", defaults.threshold)),
            m=int(d.get("m", defaults.m)),
            min_delay=int(d.get("min_delay", defaults.min_delay)),
        )
        win = d.get("window") or {}
        window = WindowConfig(n=int(win.get("n", 10)), token_budget=int(win.get("token_budget", 512)))
        return cls(rule, window)

    @classmethod
    def load(cls, path) -> "PolicyConfig":
        with Path(path).open(encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
