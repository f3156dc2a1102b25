"""Decision, latency and ranking metrics for early risk detection runs."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from . import irmetrics
from .corpus import LABELS, POSITIVE

DEFAULT_PENALTY_P = 0.0078
CHECKPOINTS = (1, 100, 500, 1000)


@dataclass(frozen=True)
class EarlyRunResult:
    """Outcome for one user. ``k`` is the alarm post index, or posts seen if never alarmed."""

    nick: str
    gold: int
    final: int
    k: int
    score_history: tuple = ()

    def __post_init__(self):
        if self.final and (self.k < 1 or len(self.score_history) < self.k):
            raise ValueError(f"user {self.nick!r}: inconsistent alarm delay k={self.k}")


@dataclass(frozen=True)
class EarlyMetricsConfig:
    deadlines: tuple = (5, 50)
    c_fp: Optional[float] = None  # None: positive fraction of the evaluated users
    c_fn: float = 1.0
    c_tp: float = 1.0
    penalty_p: float = DEFAULT_PENALTY_P
    latency_mode: str = "median_penalty"  # or "median_k"

    def __post_init__(self):
        for name in ("c_fp", "c_fn", "c_tp"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if any(o < 1 for o in self.deadlines):
            raise ValueError("deadlines must be >= 1")
        if not self.penalty_p > 0:
            raise ValueError("penalty_p must be positive")
        if self.latency_mode not in ("median_penalty", "median_k"):
            raise ValueError(f"unknown latency_mode {self.latency_mode!r}")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class DecisionMetrics:
    precision: float
    recall: float
    f1: float
    erde: dict
    latency_tp: Optional[float]
    speed: float
    f_latency: float
    flags: tuple = field(default=())

    def as_row(self) -> dict:
        row = {"P": self.precision, "R": self.recall, "F1": self.f1}
        for o, v in sorted(self.erde.items()):
            row[f"ERDE_{o}"] = v
        row.update({"latencyTP": self.latency_tp, "speed": self.speed, "F_latency": self.f_latency})
        return row


@dataclass(frozen=True)
class RankingCheckpoint:
    k: int
    p_at_10: float
    ndcg_at_10: float
    ndcg_at_100: float


def _as_int_label(label) -> int:
    if label in LABELS:
        return int(label == POSITIVE)
    if label in (0, 1):
        return int(label)
    raise ValueError(f"unlabeled or invalid gold label {label!r}")


def confusion(results: Iterable[EarlyRunResult]) -> Confusion:
    tp = fp = fn = tn = 0
    for r in results:
        if r.gold not in (0, 1):
            raise ValueError(f"user {r.nick!r} is unlabeled")
        if r.final and r.gold:
            tp += 1
        elif r.final:
            fp += 1
        elif r.gold:
            fn += 1
        else:
            tn += 1
    return Confusion(tp, fp, fn, tn)


def precision_recall_f1(c: Confusion) -> tuple[float, float, float]:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def latency_cost(k: float, o: float) -> float:
    """Sigmoid cost of a correct alarm after k posts; 0.5 at the deadline o."""
    x = k - o
    # 1 - 1/(1+e^x), written to avoid overflow for large |x|
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def latency_penalty(k: float, p: float = DEFAULT_PENALTY_P) -> float:
    return -1.0 + 2.0 / (1.0 + math.exp(-p * (k - 1)))


def speed_from_latency(k: float, p: float = DEFAULT_PENALTY_P) -> float:
    return 1.0 - latency_penalty(k, p)


def _c_fp(results: Sequence[EarlyRunResult], cfg: EarlyMetricsConfig) -> float:
    if cfg.c_fp is not None:
        return cfg.c_fp
    return sum(r.gold for r in results) / len(results) if results else 0.0


def erde(results: Sequence[EarlyRunResult], o: int, cfg: EarlyMetricsConfig = EarlyMetricsConfig()) -> float:
    results = list(results)
    if not results:
        return 0.0
    c_fp = _c_fp(results, cfg)
    total = 0.0
    for r in results:
        if r.final and r.gold:
            total += latency_cost(r.k, o) * cfg.c_tp
        elif r.final:
            total += c_fp
        elif r.gold:
            total += cfg.c_fn
    return total / len(results)


def latency_speed_flatency(
    results: Sequence[EarlyRunResult], cfg: EarlyMetricsConfig = EarlyMetricsConfig(), f1: Optional[float] = None
) -> tuple[Optional[float], float, float]:
    """(latencyTP, speed, F_latency). With no true positives: (None, 0, 0)."""
    results = list(results)
    if f1 is None:
        f1 = precision_recall_f1(confusion(results))[2]
    ks = [r.k for r in results if r.final and r.gold]
    if not ks:
        return None, 0.0, 0.0
    latency = float(statistics.median(ks))
    if cfg.latency_mode == "median_k":
        speed = speed_from_latency(latency, cfg.penalty_p)
    else:
        speed = 1.0 - statistics.median(latency_penalty(k, cfg.penalty_p) for k in ks)
    return latency, speed, f1 * speed


def decision_report(results: Sequence[EarlyRunResult], cfg: EarlyMetricsConfig = EarlyMetricsConfig()) -> DecisionMetrics:
    results = list(results)
    c = confusion(results)
    p, r, f1 = precision_recall_f1(c)
    latency, speed, f_lat = latency_speed_flatency(results, cfg, f1)
    flags = () if latency is not None else ("no_true_positives",)
    return DecisionMetrics(
        precision=p, recall=r, f1=f1,
        erde={o: erde(results, o, cfg) for o in cfg.deadlines},
        latency_tp=latency, speed=speed, f_latency=f_lat, flags=flags,
    )


def ranking_at_checkpoint(score_histories: Mapping[str, Sequence[float]], gold: Mapping[str, object], k: int) -> RankingCheckpoint:
    """Rank users by their score after min(k, posts seen) posts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = []
    for nick, hist in score_histories.items():
        if hist:
            scored.append((nick, hist[min(k, len(hist)) - 1]))
    scored.sort(key=lambda t: (-t[1], t[0]))
    labels = {nick: _as_int_label(gold[nick]) for nick, _ in scored}
    rel = [labels[nick] for nick, _ in scored]
    n_rel = sum(rel)
    return RankingCheckpoint(
        k=k,
        p_at_10=irmetrics.precision_at_k(rel, 10),
        ndcg_at_10=irmetrics.ndcg_at_k(rel, n_rel, 10),
        ndcg_at_100=irmetrics.ndcg_at_k(rel, n_rel, 100),
    )


def results_from_traces(traces: Mapping[str, object], gold: Mapping[str, object]) -> list[EarlyRunResult]:
    """Build per-user results from replayed/live traces of one run.

    Each trace needs ``scores`` and ``alarm_round`` (1-based or None).
    """
    extra = sorted(set(traces) - set(gold))
    missing = sorted(set(gold) - set(traces))
    if extra or missing:
        raise ValueError(f"user sets differ between logs and gold: missing={missing[:10]} extra={extra[:10]}")
    out = []
    for nick in sorted(traces):
        t = traces[nick]
        alarmed = t.alarm_round is not None
        out.append(EarlyRunResult(
            nick=nick,
            gold=_as_int_label(gold[nick]),
            final=int(alarmed),
            k=t.alarm_round if alarmed else len(t.scores),
            score_history=tuple(t.scores),
        ))
    return out


def evaluate_run(traces: Mapping[str, object], gold: Mapping[str, object],
                 cfg: EarlyMetricsConfig = EarlyMetricsConfig(),
                 checkpoints: Sequence[int] = CHECKPOINTS) -> tuple[DecisionMetrics, list[RankingCheckpoint]]:
    results = results_from_traces(traces, gold)
    histories = {r.nick: r.score_history for r in results}
    return decision_report(results, cfg), [ranking_at_checkpoint(histories, gold, k) for k in checkpoints]


def format_duration(ms: float) -> str:
    """``"1 day + 2h:17m"`` style; the day part is omitted under 24 hours."""
    minutes_total = int(ms // 60000)
    days, rem = divmod(minutes_total, 24 * 60)
    hours, minutes = divmod(rem, 60)
    hm = f"{hours}h:{minutes}m"
    if days:
        return f"{days} day{'s' if days > 1 else ''} + {hm}"
    return hm


def timing_report(records: Iterable) -> dict:
    """Per run: rounds processed and total elapsed milliseconds.

    ``elapsed_ms`` repeats on every record of a (run, round); it is counted once.
    """
    per_round: dict = {}
    for rec in records:
        per_round[(rec.run, rec.round)] = rec.elapsed_ms
    out: dict = {}
    for (run, _), ms in sorted(per_round.items()):
        entry = out.setdefault(run, {"rounds": 0, "total_ms": 0})
        entry["rounds"] += 1
        entry["total_ms"] += ms
    for entry in out.values():
        entry["total"] = format_duration(entry["total_ms"])
    return out
