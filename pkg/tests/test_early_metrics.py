import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from erisklab import irmetrics
from erisklab.early_metrics import (
    Confusion,
    EarlyMetricsConfig,
    EarlyRunResult,
    decision_report,
    erde,
    evaluate_run,
    f1_score,
    format_duration,
    latency_cost,
    latency_penalty,
    latency_speed_flatency,
    precision_recall_f1,
    ranking_at_checkpoint,
    results_from_traces,
    speed_from_latency,
    timing_report,
)
from erisklab.stream_protocol import RunLogRecord, UserTrace


def R(nick, gold, final, k=1, n=None):
    n = max(k, n or k)
    return EarlyRunResult(nick, gold, final, k, (0.5,) * n)


def test_f1_examples():
    assert round(f1_score(0.752, 0.767), 3) == 0.759  # printed 0.760 in the source table
    assert abs(f1_score(0.752, 0.767) - 0.760) <= 0.001
    assert round(f1_score(0.79, 0.806), 3) == 0.798
    assert precision_recall_f1(Confusion(0, 0, 5, 5)) == (0.0, 0.0, 0.0)


def test_erde_examples():
    assert latency_cost(5, 5) == 0.5
    assert erde([R("a", 1, 1, 5)], 5) == 0.5
    corpus = [R(f"p{i}", 1, 0) for i in range(103)] + [R(f"n{i}", 0, 0) for i in range(2174 - 103)]
    assert erde(corpus, 5) == erde(corpus, 50) == pytest.approx(103 / 2174)
    assert round(erde(corpus, 5), 4) == 0.0474
    assert erde([R("n", 0, 0)] * 3, 5) == 0.0


def test_erde_false_positive_cost_is_positive_fraction():
    results = [R("p", 1, 0), R("n1", 0, 1), R("n2", 0, 0), R("n3", 0, 0)]
    assert erde(results, 5) == pytest.approx((1 + 0.25) / 4)
    assert erde(results, 5, EarlyMetricsConfig(c_fp=0.5)) == pytest.approx(1.5 / 4)


def test_speed_examples():
    assert round(speed_from_latency(15), 3) == 0.945
    assert abs(0.760 * speed_from_latency(15) - 0.718) <= 0.001
    assert round(f1_score(0.752, 0.767) * speed_from_latency(15), 3) == 0.718
    assert round(speed_from_latency(4), 3) == 0.988
    assert abs(0.938 * speed_from_latency(4) - 0.927) <= 0.001
    assert latency_penalty(1) == 0.0
    lat, speed, fl = latency_speed_flatency([R("a", 1, 1, 1), R("b", 1, 1, 1)])
    assert (lat, speed) == (1, 1.0)
    assert fl == 1.0


@given(st.integers(-200, 200), st.integers(1, 100))
def test_latency_cost_monotone(k, o):
    assert latency_cost(k, o) < latency_cost(k + 1, o) or latency_cost(k, o) == 1.0
    assert 0.0 <= latency_cost(k, o) <= 1.0


def test_latency_cost_extremes():
    assert latency_cost(10_000, 5) == 1.0
    assert latency_cost(-10_000, 5) == 0.0


# strictly increasing until the sigmoid saturates in double precision
@given(st.integers(1, 2000))
def test_penalty_range(k):
    assert 0.0 <= latency_penalty(k) < latency_penalty(k + 1) < 1.0
    assert -1.0 < speed_from_latency(k) <= 1.0


def test_even_tp_count_modes():
    results = [R("a", 1, 1, 1), R("b", 1, 1, 101)]
    lat, speed, _ = latency_speed_flatency(results)
    assert lat == 51
    assert speed == pytest.approx(1 - (latency_penalty(1) + latency_penalty(101)) / 2)
    _, speed_k, _ = latency_speed_flatency(results, EarlyMetricsConfig(latency_mode="median_k"))
    assert speed_k == pytest.approx(speed_from_latency(51))
    assert speed != speed_k
    with pytest.raises(ValueError):
        EarlyMetricsConfig(latency_mode="mean")


def test_no_true_positive_flag():
    m = decision_report([R("p", 1, 0), R("n", 0, 1)])
    assert m.latency_tp is None
    assert (m.speed, m.f_latency, m.f1) == (0.0, 0.0, 0.0)
    assert "no_true_positives" in m.flags


def test_planted_outcomes_report():
    results = [R("tp1", 1, 1, 3, 10), R("tp2", 1, 1, 7, 10), R("tp3", 1, 1, 11, 20), R("fn", 1, 0, 15),
               R("fp", 0, 1, 2, 5), R("tn1", 0, 0, 9), R("tn2", 0, 0, 9), R("tn3", 0, 0, 9)]
    m = decision_report(results)
    assert (m.precision, m.recall) == (0.75, 0.75)
    assert m.f1 == 0.75
    assert m.latency_tp == 7
    assert m.speed == 1 - latency_penalty(7)
    assert m.f_latency == m.f1 * m.speed
    expected5 = (latency_cost(3, 5) + latency_cost(7, 5) + latency_cost(11, 5) + 1 + 0.5) / 8
    assert m.erde[5] == pytest.approx(expected5)
    assert list(m.as_row()) == ["P", "R", "F1", "ERDE_5", "ERDE_50", "latencyTP", "speed", "F_latency"]


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(1, 60)), min_size=1, max_size=30),
       st.randoms())
def test_permutation_invariance(rows, rnd):
    results = [R(f"u{i}", g, f, k) for i, (g, f, k) in enumerate(rows)]
    shuffled = results[:]
    rnd.shuffle(shuffled)
    a, b = decision_report(results), decision_report(shuffled)
    assert (a.precision, a.recall, a.f1, a.latency_tp, a.speed) == (b.precision, b.recall, b.f1, b.latency_tp, b.speed)
    for o in a.erde:
        assert a.erde[o] == pytest.approx(b.erde[o], abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(1, 60)), min_size=1, max_size=20),
       st.integers(0, 19), st.integers(1, 50))
def test_delaying_tp_never_lowers_erde(rows, idx, delay):
    results = [R(f"u{i}", g, f, k) for i, (g, f, k) in enumerate(rows)]
    i = idx % len(results)
    r = results[i]
    if not (r.gold and r.final):
        return
    later = results[:i] + [R(r.nick, 1, 1, r.k + delay)] + results[i + 1:]
    missed = results[:i] + [R(r.nick, 1, 0, r.k)] + results[i + 1:]
    for o in (5, 50):
        assert erde(later, o) >= erde(results, o)
        assert erde(missed, o) >= erde(results, o)


def test_checkpoint_hand_ndcg():
    scores = [0.95, 0.9, 0.85, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2]
    positives = {0, 2, 5}
    histories = {f"u{i}": [s] for i, s in enumerate(scores)}
    gold = {f"u{i}": int(i in positives) for i in range(10)}
    cp = ranking_at_checkpoint(histories, gold, 1)
    dcg = 1 / math.log2(2) + 1 / math.log2(4) + 1 / math.log2(7)
    idcg = 1 / math.log2(2) + 1 / math.log2(3) + 1 / math.log2(4)
    assert cp.ndcg_at_10 == pytest.approx(dcg / idcg, abs=1e-12)
    assert abs(cp.ndcg_at_10 - 0.8710785) < 1e-6
    assert cp.p_at_10 == pytest.approx(0.3)


def test_checkpoint_uses_score_after_k_posts():
    histories = {"p": [0.1, 0.9, 0.9], "n": [0.5, 0.2]}
    gold = {"p": 1, "n": 0}
    assert ranking_at_checkpoint(histories, gold, 1).ndcg_at_10 < 1.0
    assert ranking_at_checkpoint(histories, gold, 2).ndcg_at_10 == 1.0
    assert ranking_at_checkpoint(histories, gold, 1000).ndcg_at_10 == 1.0


def test_checkpoint_perfect_separation():
    histories = {f"p{i}": [0.9] for i in range(12)} | {f"n{i}": [0.1] for i in range(30)}
    gold = {n: int(n.startswith("p")) for n in histories}
    cp = ranking_at_checkpoint(histories, gold, 100)
    assert cp.p_at_10 == cp.ndcg_at_10 == cp.ndcg_at_100 == 1.0


def test_results_from_traces_and_user_set_check():
    traces = {"a": UserTrace([0.9, 0.9], [0, 1]), "b": UserTrace([0.1], [0])}
    res = results_from_traces(traces, {"a": "positive", "b": "negative"})
    assert [(r.nick, r.final, r.k) for r in res] == [("a", 1, 2), ("b", 0, 1)]
    with pytest.raises(ValueError, match="missing=\\['c'\\]"):
        results_from_traces(traces, {"a": 1, "b": 0, "c": 0})
    with pytest.raises(ValueError):
        results_from_traces(traces, {"a": 1, "b": None})


def test_evaluate_run_default_checkpoints():
    traces = {"a": UserTrace([0.9], [1]), "b": UserTrace([0.1], [0])}
    m, cps = evaluate_run(traces, {"a": 1, "b": 0})
    assert m.f1 == 1.0
    assert [c.k for c in cps] == [1, 100, 500, 1000]


def test_format_duration():
    assert format_duration(3_600_000) == "1h:0m"
    assert format_duration(0) == "0h:0m"
    assert format_duration((24 * 60 + 2 * 60 + 17) * 60_000) == "1 day + 2h:17m"
    assert format_duration(3 * 24 * 3_600_000) == "3 days + 0h:0m"


def test_timing_report():
    recs = [RunLogRecord(0, r, n, 0, 0.1, 1_200_000) for r in range(3) for n in ("a", "b")]
    t = timing_report(recs)
    assert t[0]["rounds"] == 3
    assert t[0]["total_ms"] == 3_600_000
    assert t[0]["total"] == "1h:0m"
    assert timing_report([]) == {}


def test_shared_metric_definitions():
    rel = [1, 0, 1, 0, 0, 1, 0, 0, 0, 0]
    assert irmetrics.ndcg_at_k(rel, 3, 10) == pytest.approx(0.8710785, abs=1e-6)
