"""Risk scorers: text -> probability that the author is at risk.

Any object with ``score(text) -> float in [0, 1]`` is a scorer. Scorers may
also provide ``score_batch([(id, text), ...]) -> [(id, p), ...]``; the client
uses it when present.
"""
from __future__ import annotations

import json
import math
import subprocess
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_texts
from .corpus import Corpus, CorpusError, iter_labeled
from .textprep import DEFAULT_NORMALIZATION, NormalizationConfig, SentimentLexicon, user_document


class RiskScorer(Protocol):
    def score(self, text: str) -> float: ...


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass(frozen=True)
class WordConfidenceModel:
    """Smoothed per-token log-odds of the positive class."""

    weights: dict
    n_pos_tokens: int
    n_neg_tokens: int
    vocab_size: int
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.vocab_size < len(self.weights):
            raise ValueError("vocab_size smaller than the number of weights")
        bad = [t for t, w in self.weights.items() if not math.isfinite(w)]
        if bad:
            raise ValueError(f"non-finite weights for {bad[:5]}")

    def score(self, text: str) -> float:
        return score_document(self, text)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "vocab_size": self.vocab_size,
            "n_pos_tokens": self.n_pos_tokens,
            "n_neg_tokens": self.n_neg_tokens,
            "weights": self.weights,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WordConfidenceModel":
        return cls(
            weights={str(k): float(v) for k, v in d["weights"].items()},
            n_pos_tokens=int(d["n_pos_tokens"]),
            n_neg_tokens=int(d["n_neg_tokens"]),
            vocab_size=int(d["vocab_size"]),
            alpha=float(d.get("alpha", 1.0)),
        )

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "WordConfidenceModel":
        with Path(path).open(encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_word_confidence(docs: Sequence[str], y: Sequence[int], alpha: float = 1.0) -> WordConfidenceModel:
    """Log-odds weights from tokenized documents and 0/1 labels."""
    pos, neg = Counter(), Counter()
    for doc, label in zip(docs, y):
        (pos if label else neg).update(doc.split())
    if not any(y) or all(y):
        raise ValueError("training data must contain both classes")
    vocab = set(pos) | set(neg)
    V = len(vocab)
    n_pos, n_neg = sum(pos.values()), sum(neg.values())
    denom_pos = n_pos + alpha * V
    denom_neg = n_neg + alpha * V
    if denom_pos == 0 or denom_neg == 0:
        raise ValueError("a class has no tokens; use alpha > 0")
    weights = {}
    for w in sorted(vocab):
        p = (pos[w] + alpha) / denom_pos
        q = (neg[w] + alpha) / denom_neg
        if p == 0 or q == 0:
            raise ValueError(f"token {w!r} has zero probability in a class; use alpha > 0")
        weights[w] = math.log(p / q)
    return WordConfidenceModel(weights, n_pos, n_neg, V, alpha)


def train_word_confidence(
    train: Corpus,
    alpha: float = 1.0,
    lexicon: Optional[SentimentLexicon] = None,
    cfg: NormalizationConfig = DEFAULT_NORMALIZATION,
) -> WordConfidenceModel:
    """Train on one document per user: their normalized (negativity-selected) posts."""
    docs, y = [], []
    for user, label in iter_labeled(train):
        docs.append(user_document(user, lexicon, cfg))
        y.append(label)
    if not any(y) or all(y):
        raise CorpusError("training corpus needs at least one positive and one negative user")
    return fit_word_confidence(docs, y, alpha)


def score_document(m: WordConfidenceModel, text: str) -> float:
    tokens = text.split()
    if not tokens:
        return 0.5
    s = sum(m.weights.get(t, 0.0) for t in tokens) / len(tokens)
    return logistic(s)


def top_confidence_words(m: WordConfidenceModel, k: int = 40) -> list[str]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return [w for w, _ in sorted(m.weights.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


class WordConfidenceClassifier(BaseEstimator, ClassifierMixin):
    """Scikit-learn face of :class:`WordConfidenceModel`.

    ``X`` is a list of (already normalized) documents, ``y`` binary labels.
    """

    def __init__(self, alpha=1.0, threshold=0.5):
        self.alpha = alpha
        self.threshold = threshold

    def fit(self, X, y):
        X = check_texts(X)
        y = check_binary_labels(y, len(X))
        self.model_ = fit_word_confidence(X, y.tolist(), self.alpha)
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        w = self.model_.weights
        out = []
        for doc in check_texts(X):
            toks = doc.split()
            out.append(sum(w.get(t, 0.0) for t in toks) / len(toks) if toks else 0.0)
        return np.array(out)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        p = np.array([score_document(self.model_, d) for d in check_texts(X)])
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] > self.threshold).astype(int)


def f1_positive(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    tp = sum(1 for t, p in zip(y_true, y_pred) if t and p)
    fp = sum(1 for t, p in zip(y_true, y_pred) if not t and p)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t and not p)
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def select_best_model(
    candidates: Sequence[RiskScorer],
    valid: Corpus,
    lexicon: Optional[SentimentLexicon] = None,
    budget: int = 512,
    threshold: float = 0.5,
    cfg: NormalizationConfig = DEFAULT_NORMALIZATION,
) -> int:
    """Index of the candidate with the best positive-class F1 on ``valid``."""
    if not candidates:
        raise ValueError("no candidate models")
    labeled = list(iter_labeled(valid))
    if len(labeled) != len(valid.users):
        raise CorpusError("validation corpus must be fully labeled")
    docs = [user_document(u, lexicon, cfg, budget) for u, _ in labeled]
    y = [label for _, label in labeled]
    best, best_f1 = 0, -1.0
    for i, scorer in enumerate(candidates):
        f1 = f1_positive(y, [int(scorer.score(d) > threshold) for d in docs])
        if f1 > best_f1:
            best, best_f1 = i, f1
    return best


def export_extended_vocab(words: Sequence[str], path) -> None:
    if not words:
        raise ValueError("vocabulary list is empty")
    Path(path).write_text("".join(f"{w}\n" for w in words), encoding="utf-8")


def read_vocab(path) -> list[str]:
    return [w for w in Path(path).read_text(encoding="utf-8").split("\n") if w]


class ExternalScorerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExternalScorerEndpoint:
    transport: str  # "stdio" | "http"
    address: str  # shell command line for stdio, base URL for http
    timeout: float = 30.0

    def __post_init__(self):
        if self.transport not in ("stdio", "http"):
            raise ValueError(f"transport must be 'stdio' or 'http', got {self.transport!r}")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def parse(cls, spec: str, timeout: float = 30.0) -> "ExternalScorerEndpoint":
        """``http://host:port`` or ``stdio:<command line>``."""
        if spec.startswith(("http://", "https://")):
            return cls("http", spec, timeout)
        if spec.startswith("stdio:"):
            return cls("stdio", spec[len("stdio:"):], timeout)
        raise ValueError(f"cannot parse external scorer spec {spec!r}")


def _validate_responses(batch, responses) -> list[tuple]:
    if not isinstance(responses, list):
        raise ExternalScorerError("malformed response: expected a list")
    got = {}
    for r in responses:
        if not isinstance(r, dict) or "id" not in r or "score" not in r:
            raise ExternalScorerError(f"malformed response item {r!r}")
        rid = str(r["id"])
        try:
            p = float(r["score"])
        except (TypeError, ValueError):
            raise ExternalScorerError(f"malformed score for id {rid!r}: {r['score']!r}") from None
        if not 0.0 <= p <= 1.0:
            raise ExternalScorerError(f"score {p} for id {rid!r} out of range [0, 1]")
        got[rid] = p
    missing = [rid for rid, _ in batch if str(rid) not in got]
    if missing:
        raise ExternalScorerError(f"missing response for id(s) {missing}")
    return [(rid, got[str(rid)]) for rid, _ in batch]


def external_score(e: ExternalScorerEndpoint, batch: Sequence[tuple]) -> list[tuple]:
    """Score ``[(id, text), ...]`` through an external model host."""
    batch = list(batch)
    if not batch:
        return []
    requests = [{"id": str(rid), "text": text} for rid, text in batch]
    if e.transport == "http":
        req = urllib.request.Request(
            e.address.rstrip("/") + "/score",
            data=json.dumps(requests).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=e.timeout) as resp:
                body = resp.read()
        except TimeoutError as exc:
            raise ExternalScorerError(f"timeout after {e.timeout}s scoring ids {[r['id'] for r in requests][:5]}") from exc
        except urllib.error.URLError as exc:
            raise ExternalScorerError(f"external scorer unreachable: {exc.reason}") from exc
        try:
            responses = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ExternalScorerError("malformed response: not JSON") from exc
        return _validate_responses(batch, responses)

    payload = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in requests)
    try:
        proc = subprocess.run(
            e.address, shell=True, input=payload, capture_output=True,
            text=True, timeout=e.timeout, encoding="utf-8",
        )
    except subprocess.TimeoutExpired as exc:
        raise ExternalScorerError(f"timeout after {e.timeout}s scoring ids {[r['id'] for r in requests][:5]}") from exc
    if proc.returncode != 0:
        raise ExternalScorerError(f"external scorer exited with {proc.returncode}: {proc.stderr.strip()[:200]}")
    responses = []
    for lineno, line in enumerate(proc.stdout.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            responses.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ExternalScorerError(f"malformed response on line {lineno}: {line[:80]!r}") from exc
    return _validate_responses(batch, responses)


@dataclass
class ExternalScorer:
    """RiskScorer backed by an :class:`ExternalScorerEndpoint`."""

    endpoint: ExternalScorerEndpoint
    _counter: int = field(default=0, repr=False)

    def score(self, text: str) -> float:
        self._counter += 1
        return external_score(self.endpoint, [(f"q:{self._counter}", text)])[0][1]

    def score_batch(self, batch: Sequence[tuple]) -> list[tuple]:
        return external_score(self.endpoint, batch)


def score_many(scorer: RiskScorer, batch: Sequence[tuple]) -> dict:
    """``{id: probability}`` via ``score_batch`` when the scorer offers it."""
    if hasattr(scorer, "score_batch"):
        return dict(scorer.score_batch(list(batch)))
    return {rid: scorer.score(text) for rid, text in batch}
