"""Embedding-similarity ranking of sentences against BDI symptoms.

Each symptom is described by a few verbs, adjectives and nouns. A sentence's
POS words are embedded in the symptom's context and compared to the symptom
words of the same category; the resulting score table is summarized per
sentence x symptom by ``max`` or ``avg`` and the top sentences are kept.
"""
from __future__ import annotations

import hashlib
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import irmetrics
from .textprep import ADJ, NOUN, VERB

CATEGORIES = (VERB, ADJ, NOUN)
_CATEGORY_FIELD = {VERB: "verbs", ADJ: "adjectives", NOUN: "nouns"}
N_SYMPTOMS = 21


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SymptomSpec:
    id: int
    name: str
    verbs: tuple
    adjectives: tuple
    nouns: tuple

    def __post_init__(self):
        if not 0 <= self.id < N_SYMPTOMS:
            raise ValueError(f"symptom id must be in 0..{N_SYMPTOMS - 1}, got {self.id}")
        for fname in _CATEGORY_FIELD.values():
            words = tuple(getattr(self, fname))
            if not words:
                raise ValueError(f"symptom {self.name!r}: {fname} is empty")
            if any(w != w.lower() for w in words):
                raise ValueError(f"symptom {self.name!r}: {fname} must be lowercase")
            if len(set(words)) != len(words):
                raise ValueError(f"symptom {self.name!r}: duplicate words in {fname}")
            object.__setattr__(self, fname, words)

    def words(self, category: str) -> tuple:
        return getattr(self, _CATEGORY_FIELD[category])

    def all_words(self) -> set:
        return set(self.verbs) | set(self.adjectives) | set(self.nouns)


def load_symptoms(path) -> list[SymptomSpec]:
    with Path(path).open(encoding="utf-8") as fh:
        data = json.load(fh)
    specs = [
        SymptomSpec(
            id=int(d["id"]), name=d["name"], verbs=tuple(d["verbs"]),
            adjectives=tuple(d["adjectives"]), nouns=tuple(d["nouns"]),
        )
        for d in data
    ]
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate symptom ids")
    return sorted(specs, key=lambda s: s.id)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, word: str, symptom_name: str) -> np.ndarray: ...


def context_phrase(word: str, symptom_name: str) -> str:
    if not word:
        raise ValueError("word must be non-empty")
    return f"{word} is linked to the symptom {symptom_name}"


class HashEmbeddingProvider:
    """Deterministic random unit vectors seeded by a hash of the context phrase.

    Stands in for a contextual encoder in tests and dry runs.
    """

    def __init__(self, dim: int = 32, salt: str = ""):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.salt = salt
        self._cache: dict = {}

    def embed(self, word: str, symptom_name: str) -> np.ndarray:
        key = (word, symptom_name)
        vec = self._cache.get(key)
        if vec is None:
            phrase = self.salt + context_phrase(word, symptom_name)
            seed = int.from_bytes(hashlib.blake2b(phrase.encode("utf-8"), digest_size=8).digest(), "little")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            vec.setflags(write=False)
            self._cache[key] = vec
        return vec


class TableEmbeddingProvider:
    """Precomputed vectors read from ``word<TAB>symptom<TAB>v1 v2 ... vd`` lines."""

    def __init__(self, table: Mapping[tuple, np.ndarray]):
        if not table:
            raise ValueError("empty embedding table")
        dims = {len(v) for v in table.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        self._table = {k: np.asarray(v, dtype=float) for k, v in table.items()}

    def embed(self, word: str, symptom_name: str) -> np.ndarray:
        try:
            return self._table[(word, symptom_name)]
        except KeyError:
            raise EmbeddingError(f"no embedding for {word!r} in context {symptom_name!r}") from None

    @classmethod
    def load(cls, path) -> "TableEmbeddingProvider":
        table = {}
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                cols = line.rstrip("\n").split("\t")
                if len(cols) != 3:
                    raise ValueError(f"{path}:{lineno}: expected word<TAB>symptom<TAB>vector")
                table[(cols[0], cols[1])] = np.array(cols[2].split(), dtype=float)
        return cls(table)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for a zero vector")
    return float(min(1.0, max(-1.0, np.dot(u, v) / (nu * nv))))


@dataclass(frozen=True)
class ScoreCell:
    sentence_id: str
    symptom_id: int
    category: str
    text_word: str
    symptom_word: str
    similarity: float


def _embed(provider: EmbeddingProvider, word: str, symptom: str) -> np.ndarray:
    try:
        return provider.embed(word, symptom)
    except EmbeddingError:
        raise
    except Exception as exc:
        raise EmbeddingError(f"embedding failed for {word!r} in context {symptom!r}: {exc}") from exc


def score_table(sentence: tuple, symptom: SymptomSpec, provider: EmbeddingProvider) -> list[ScoreCell]:
    """All text-word x symptom-word cells within matching POS categories.

    ``sentence`` is ``(sentence_id, pos_words)`` with pos_words as returned by
    :func:`erisklab.textprep.pos_extract`.
    """
    sid, pos_words = sentence
    cells = []
    for cat in CATEGORIES:
        text_words = pos_words.get(_CATEGORY_FIELD[cat], ())
        if not text_words:
            continue
        sym_vecs = [(w, _embed(provider, w, symptom.name)) for w in symptom.words(cat)]
        for tw in text_words:
            tv = _embed(provider, tw, symptom.name)
            for sw, sv in sym_vecs:
                cells.append(ScoreCell(sid, symptom.id, cat, tw, sw, cosine(tv, sv)))
    return cells


def _by_category(cells: Sequence[ScoreCell]) -> dict:
    if cells:
        keys = {(c.sentence_id, c.symptom_id) for c in cells}
        if len(keys) > 1:
            raise ValueError(f"cells mix sentence/symptom pairs: {sorted(keys)[:3]}")
    groups = defaultdict(list)
    for c in cells:
        groups[c.category].append(c)
    return groups


def summarize_max(cells: Sequence[ScoreCell]) -> Optional[float]:
    """Mean over non-empty categories of the category's highest similarity."""
    groups = _by_category(cells)
    if not groups:
        return None
    vals = [max(c.similarity for c in groups[cat]) for cat in CATEGORIES if cat in groups]
    return sum(vals) / len(vals)


def summarize_avg(cells: Sequence[ScoreCell]) -> Optional[float]:
    """Mean over non-empty categories of the best per-text-word mean similarity."""
    groups = _by_category(cells)
    if not groups:
        return None
    vals = []
    for cat in CATEGORIES:
        if cat not in groups:
            continue
        per_word = defaultdict(list)
        for c in groups[cat]:
            per_word[c.text_word].append(c.similarity)
        vals.append(max(sum(v) / len(v) for v in per_word.values()))
    return sum(vals) / len(vals)


SUMMARIZERS = {"max": summarize_max, "avg": summarize_avg}


@dataclass(frozen=True)
class SentenceRanking:
    symptom_id: int
    entries: tuple  # ((sentence_id, score), ...)

    @property
    def sentence_ids(self) -> list:
        return [sid for sid, _ in self.entries]


def build_ranking(scores: Mapping[str, float], symptom_id: int, limit: int = 1000) -> SentenceRanking:
    for sid, s in scores.items():
        if not math.isfinite(s):
            raise ValueError(f"non-finite score for sentence {sid!r}")
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return SentenceRanking(symptom_id, tuple(ordered[:limit]))


@dataclass(frozen=True)
class Qrels:
    scheme: str
    relevant: frozenset  # {(symptom_id, sentence_id)}

    def for_symptom(self, symptom_id: int) -> set:
        return {sid for sym, sid in self.relevant if sym == symptom_id}


QRELS_SCHEMES = {"majority": 2, "unanimity": 3}


def qrels_from_votes(votes: Mapping[tuple, int], scheme: str) -> Qrels:
    """Relevance from assessor agreement counts (out of three)."""
    need = QRELS_SCHEMES[scheme]
    return Qrels(scheme, frozenset(k for k, n in votes.items() if n >= need))


def load_qrels(path, scheme: str = "majority") -> Qrels:
    """Read ``symptom_id<TAB>sentence_id<TAB>value`` lines.

    Values 0/1 are binary judgments. If any value exceeds 1 the column is read
    as the number of agreeing assessors and ``scheme`` sets the cut-off.
    """
    if scheme not in QRELS_SCHEMES:
        raise ValueError(f"unknown qrels scheme {scheme!r}")
    votes = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cols = line.split()
            if len(cols) != 3:
                raise ValueError(f"{path}:{lineno}: expected symptom_id sentence_id value")
            votes[(int(cols[0]), cols[1])] = int(cols[2])
    if any(v > 1 for v in votes.values()):
        return qrels_from_votes(votes, scheme)
    return Qrels(scheme, frozenset(k for k, v in votes.items() if v > 0))


def _relevance(r: SentenceRanking, q: Qrels) -> tuple[list, int]:
    gold = q.for_symptom(r.symptom_id)
    return [int(sid in gold) for sid in r.sentence_ids], len(gold)


def average_precision(r: SentenceRanking, q: Qrels) -> float:
    rel, n = _relevance(r, q)
    return irmetrics.average_precision(rel, n)


def r_precision(r: SentenceRanking, q: Qrels) -> float:
    rel, n = _relevance(r, q)
    return irmetrics.r_precision(rel, n)


def precision_at_k(r: SentenceRanking, q: Qrels, k: int) -> float:
    rel, _ = _relevance(r, q)
    return irmetrics.precision_at_k(rel, k)


def ndcg_at_k(r: SentenceRanking, q: Qrels, k: int) -> float:
    rel, n = _relevance(r, q)
    return irmetrics.ndcg_at_k(rel, n, k)


RUN_METRICS = ("AP", "R-PREC", "P@10", "NDCG@1000")


def evaluate_run(rankings: Iterable[SentenceRanking], q: Qrels,
                 n_symptoms: int = N_SYMPTOMS) -> dict:
    """Per-symptom metrics and their unweighted mean over symptoms."""
    by_id = {r.symptom_id: r for r in rankings}
    missing = [i for i in range(n_symptoms) if i not in by_id]
    if missing:
        raise ValueError(f"missing ranking for symptom(s) {missing}")
    rows = []
    for i in range(n_symptoms):
        r = by_id[i]
        rows.append({
            "symptom_id": i,
            "AP": average_precision(r, q),
            "R-PREC": r_precision(r, q),
            "P@10": precision_at_k(r, q, 10),
            "NDCG@1000": ndcg_at_k(r, q, 1000),
        })
    macro = {m: sum(row[m] for row in rows) / n_symptoms for m in RUN_METRICS}
    return {"scheme": q.scheme, "per_symptom": rows, "macro": macro}


def write_ranking(r: SentenceRanking, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rank, (sid, score) in enumerate(r.entries, start=1):
            fh.write(f"{rank}\t{sid}\t{score!r}\n")


def read_ranking(path, symptom_id: int) -> SentenceRanking:
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 3:
                raise ValueError(f"{path}:{lineno}: expected rank<TAB>sentence_id<TAB>score")
            entries.append((cols[1], float(cols[2])))
    return SentenceRanking(symptom_id, tuple(entries))


def ranking_filename(symptom_id: int) -> str:
    return f"symptom_{symptom_id:02d}.tsv"


def write_run(rankings: Iterable[SentenceRanking], run_dir) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    for r in rankings:
        write_ranking(r, run_dir / ranking_filename(r.symptom_id))


def read_run(run_dir, n_symptoms: int = N_SYMPTOMS) -> list[SentenceRanking]:
    run_dir = Path(run_dir)
    out = []
    for i in range(n_symptoms):
        path = run_dir / ranking_filename(i)
        if path.exists():
            out.append(read_ranking(path, i))
    return out


class SimilarityRanker(BaseEstimator):
    """Rank POS-extracted sentences against a set of symptoms.

    Parameters
    ----------
    provider : EmbeddingProvider, default=None
        Source of contextual word vectors. ``None`` uses a 32-d
        :class:`HashEmbeddingProvider`.
    summarizer : {"max", "avg"}, default="max"
    limit : int, default=1000
        Sentences kept per symptom ranking.
    """

    def __init__(self, provider=None, summarizer="max", limit=1000):
        self.provider = provider
        self.summarizer = summarizer
        self.limit = limit

    def fit(self, symptoms, y=None):
        if self.summarizer not in SUMMARIZERS:
            raise ValueError(f"summarizer must be one of {sorted(SUMMARIZERS)}")
        if self.limit < 1:
            raise ValueError("limit must be >= 1")
        self.symptoms_ = sorted(symptoms, key=lambda s: s.id)
        if not self.symptoms_:
            raise ValueError("no symptoms given")
        self.provider_ = self.provider if self.provider is not None else HashEmbeddingProvider()
        self.symptom_words_ = set().union(*(s.all_words() for s in self.symptoms_))
        return self

    def transform(self, sentences: Sequence[tuple]) -> np.ndarray:
        """Score matrix of shape (n_sentences, n_symptoms); NaN marks exclusion."""
        check_is_fitted(self, "symptoms_")
        summarize = SUMMARIZERS[self.summarizer]
        out = np.full((len(sentences), len(self.symptoms_)), np.nan)
        for i, sentence in enumerate(sentences):
            for j, sym in enumerate(self.symptoms_):
                s = summarize(score_table(sentence, sym, self.provider_))
                if s is not None:
                    out[i, j] = s
        return out

    def rank(self, sentences: Sequence[tuple]) -> list[SentenceRanking]:
        scores = self.transform(sentences)
        ids = [sid for sid, _ in sentences]
        rankings = []
        for j, sym in enumerate(self.symptoms_):
            col = {ids[i]: float(scores[i, j]) for i in range(len(ids)) if not np.isnan(scores[i, j])}
            rankings.append(build_ranking(col, sym.id, self.limit))
        return rankings
