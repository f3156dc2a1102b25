"""Text normalization, lexicon negativity scoring, POS bucketing, token budgets."""
from __future__ import annotations

import html
import math
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_texts
from .corpus import Post, UserHistory

VERB, ADJ, NOUN, OTHER = "VERB", "ADJ", "NOUN", "OTHER"
POS_TAGS = (VERB, ADJ, NOUN, OTHER)

_UNICODE_ESCAPE = re.compile(r"\\u([0-9a-fA-F]{4})|\\U([0-9a-fA-F]{8})")
_NUMBER = re.compile(r"[+-]?(?:[0-9]+(?:[.,][0-9]+)*(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?", re.ASCII)
_URL_PREFIXES = ("http://", "https://", "www.")
_STRIP = string.punctuation + "“”‘’«»…"
_MAX_PASSES = 64


@dataclass(frozen=True)
class NormalizationConfig:
    lowercase: bool = True
    url_token: str = "weblink"
    number_token: str = "number"
    collapse_repeats: bool = True
    emoji_map: dict = field(default_factory=dict)

    def __post_init__(self):
        for tok in (self.url_token, self.number_token):
            if not tok or tok != tok.lower() or len(tok.split()) != 1:
                raise ValueError(f"replacement token must be one lowercase word: {tok!r}")

    def __hash__(self):
        return hash((self.lowercase, self.url_token, self.number_token,
                     self.collapse_repeats, tuple(sorted(self.emoji_map.items()))))


DEFAULT_NORMALIZATION = NormalizationConfig()


def _decode_escapes(text: str) -> str:
    def sub(m):
        code = int(m.group(1) or m.group(2), 16)
        try:
            return chr(code)
        except ValueError:
            return m.group(0)

    return _UNICODE_ESCAPE.sub(sub, text)


def is_url(token: str) -> bool:
    return token.lower().startswith(_URL_PREFIXES)


def is_number(token: str) -> bool:
    return _NUMBER.fullmatch(token) is not None


def _normalize_once(text: str, cfg: NormalizationConfig) -> str:
    text = _decode_escapes(html.unescape(text))
    for emoji, replacement in cfg.emoji_map.items():
        if emoji in text:
            text = text.replace(emoji, f" {replacement} ")
    if cfg.lowercase:
        text = text.lower()
    out: list[str] = []
    for tok in text.split():
        if is_url(tok):
            tok = cfg.url_token
        elif is_number(tok):
            tok = cfg.number_token
        if cfg.collapse_repeats and out and out[-1] == tok:
            continue
        out.append(tok)
    return " ".join(out)


def normalize(text: str, cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> str:
    """Canonical form of a post or sentence.

    Entities and ``\\uXXXX`` escapes are decoded, emojis mapped, URLs and
    numbers replaced by placeholder tokens, consecutive duplicate tokens and
    whitespace runs collapsed. Applied to a fixpoint, so it is idempotent.
    """
    for _ in range(_MAX_PASSES):
        new = _normalize_once(text, cfg)
        if new == text:
            break
        text = new
    return text


class TextNormalizer(BaseEstimator, TransformerMixin):
    """Stateless transformer applying :func:`normalize` to a list of texts."""

    def __init__(self, lowercase=True, url_token="weblink", number_token="number",
                 collapse_repeats=True, emoji_map=None):
        self.lowercase = lowercase
        self.url_token = url_token
        self.number_token = number_token
        self.collapse_repeats = collapse_repeats
        self.emoji_map = emoji_map

    def _config(self) -> NormalizationConfig:
        return NormalizationConfig(
            lowercase=self.lowercase,
            url_token=self.url_token,
            number_token=self.number_token,
            collapse_repeats=self.collapse_repeats,
            emoji_map=dict(self.emoji_map or {}),
        )

    def fit(self, X, y=None):
        check_texts(X)
        self.config_ = self._config()
        return self

    def transform(self, X):
        cfg = getattr(self, "config_", None) or self._config()
        return [normalize(t, cfg) for t in check_texts(X)]


def lexicon_key(token: str) -> str:
    """Lookup key for lexicons: the token without surrounding punctuation."""
    return token.strip(_STRIP) or token


@dataclass(frozen=True)
class SentimentLexicon:
    entries: dict

    def __post_init__(self):
        clean = {}
        for tok, val in self.entries.items():
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"non-finite valence for {tok!r}")
            clean[tok.lower()] = val
        object.__setattr__(self, "entries", clean)

    def valence(self, token: str) -> float:
        return self.entries.get(lexicon_key(token), 0.0)

    @classmethod
    def load(cls, path) -> "SentimentLexicon":
        """Read ``token<TAB>valence[<TAB>...]`` lines (VADER lexicon layout)."""
        entries = {}
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                cols = line.split("\t")
                if len(cols) < 2:
                    raise ValueError(f"{path}:{lineno}: expected token<TAB>valence")
                try:
                    entries[cols[0].strip().lower()] = float(cols[1])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad valence {cols[1]!r}") from exc
        return cls(entries)


def negativity_score(text: str, lex: SentimentLexicon) -> float:
    """Summed magnitude of negative valences divided by the token count."""
    tokens = text.split()
    neg = sum(-v for v in (lex.valence(t) for t in tokens) if v < 0)
    return neg / max(1, len(tokens))


def filter_negative(sentences: Iterable[tuple], lex: SentimentLexicon) -> list[tuple]:
    return [(sid, text) for sid, text in sentences if negativity_score(text, lex) > 0]


@dataclass(frozen=True)
class PosLexicon:
    entries: dict
    stopwords: frozenset = frozenset()

    def __post_init__(self):
        clean = {}
        for tok, tags in self.entries.items():
            tags = [tags] if isinstance(tags, str) else list(tags)
            if not tags:
                raise ValueError(f"empty tag list for {tok!r}")
            bad = [t for t in tags if t not in POS_TAGS]
            if bad:
                raise ValueError(f"unknown POS tags for {tok!r}: {bad}")
            clean[tok.lower()] = tuple(tags)
        object.__setattr__(self, "entries", clean)
        object.__setattr__(self, "stopwords", frozenset(w.lower() for w in self.stopwords))

    def tag(self, token: str) -> str:
        tags = self.entries.get(lexicon_key(token))
        return tags[0] if tags else OTHER

    @classmethod
    def load(cls, path, stopwords_path=None) -> "PosLexicon":
        entries = {}
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                cols = line.split("\t")
                if len(cols) < 2:
                    raise ValueError(f"{path}:{lineno}: expected token<TAB>TAG[,TAG...]")
                entries[cols[0]] = [t.strip().upper() for t in cols[1].split(",") if t.strip()]
        stop = load_wordlist(stopwords_path) if stopwords_path else []
        return cls(entries, frozenset(stop))


def load_wordlist(path) -> list[str]:
    with Path(path).open(encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_emoji_map(path) -> dict:
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if "\t" in line:
                emoji, repl = line.split("\t", 1)
                out[emoji] = repl.strip()
    return out


def pos_extract(text: str, pl: PosLexicon, symptom_words: Optional[set] = None) -> dict:
    """Bucket tokens into verbs, adjectives and nouns by their priority tag."""
    keep = symptom_words or set()
    out = {"verbs": [], "adjectives": [], "nouns": []}
    bucket = {VERB: out["verbs"], ADJ: out["adjectives"], NOUN: out["nouns"]}
    for tok in text.split():
        word = lexicon_key(tok)
        if word in pl.stopwords and word not in keep:
            continue
        tag = pl.tag(word)
        if tag in bucket:
            bucket[tag].append(word)
    return out


def select_negative_posts(user: UserHistory, lex: SentimentLexicon,
                          cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> list[Post]:
    return [p for p in user.posts if negativity_score(normalize(p.text, cfg), lex) > 0]


def truncate_tokens(text: str, budget: int = 512) -> str:
    if budget < 1:
        raise ValueError("token budget must be >= 1")
    return " ".join(text.split()[:budget])


def user_document(user: UserHistory, lex: Optional[SentimentLexicon] = None,
                  cfg: NormalizationConfig = DEFAULT_NORMALIZATION,
                  budget: Optional[int] = None) -> str:
    """Normalized, optionally negativity-filtered and truncated text of a user."""
    posts: Sequence[Post] = select_negative_posts(user, lex, cfg) if lex else user.posts
    doc = " ".join(t for t in (normalize(p.text, cfg) for p in posts) if t)
    return truncate_tokens(doc, budget) if budget else doc
