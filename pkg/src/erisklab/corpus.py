"""User-post corpora: loading, validation, merging, splitting and summary stats.

A corpus is stored as JSONL, one user per line::

    {"nick": "subject001", "label": "positive", "posts": [
        {"timestamp": "2021-03-01T12:00:00Z", "title": "", "content": "..."}]}
"""
from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

POSITIVE = "positive"
NEGATIVE = "negative"
LABELS = (POSITIVE, NEGATIVE)


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus data."""


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    if not isinstance(value, str):
        raise CorpusError(f"timestamp must be a string, got {value!r}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise CorpusError(f"unparseable timestamp {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Post:
    author: str
    timestamp: datetime
    title: str = ""
    content: str = ""

    @property
    def text(self) -> str:
        """Title and content joined by one space (empty parts skipped)."""
        return " ".join(part for part in (self.title, self.content) if part)

    def word_count(self) -> int:
        return len(f"{self.title} {self.content}".split())

    def to_dict(self) -> dict:
        return {
            "timestamp": format_timestamp(self.timestamp),
            "title": self.title,
            "content": self.content,
        }


@dataclass(frozen=True)
class UserHistory:
    nick: str
    posts: tuple[Post, ...]
    label: Optional[str] = None

    def __post_init__(self):
        if not self.nick:
            raise CorpusError("user nick must be non-empty")
        if self.label is not None and self.label not in LABELS:
            raise CorpusError(f"user {self.nick!r}: invalid label {self.label!r}")
        if not self.posts:
            raise CorpusError(f"user {self.nick!r} has no posts")
        stamps = [p.timestamp for p in self.posts]
        if any(a > b for a, b in zip(stamps, stamps[1:])):
            # stable sort keeps the file order for equal timestamps
            object.__setattr__(
                self, "posts", tuple(sorted(self.posts, key=lambda p: p.timestamp))
            )

    @property
    def is_positive(self) -> bool:
        return self.label == POSITIVE

    def to_dict(self) -> dict:
        return {
            "nick": self.nick,
            "label": self.label,
            "posts": [p.to_dict() for p in self.posts],
        }


@dataclass(frozen=True)
class Corpus:
    name: str
    users: tuple[UserHistory, ...]
    gold: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for user in self.users:
            if user.nick in seen:
                raise CorpusError(f"duplicate nick {user.nick!r}")
            seen.add(user.nick)
        gold = dict(self.gold)
        for user in self.users:
            if user.label is not None:
                if gold.setdefault(user.nick, user.label) != user.label:
                    raise CorpusError(
                        f"label mismatch for {user.nick!r}: "
                        f"gold={gold[user.nick]!r} user={user.label!r}"
                    )
        unknown = sorted(set(gold) - seen)
        if unknown:
            raise CorpusError(f"gold labels for unknown users: {unknown}")
        bad = {n: lab for n, lab in gold.items() if lab not in LABELS}
        if bad:
            raise CorpusError(f"invalid gold labels: {bad}")
        object.__setattr__(self, "gold", gold)

    def __len__(self) -> int:
        return len(self.users)

    def __iter__(self):
        return iter(self.users)

    @property
    def nicks(self) -> list[str]:
        return [u.nick for u in self.users]

    def label_of(self, nick: str) -> Optional[str]:
        return self.gold.get(nick)

    def user(self, nick: str) -> UserHistory:
        for u in self.users:
            if u.nick == nick:
                return u
        raise KeyError(nick)


@dataclass(frozen=True)
class CorpusStats:
    name: str
    n_users: int
    n_pos: int
    n_neg: int
    n_posts: int
    posts_per_user: dict
    words_per_post: dict

    def as_row(self) -> dict:
        return {
            "Corpus": self.name,
            "Total": self.n_users,
            "Pos": self.n_pos,
            "Neg": self.n_neg,
            "#posts": self.n_posts,
            "Posts Med": self.posts_per_user["median"],
            "Posts Min": self.posts_per_user["min"],
            "Posts Max": self.posts_per_user["max"],
            "Words Med": self.words_per_post["median"],
            "Words Min": self.words_per_post["min"],
            "Words Max": self.words_per_post["max"],
        }


def _post_from_dict(obj: dict, author: str) -> Post:
    if not isinstance(obj, dict):
        raise CorpusError(f"post of {author!r} is not an object")
    if "timestamp" not in obj:
        raise CorpusError(f"post of {author!r} lacks a timestamp")
    title = obj.get("title") or ""
    content = obj.get("content")
    if content is None and not title:
        raise CorpusError(f"post of {author!r} has neither title nor content")
    return Post(
        author=author,
        timestamp=parse_timestamp(obj["timestamp"]),
        title=str(title),
        content=str(content or ""),
    )


def user_from_dict(obj: dict) -> UserHistory:
    if not isinstance(obj, dict):
        raise CorpusError("user record is not a JSON object")
    nick = obj.get("nick")
    if not isinstance(nick, str) or not nick:
        raise CorpusError("user record lacks a nick")
    posts = obj.get("posts")
    if not isinstance(posts, list):
        raise CorpusError(f"user {nick!r}: posts must be a list")
    return UserHistory(
        nick=nick,
        label=obj.get("label"),
        posts=tuple(_post_from_dict(p, nick) for p in posts),
    )


def load_corpus(path, name: Optional[str] = None) -> Corpus:
    """Read a JSONL corpus; errors carry the offending line number."""
    path = Path(path)
    users = []
    seen = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                user = user_from_dict(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if user.nick in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate nick {user.nick!r} "
                    f"(first seen on line {seen[user.nick]})"
                )
            seen[user.nick] = lineno
            users.append(user)
    return Corpus(name=name or path.stem, users=tuple(users))


def save_corpus(corpus: Corpus, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for user in corpus.users:
            record = user.to_dict()
            record["label"] = corpus.gold.get(user.nick, user.label)
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _summary(values: Sequence[float]) -> dict:
    # statistics.median averages the central pair for even lengths
    return {"median": float(statistics.median(values)), "min": min(values), "max": max(values)}


def corpus_stats(corpus: Corpus) -> CorpusStats:
    if not corpus.users:
        raise CorpusError("cannot summarize an empty corpus")
    posts_per_user = [len(u.posts) for u in corpus.users]
    words = [p.word_count() for u in corpus.users for p in u.posts]
    labels = [corpus.gold.get(u.nick) for u in corpus.users]
    return CorpusStats(
        name=corpus.name,
        n_users=len(corpus.users),
        n_pos=labels.count(POSITIVE),
        n_neg=labels.count(NEGATIVE),
        n_posts=sum(posts_per_user),
        posts_per_user=_summary(posts_per_user),
        words_per_post=_summary(words),
    )


def merge_corpora(
    corpora: Sequence[Corpus],
    name: str,
    rename: Optional[Callable[[Corpus, str], str]] = None,
) -> Corpus:
    """Union of several corpora.

    Nick collisions are an error unless ``rename(corpus, nick)`` is given, in
    which case every user is renamed through it before merging.
    """
    if not corpora:
        raise CorpusError("merge_corpora needs at least one corpus")
    users: list[UserHistory] = []
    gold: dict = {}
    owner: dict = {}
    collisions = set()
    for c in corpora:
        for u in c.users:
            label = c.gold.get(u.nick, u.label)
            nick = rename(c, u.nick) if rename else u.nick
            if nick in owner:
                collisions.add(nick)
                continue
            owner[nick] = c.name
            users.append(UserHistory(nick=nick, posts=u.posts, label=label))
            if label is not None:
                gold[nick] = label
    if collisions:
        raise CorpusError(f"nick collision while merging: {sorted(collisions)}")
    return Corpus(name=name, users=tuple(users), gold=gold)


def prefix_rename(corpus: Corpus, nick: str) -> str:
    """Rename policy for merge_corpora: ``<corpus name>/<nick>``."""
    return f"{corpus.name}/{nick}"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_train_valid(
    corpus: Corpus, ratio: float = 0.85, seed: int = 0
) -> tuple[Corpus, Corpus]:
    """Stratified split; each class keeps round(ratio * n_class) training users."""
    if not 0 < ratio < 1:
        raise CorpusError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    unlabeled = [u.nick for u in corpus.users if u.nick not in corpus.gold]
    if unlabeled:
        raise CorpusError(f"cannot stratify with unlabeled users: {unlabeled[:5]}")
    rng = random.Random(seed)
    train_nicks = set()
    for label in (POSITIVE, NEGATIVE):
        members = sorted(u.nick for u in corpus.users if corpus.gold[u.nick] == label)
        rng.shuffle(members)
        train_nicks.update(members[: _round_half_up(ratio * len(members))])

    def subset(keep: Callable[[str], bool], suffix: str) -> Corpus:
        users = tuple(u for u in corpus.users if keep(u.nick))
        return Corpus(
            name=f"{corpus.name}_{suffix}",
            users=users,
            gold={u.nick: corpus.gold[u.nick] for u in users},
        )

    return (
        subset(lambda n: n in train_nicks, "train"),
        subset(lambda n: n not in train_nicks, "valid"),
    )


def iter_labeled(corpus: Corpus) -> Iterable[tuple[UserHistory, int]]:
    """Yield (user, 1|0) for labeled users."""
    for u in corpus.users:
        label = corpus.gold.get(u.nick)
        if label is not None:
            yield u, int(label == POSITIVE)
