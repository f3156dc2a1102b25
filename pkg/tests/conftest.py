import json

import pytest

from erisklab.corpus import load_corpus
from erisklab.textprep import SentimentLexicon

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_jsonl(path, users):
    with open(path, "w", encoding="utf-8") as fh:
        for u in users:
            fh.write(json.dumps(u) + "\n")
    return path


def user(nick, n_posts, label="negative", start_day=1, text="hello there"):
    return {
        "nick": nick,
        "label": label,
        "posts": [
            {"timestamp": f"2021-03-{start_day + i:02d}T12:00:00Z", "title": "", "content": f"{text} {i}"}
            for i in range(n_posts)
        ],
    }


@pytest.fixture
def tiny_corpus(tmp_path):
    path = write_jsonl(tmp_path / "tiny.jsonl", [
        user("alice", 3, "positive"),
        user("bob", 1, "negative"),
        user("carol", 2, "negative"),
    ])
    return load_corpus(path)


@pytest.fixture
def toy_lexicon():
    return SentimentLexicon({"awful": -2.1, "good": 1.9})


def history(nick, texts, label="negative"):
    """In-memory UserHistory with one post per text, a day apart."""
    from datetime import datetime, timedelta, timezone

    from erisklab.corpus import Post, UserHistory

    t0 = datetime(2021, 3, 1, 12, tzinfo=timezone.utc)
    posts = tuple(Post(nick, t0 + timedelta(days=i), "", t) for i, t in enumerate(texts))
    return UserHistory(nick, posts, label)
