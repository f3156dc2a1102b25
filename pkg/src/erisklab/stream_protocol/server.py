"""Mock early-risk evaluation server.

Releases one post per user per round to each registered team and advances
only after every run of the team has submitted the round. Submissions are
appended to ``<log_dir>/<token>.jsonl``; registering a token whose log exists
rebuilds the team's state from it.
"""
from __future__ import annotations

import logging
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ..corpus import Corpus, format_timestamp
from .runlog import RunLogRecord, append_records, read_records

log = logging.getLogger(__name__)


class ProtocolError(Exception):
    def __init__(self, message: str, status: int = 400):
        super().__init__(message)
        self.status = status


@dataclass
class TeamState:
    token: str
    runs_expected: int
    current_round: int = 0
    submissions_this_round: set = field(default_factory=set)
    finished: bool = False
    released_at: Optional[float] = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class MockServer:
    def __init__(self, corpus: Corpus, log_dir=None, clock: Callable[[], float] = time.monotonic):
        self.corpus = corpus
        self.log_dir = Path(log_dir) if log_dir is not None else None
        self.clock = clock
        self.teams: dict = {}
        self._lock = threading.Lock()
        self.audit: list = []  # (token, round served, runs submitted at serve time)
        self._max_posts = max((len(u.posts) for u in corpus.users), default=0)

    def log_path(self, token: str) -> Optional[Path]:
        return self.log_dir / f"{token}.jsonl" if self.log_dir is not None else None

    def round_items(self, number: int) -> list[dict]:
        items = []
        for user in self.corpus.users:
            if len(user.posts) > number:
                post = user.posts[number]
                items.append({
                    "nick": user.nick,
                    "number": number + 1,
                    "title": post.title,
                    "content": post.content,
                    "date": format_timestamp(post.timestamp),
                })
        return items

    def round_nicks(self, number: int) -> set:
        return {u.nick for u in self.corpus.users if len(u.posts) > number}

    def register(self, token: str, runs: int) -> TeamState:
        if runs < 1:
            raise ValueError("a team needs at least one run")
        with self._lock:
            if token in self.teams:
                raise ValueError(f"token {token!r} already registered")
            team = TeamState(token, runs)
            path = self.log_path(token)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                if path.exists():
                    self._recover(team, path)
            self.teams[token] = team
            return team

    def _recover(self, team: TeamState, path: Path) -> None:
        submitted: dict = {}  # round -> run -> nick set
        for rec in read_records(path):
            if not 0 <= rec.run < team.runs_expected:
                raise ProtocolError(f"{path}: run {rec.run} outside 0..{team.runs_expected - 1}")
            submitted.setdefault(rec.round, {}).setdefault(rec.run, set()).add(rec.nick)
        r = 0
        while r in submitted and len(submitted[r]) == team.runs_expected:
            r += 1
        for rnd, by_run in submitted.items():
            if rnd > r:
                raise ProtocolError(f"{path}: submissions for round {rnd} precede completion of round {r}")
            expected = self.round_nicks(rnd)
            for run, nicks in by_run.items():
                if nicks != expected:
                    raise ProtocolError(f"{path}: incomplete submission for run {run} round {rnd}")
        team.current_round = r
        team.submissions_this_round = set(submitted.get(r, {}))
        # the client may have fetched this round before the restart
        team.released_at = self.clock()
        log.info("recovered team %s at round %d (%d runs submitted)",
                 team.token, r, len(team.submissions_this_round))

    def _team(self, token: str) -> TeamState:
        try:
            return self.teams[token]
        except KeyError:
            raise ProtocolError(f"unknown token {token!r}", status=404) from None

    def get_writings(self, token: str) -> list[dict]:
        team = self._team(token)
        with team.lock:
            if team.finished:
                return []
            items = self.round_items(team.current_round)
            if not items:
                team.finished = True
                return []
            if team.released_at is None:
                team.released_at = self.clock()
            self.audit.append((token, team.current_round, frozenset(team.submissions_this_round)))
            return items

    def submit(self, token: str, run: int, decisions) -> dict:
        team = self._team(token)
        with team.lock:
            if not isinstance(run, int) or not 0 <= run < team.runs_expected:
                raise ProtocolError(f"unknown run {run!r}", status=404)
            if team.finished:
                raise ProtocolError("stream finished", status=409)
            if team.released_at is None:
                raise ProtocolError(f"round {team.current_round} has not been requested yet", status=409)
            if run in team.submissions_this_round:
                raise ProtocolError(f"duplicate submission for run {run} in round {team.current_round}", status=409)
            records = self._validate(team, run, decisions)
            path = self.log_path(token)
            if path is not None:
                append_records(path, records)
            rnd = team.current_round
            team.submissions_this_round.add(run)
            if len(team.submissions_this_round) == team.runs_expected:
                team.current_round += 1
                team.submissions_this_round = set()
                team.released_at = None
            return {"status": "ok", "round": rnd}

    def _validate(self, team: TeamState, run: int, decisions) -> list[RunLogRecord]:
        if not isinstance(decisions, list):
            raise ProtocolError("submission body must be a list")
        elapsed = max(0, int(round((self.clock() - team.released_at) * 1000)))
        seen = {}
        for d in decisions:
            if not isinstance(d, dict) or not {"nick", "decision", "score"} <= set(d):
                raise ProtocolError(f"malformed decision entry {d!r}")
            nick = d["nick"]
            if nick in seen:
                raise ProtocolError(f"nick {nick!r} submitted twice")
            value = d["decision"]
            if isinstance(value, bool) or value not in (0, 1):
                raise ProtocolError(f"decision must be 0 or 1 (nick {nick!r} sent {value!r})")
            score = d["score"]
            if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
                raise ProtocolError(f"score must be a finite number (nick {nick!r})")
            seen[nick] = RunLogRecord(run, team.current_round, nick, int(value), float(score), elapsed)
        expected = self.round_nicks(team.current_round)
        missing, extra = sorted(expected - set(seen)), sorted(set(seen) - expected)
        if missing or extra:
            raise ProtocolError(f"wrong user set: missing={missing} extra={extra}")
        return [seen[u.nick] for u in self.corpus.users if u.nick in seen]
