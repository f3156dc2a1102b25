"""Client runner: fetch a round, score every user's posts window per run,
apply the historic rule and submit one decision list per run."""
from __future__ import annotations

import logging
import time
from typing import Sequence

from ..decision_policy import PolicyConfig, UserDecisionState, build_window, observe
from ..risk_scoring import RiskScorer, score_many
from ..textprep import DEFAULT_NORMALIZATION, NormalizationConfig, normalize
from .runlog import RunLogRecord, UserTrace, export_run_logs
from .server import ProtocolError

log = logging.getLogger(__name__)


class EarlyClient:
    """Drives one team: ``len(scorers)`` runs share the same post stream.

    ``conn`` is a :class:`LocalConnection` or :class:`HttpConnection`.
    """

    def __init__(self, conn, scorers: Sequence[RiskScorer], policy: PolicyConfig = PolicyConfig(),
                 norm: NormalizationConfig = DEFAULT_NORMALIZATION, clock=time.perf_counter):
        if not scorers:
            raise ValueError("at least one scorer is required")
        self.conn = conn
        self.scorers = list(scorers)
        self.policy = policy
        self.norm = norm
        self.clock = clock
        self.round = 0
        self.finished = False
        self.history: dict = {}  # nick -> normalized post texts
        self.states = [dict() for _ in self.scorers]  # run -> nick -> UserDecisionState
        self.records: list[RunLogRecord] = []

    def step(self) -> bool:
        """Process one round. Returns False once the server reports the end."""
        if self.finished:
            return False
        t0 = self.clock()
        items = self.conn.get_writings()
        if not items:
            self.finished = True
            return False
        windows = []
        for item in items:
            posts = self.history.setdefault(item["nick"], [])
            if item["number"] != len(posts) + 1:
                raise ProtocolError(
                    f"user {item['nick']!r}: got post {item['number']}, expected {len(posts) + 1}")
            title, content = item.get("title") or "", item.get("content") or ""
            posts.append(normalize(f"{title} {content}", self.norm))
            windows.append((f"{item['nick']}:{self.round}",
                            build_window(posts, len(posts), self.policy.window)))
        fetch_time = self.clock() - t0
        for run, scorer in enumerate(self.scorers):
            t_run = self.clock()
            scores = score_many(scorer, windows)
            states = self.states[run]
            decisions = []
            for item, (rid, _) in zip(items, windows):
                nick = item["nick"]
                state = states.get(nick) or UserDecisionState(nick)
                state, decision = observe(state, float(scores[rid]), self.policy.rule)
                states[nick] = state
                decisions.append({"nick": nick, "decision": decision.value, "score": decision.score})
            ack = self.conn.submit(run, decisions)
            if ack.get("round") != self.round:
                raise ProtocolError(f"server acknowledged round {ack.get('round')}, client is at {self.round}")
            elapsed = int(round((fetch_time + self.clock() - t_run) * 1000))
            self.records.extend(
                RunLogRecord(run, self.round, d["nick"], d["decision"], d["score"], elapsed)
                for d in decisions
            )
        log.debug("round %d: %d users, %d runs", self.round, len(items), len(self.scorers))
        self.round += 1
        return True

    def run(self, max_rounds=None) -> list[RunLogRecord]:
        n = 0
        while (max_rounds is None or n < max_rounds) and self.step():
            n += 1
        return self.records

    def traces(self) -> dict:
        """``{run: {nick: UserTrace}}`` from live decision state."""
        out = {}
        for run, states in enumerate(self.states):
            out[run] = {}
            for nick, s in states.items():
                decisions = [int(s.alarmed and i >= s.alarm_round) for i in range(1, len(s.scores) + 1)]
                out[run][nick] = UserTrace(list(s.scores), decisions)
        return out

    def export_run_logs(self, path) -> None:
        export_run_logs(self.records, path)
