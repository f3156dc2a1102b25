"""Seeded planted-signal corpora for desk-scale experiments."""
from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from importlib import resources

from .corpus import NEGATIVE, POSITIVE, Corpus, Post, UserHistory, save_corpus
from .textprep import SentimentLexicon

DEFAULT_SIGNAL = (
    "casino", "bet", "betting", "poker", "slots", "jackpot", "wager",
    "roulette", "blackjack", "lottery", "odds", "bookie",
)

BACKGROUND = (
    "the a to and of in it is that was for on with as at my this have be but not "
    "they you we he she his her our their from by about just like so what all "
    "there when up out if one time people get would can more today week day night "
    "morning work home house car food dinner lunch coffee music movie game book "
    "friend family mom dad brother sister dog cat city street school job office "
    "weather rain sun summer winter trip phone computer internet video picture "
    "went saw made took said thought know think want need feel look going come "
    "make see watch read play cook walk talk call try help start finish buy sell "
    "new old big small long short next last first other same different own right "
    "left early late still really very much many some any every never always "
    "maybe probably actually anyway also too again here where why how who which "
    "yesterday tomorrow weekend month year hour minute plan idea question answer "
    "story news post thread reddit comment reply thing stuff way place point"
).split()


def _negative_words() -> tuple:
    lex = default_lexicon()
    return tuple(sorted(w for w, v in lex.entries.items() if v < 0))


def default_lexicon() -> SentimentLexicon:
    """The small sentiment lexicon shipped with the package."""
    with resources.as_file(resources.files("erisklab") / "data" / "sentiment_lexicon.tsv") as p:
        return SentimentLexicon.load(p)


@dataclass(frozen=True)
class SyntheticSpec:
    n_users: int = 200
    positive_fraction: float = 0.1
    min_posts: int = 20
    max_posts: int = 60
    signal_lexicon: tuple = DEFAULT_SIGNAL
    injection_rate: float = 0.8
    signal_density: float = 0.4  # share of tokens replaced in an injected post
    negative_rate: float = 0.5  # chance a post carries a negative sentiment word
    noise_rate: float = 0.02  # chance a negative user's post mentions one signal word
    min_words: int = 8
    max_words: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("n_users must be >= 2")
        if not 0 < self.positive_fraction < 1:
            raise ValueError("positive_fraction must lie in (0, 1)")
        if not 0 < self.injection_rate <= 1:
            raise ValueError("injection_rate must lie in (0, 1]")
        if not 1 <= self.min_posts <= self.max_posts:
            raise ValueError("need 1 <= min_posts <= max_posts")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError("need 1 <= min_words <= max_words")
        if not self.signal_lexicon:
            raise ValueError("signal_lexicon must be non-empty")
        if not 0 < self.signal_density <= 1:
            raise ValueError("signal_density must lie in (0, 1]")
        if not (0 <= self.negative_rate <= 1 and 0 <= self.noise_rate <= 1):
            raise ValueError("negative_rate and noise_rate must lie in [0, 1]")

    @property
    def n_positive(self) -> int:
        return max(1, min(self.n_users - 1, int(self.n_users * self.positive_fraction + 0.5)))


def make_synthetic(spec: SyntheticSpec, name: str = "synthetic") -> Corpus:
    rng = random.Random(spec.seed)
    negatives = _negative_words()
    positives = set(rng.sample(range(spec.n_users), spec.n_positive))
    start = datetime(2021, 1, 1, tzinfo=timezone.utc)
    width = len(str(spec.n_users))
    users = []
    for i in range(spec.n_users):
        is_pos = i in positives
        nick = f"subject{i:0{width}d}"
        t = start + timedelta(minutes=rng.randrange(60 * 24 * 30))
        posts = []
        for _ in range(rng.randint(spec.min_posts, spec.max_posts)):
            words = [rng.choice(BACKGROUND) for _ in range(rng.randint(spec.min_words, spec.max_words))]
            if rng.random() < spec.negative_rate:
                words[rng.randrange(len(words))] = rng.choice(negatives)
            if is_pos and rng.random() < spec.injection_rate:
                n_sig = max(1, int(len(words) * spec.signal_density))
                for j in rng.sample(range(len(words)), n_sig):
                    words[j] = rng.choice(spec.signal_lexicon)
            elif not is_pos and rng.random() < spec.noise_rate:
                words[rng.randrange(len(words))] = rng.choice(spec.signal_lexicon)
            t += timedelta(minutes=rng.randint(10, 60 * 48))
            posts.append(Post(nick, t, "", " ".join(words)))
        users.append(UserHistory(nick, tuple(posts), POSITIVE if is_pos else NEGATIVE))
    return Corpus(name, tuple(users))


def write_synthetic(spec: SyntheticSpec, path, name: str = "synthetic") -> Corpus:
    corpus = make_synthetic(spec, name)
    save_corpus(corpus, path)
    return corpus
