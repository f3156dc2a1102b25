import json
import math
import random
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from erisklab.corpus import Corpus, CorpusError
from erisklab.risk_scoring import (
    ExternalScorer,
    ExternalScorerEndpoint,
    ExternalScorerError,
    WordConfidenceClassifier,
    WordConfidenceModel,
    export_extended_vocab,
    external_score,
    f1_positive,
    fit_word_confidence,
    read_vocab,
    score_document,
    score_many,
    select_best_model,
    top_confidence_words,
    train_word_confidence,
)
from erisklab.textprep import user_document

from conftest import history
from oracles import confusion_f1


def test_casino_example():
    m = fit_word_confidence(["casino win", "casino loss", "hello world", "nice day"], [1, 1, 0, 0], alpha=1.0)
    assert m.vocab_size == 7
    assert m.weights["casino"] == pytest.approx(math.log(3))
    assert round(m.weights["casino"], 4) == 1.0986
    assert top_confidence_words(m, 1) == ["casino"]
    assert score_document(m, "casino casino") == pytest.approx(0.75)
    assert score_document(m, "") == 0.5
    assert score_document(m, "unseen words") == 0.5


def test_requires_both_classes():
    with pytest.raises(ValueError):
        fit_word_confidence(["a", "b"], [1, 1])


def test_alpha_zero_unseen_token_raises():
    with pytest.raises(ValueError, match="alpha"):
        fit_word_confidence(["casino", "home"], [1, 0], alpha=0.0)


def test_top_words_order_and_ties():
    m = WordConfidenceModel({"b": 1.0, "a": 1.0, "c": 2.0, "d": -1.0}, 4, 4, 4)
    assert top_confidence_words(m, 3) == ["c", "a", "b"]
    assert top_confidence_words(m, 40) == ["c", "a", "b", "d"]


@given(st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=30), st.integers(1, 8), st.integers(1, 8))
def test_top_words_prefix_property(tokens, k1, k2):
    docs = [" ".join(tokens), "a b"]
    m = fit_word_confidence(docs, [1, 0])
    small, big = sorted((k1, k2))
    assert top_confidence_words(m, small) == top_confidence_words(m, big)[:small]


@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=20),
       st.lists(st.sampled_from("abcdef"), min_size=1, max_size=20))
def test_label_swap_antisymmetry(pos, neg):
    a = fit_word_confidence([" ".join(pos), " ".join(neg)], [1, 0])
    b = fit_word_confidence([" ".join(pos), " ".join(neg)], [0, 1])
    for w, v in a.weights.items():
        assert b.weights[w] == pytest.approx(-v, abs=1e-12)


def test_model_roundtrip(tmp_path):
    m = fit_word_confidence(["casino bet", "home cat"], [1, 0])
    m.save(tmp_path / "m.json")
    assert WordConfidenceModel.load(tmp_path / "m.json") == m


def test_train_word_confidence_on_corpus(tiny_corpus, toy_lexicon):
    m = train_word_confidence(tiny_corpus)
    assert m.vocab_size == len(m.weights) > 0
    train = Corpus("t", (history("p", ["awful casino", "good casino"], "positive"),
                         history("n", ["awful garden", "good park"], "negative")))
    m = train_word_confidence(train, lexicon=toy_lexicon)
    assert set(m.weights) == {"awful", "casino", "garden"}
    unlabeled = Corpus("u", tuple(history(f"u{i}", ["x"], None) for i in range(2)))
    with pytest.raises(CorpusError):
        train_word_confidence(unlabeled)


def _labeled_corpus(seed, n=30):
    rng = random.Random(seed)
    users = []
    for i in range(n):
        label = "positive" if i % 3 == 0 else "negative"
        word = "casino" if label == "positive" else "garden"
        users.append(history(f"v{i}", [f"{word} day {j}" for j in range(rng.randint(1, 4))], label))
    return Corpus("valid", tuple(users))


class _Const:
    def __init__(self, p):
        self.p = p

    def score(self, text):
        return self.p


class _Keyword:
    def __init__(self, word):
        self.word = word

    def score(self, text):
        return 0.9 if self.word in text.split() else 0.1


def test_select_best_model_matches_oracle():
    valid = _labeled_corpus(0)
    candidates = [_Const(0.1), _Keyword("garden"), _Keyword("casino"), _Const(0.9), _Keyword("casino")]
    docs = [user_document(u, None) for u in valid.users]
    y = [int(u.label == "positive") for u in valid.users]
    f1s = [confusion_f1(y, [int(c.score(d) > 0.5) for d in docs]) for c in candidates]
    expected = f1s.index(max(f1s))
    assert select_best_model(candidates, valid) == expected == 2


def test_select_best_model_rejects_unlabeled():
    valid = Corpus("v", (history("a", ["x"], None),))
    with pytest.raises(CorpusError):
        select_best_model([_Const(0.1)], valid)


def test_f1_positive_matches_oracle():
    rng = random.Random(3)
    for _ in range(200):
        y = [rng.randint(0, 1) for _ in range(20)]
        p = [rng.randint(0, 1) for _ in range(20)]
        assert f1_positive(y, p) == pytest.approx(confusion_f1(y, p))


def test_vocab_roundtrip(tmp_path):
    words = ["casino", "bet", "ünïcode"]
    export_extended_vocab(words, tmp_path / "v.txt")
    assert read_vocab(tmp_path / "v.txt") == words
    with pytest.raises(ValueError):
        export_extended_vocab([], tmp_path / "e.txt")


def test_sklearn_classifier():
    X = ["casino casino bet", "home garden", "bet poker", "cat dog home"]
    clf = WordConfidenceClassifier(alpha=0.5).fit(X, ["positive", "negative", "positive", "negative"])
    assert clf.get_params() == {"alpha": 0.5, "threshold": 0.5}
    proba = clf.predict_proba(["casino", "garden", ""])
    assert proba.shape == (3, 2)
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert list(clf.predict(["casino", "garden"])) == [1, 0]
    assert clf.score(X, [1, 0, 1, 0]) == 1.0
    with pytest.raises(ValueError):
        clf.predict("casino")


STDIO_SCORER = (
    "import sys, json\n"
    "for line in sys.stdin:\n"
    "    r = json.loads(line)\n"
    "    print(json.dumps({'id': r['id'], 'score': MODE}))\n"
)


def _stdio_endpoint(tmp_path, mode):
    script = tmp_path / "scorer.py"
    script.write_text(STDIO_SCORER.replace("MODE", mode))
    return ExternalScorerEndpoint.parse(f"stdio:{sys.executable} {script}", timeout=30)


def test_external_stdio(tmp_path):
    e = _stdio_endpoint(tmp_path, "min(1.0, len(r['text']) / 10)")
    assert external_score(e, [("a", "xx"), ("b", "x" * 30)]) == [("a", 0.2), ("b", 1.0)]
    assert external_score(e, []) == []
    assert ExternalScorer(e).score("xxxxx") == 0.5
    assert score_many(ExternalScorer(e), [("u:0", "x")]) == {"u:0": 0.1}


def test_external_stdio_out_of_range(tmp_path):
    e = _stdio_endpoint(tmp_path, "1.5")
    with pytest.raises(ExternalScorerError, match="out of range"):
        external_score(e, [("a", "x")])


def test_external_stdio_missing_id(tmp_path):
    script = tmp_path / "s.py"
    script.write_text("import sys\nsys.stdin.read()\n")
    e = ExternalScorerEndpoint("stdio", f"{sys.executable} {script}")
    with pytest.raises(ExternalScorerError, match="missing"):
        external_score(e, [("a", "x")])


def test_external_stdio_malformed(tmp_path):
    script = tmp_path / "s.py"
    script.write_text("import sys\nsys.stdin.read()\nprint('not json')\n")
    e = ExternalScorerEndpoint("stdio", f"{sys.executable} {script}")
    with pytest.raises(ExternalScorerError, match="malformed"):
        external_score(e, [("a", "x")])


def _http_scorer(fn):
    class H(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def do_POST(self):
            reqs = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            body = json.dumps(fn(reqs)).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), H)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    return httpd, f"http://127.0.0.1:{httpd.server_address[1]}"


def test_external_http():
    httpd, url = _http_scorer(lambda reqs: [{"id": r["id"], "score": 0.25} for r in reversed(reqs)])
    try:
        e = ExternalScorerEndpoint.parse(url)
        assert external_score(e, [("a", "x"), ("b", "y")]) == [("a", 0.25), ("b", 0.25)]
    finally:
        httpd.shutdown()


def test_external_http_bad_payload():
    httpd, url = _http_scorer(lambda reqs: {"oops": 1})
    try:
        with pytest.raises(ExternalScorerError, match="malformed"):
            external_score(ExternalScorerEndpoint.parse(url), [("a", "x")])
    finally:
        httpd.shutdown()


def test_external_unreachable():
    e = ExternalScorerEndpoint.parse("http://127.0.0.1:9", timeout=2)
    with pytest.raises(ExternalScorerError):
        external_score(e, [("a", "x")])


def test_endpoint_parse_errors():
    with pytest.raises(ValueError):
        ExternalScorerEndpoint.parse("ftp://x")
    with pytest.raises(ValueError):
        ExternalScorerEndpoint("grpc", "x")
