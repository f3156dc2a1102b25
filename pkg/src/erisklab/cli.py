"""Command line entry point: ``erisklab <subcommand> ...``.

Exit status is 0 on success, 2 for configuration errors (bad flags, missing
input files, invalid config values) and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__

log = logging.getLogger("erisklab")

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [], "")]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _existing(path, what="file") -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {path}")
    return p


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _emit(text: str, out=None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sentiment_lexicon(args):
    from .synthetic import default_lexicon
    from .textprep import SentimentLexicon

    if getattr(args, "no_negativity_filter", False):
        return None
    if getattr(args, "sentiment_lexicon", None):
        return SentimentLexicon.load(_existing(args.sentiment_lexicon, "sentiment lexicon"))
    return default_lexicon()


# ---------------------------------------------------------------- subcommands

def cmd_corpus_stats(args) -> int:
    from .corpus import corpus_stats, load_corpus
    from .report import corpus_table, table_to_json

    _need(args, "input")
    stats = [corpus_stats(load_corpus(_existing(p))) for p in args.input]
    table = corpus_table(stats)
    if args.json_out:
        Path(args.json_out).write_text(table_to_json(table), encoding="utf-8")
    _emit(table.render(args.format, args.precision), args.out)
    return 0


def cmd_make_synthetic(args) -> int:
    from .synthetic import SyntheticSpec, write_synthetic

    _need(args, "out")
    try:
        spec = SyntheticSpec(
            n_users=args.n_users, positive_fraction=args.positive_fraction,
            min_posts=args.min_posts, max_posts=args.max_posts,
            injection_rate=args.injection_rate, signal_density=args.signal_density,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    corpus = write_synthetic(spec, args.out, name=Path(args.out).stem)
    log.info("wrote %d users (%d positive) to %s", len(corpus), spec.n_positive, args.out)
    return 0


def cmd_train(args) -> int:
    from .corpus import load_corpus
    from .risk_scoring import train_word_confidence

    _need(args, "corpus", "out")
    corpus = load_corpus(_existing(args.corpus))
    model = train_word_confidence(corpus, alpha=args.alpha, lexicon=_sentiment_lexicon(args))
    model.save(args.out)
    log.info("trained on %d users, vocabulary %d -> %s", len(corpus), model.vocab_size, args.out)
    return 0


def cmd_select_vocab(args) -> int:
    from .risk_scoring import WordConfidenceModel, export_extended_vocab, top_confidence_words

    _need(args, "model", "out")
    model = WordConfidenceModel.load(_existing(args.model, "model"))
    words = top_confidence_words(model, args.k)
    export_extended_vocab(words, args.out)
    log.info("wrote %d words to %s", len(words), args.out)
    return 0


def cmd_serve(args) -> int:
    from .corpus import load_corpus
    from .stream_protocol import MockServer, start_http_server
    import time

    _need(args, "corpus", "token")
    server = MockServer(load_corpus(_existing(args.corpus)), log_dir=args.log_dir)
    server.register(args.token, args.runs)
    httpd, url = start_http_server(server, args.host, args.port)
    print(url, flush=True)
    try:
        while True:
            time.sleep(0.2)
            if args.exit_when_finished and server.teams[args.token].finished:
                break
    except KeyboardInterrupt:
        pass
    finally:
        httpd.shutdown()
        httpd.server_close()
    return 0


def _policy(args):
    from .decision_policy import PolicyConfig

    if args.policy:
        try:
            return PolicyConfig.load(_existing(args.policy, "policy config"))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid policy config: {exc}") from exc
    return PolicyConfig()


def cmd_client(args) -> int:
    from .early_metrics import timing_report
    from .report import timing_table
    from .risk_scoring import ExternalScorer, ExternalScorerEndpoint, WordConfidenceModel
    from .stream_protocol import EarlyClient, HttpConnection

    _need(args, "server", "token")
    scorers = [WordConfidenceModel.load(_existing(m, "model")) for m in args.model or []]
    for spec in args.external or []:
        try:
            scorers.append(ExternalScorer(ExternalScorerEndpoint.parse(spec, args.timeout)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not scorers:
        raise ConfigError("give at least one --model or --external scorer")
    client = EarlyClient(HttpConnection(args.server, args.token), scorers, _policy(args))
    records = client.run()
    if args.log_out:
        client.export_run_logs(args.log_out)
    _emit(timing_table(timing_report(records)).render(args.format))
    return 0


def _sentences(path, cfg, sentiment):
    from .corpus import load_corpus
    from .textprep import filter_negative, normalize

    path = _existing(path)
    if path.suffix in (".tsv", ".txt"):
        raw = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if "\t" in line:
                sid, text = line.split("\t", 1)
                raw.append((sid, text))
    else:
        raw = [(f"{u.nick}_{i}", p.text) for u in load_corpus(path) for i, p in enumerate(u.posts, start=1)]
    sents = [(sid, normalize(text, cfg)) for sid, text in raw]
    return filter_negative(sents, sentiment) if sentiment else sents


def cmd_rank_symptoms(args) -> int:
    from .symptom_ranking import HashEmbeddingProvider, SimilarityRanker, TableEmbeddingProvider, load_symptoms, write_run
    from .textprep import DEFAULT_NORMALIZATION, NormalizationConfig, PosLexicon, load_emoji_map, pos_extract

    _need(args, "corpus", "symptoms", "pos_lexicon", "out_dir")
    if bool(args.embeddings) == bool(args.test_provider):
        raise ConfigError("give exactly one of --embeddings or --test-provider")
    symptoms = load_symptoms(_existing(args.symptoms, "symptom spec"))
    provider = (HashEmbeddingProvider(args.dim, salt=str(args.seed)) if args.test_provider
                else TableEmbeddingProvider.load(_existing(args.embeddings, "embeddings")))
    cfg = DEFAULT_NORMALIZATION
    if args.emoji_map:
        cfg = NormalizationConfig(emoji_map=load_emoji_map(_existing(args.emoji_map)))
    pl = PosLexicon.load(_existing(args.pos_lexicon, "POS lexicon"),
                         _existing(args.stopwords) if args.stopwords else None)
    ranker = SimilarityRanker(provider, args.summarizer, args.limit).fit(symptoms)
    sentiment = _sentiment_lexicon(args)
    sentences = [(sid, pos_extract(text, pl, ranker.symptom_words_))
                 for sid, text in _sentences(args.corpus, cfg, sentiment)]
    rankings = ranker.rank(sentences)
    write_run(rankings, args.out_dir)
    log.info("ranked %d sentences for %d symptoms -> %s", len(sentences), len(rankings), args.out_dir)
    return 0


def cmd_eval_rankings(args) -> int:
    from .report import per_symptom_table, run_table, table_to_json
    from .symptom_ranking import evaluate_run, load_qrels, read_run

    _need(args, "run_dir", "qrels")
    run_dir = _existing(args.run_dir, "run directory")
    result = evaluate_run(read_run(run_dir, args.n_symptoms), load_qrels(_existing(args.qrels), args.scheme),
                          args.n_symptoms)
    table = per_symptom_table(result) if args.per_symptom else run_table({run_dir.name: result})
    if args.json_out:
        Path(args.json_out).write_text(table_to_json(table), encoding="utf-8")
    _emit(table.render(args.format, args.precision), args.out)
    return 0


def cmd_eval_early(args) -> int:
    from .corpus import load_corpus
    from .early_metrics import EarlyMetricsConfig, evaluate_run, timing_report
    from .report import Table, checkpoint_table, decision_table, table_to_json, timing_table
    from .stream_protocol import read_records, traces_from_records

    _need(args, "logs", "gold")
    records = read_records(_existing(args.logs, "run log"))
    gold = load_corpus(_existing(args.gold)).gold
    try:
        cfg = EarlyMetricsConfig(deadlines=tuple(_int_list(args.deadlines)), penalty_p=args.penalty_p,
                                 latency_mode=args.latency_mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    checkpoints = _int_list(args.checkpoints)
    runs = traces_from_records(records)
    decisions, cps = [], {}
    for run in sorted(runs):
        dm, cp = evaluate_run(runs[run], gold, cfg, checkpoints)
        decisions.append((f"run{run}", dm))
        cps[f"run{run}"] = cp
    t5 = decision_table([dm for _, dm in decisions])
    t5 = Table(["Model"] + t5.header, [[name] + row for (name, _), row in zip(decisions, t5.rows)])
    t6 = Table(["Ranking", "Metric"] + list(cps), [])
    per_run = [checkpoint_table(c).rows for c in cps.values()]
    for i, row in enumerate(per_run[0] if per_run else []):
        t6.rows.append(row[:2] + [rows[i][2] for rows in per_run])
    t7 = timing_table(timing_report(records))
    parts = [t5.render(args.format, args.precision), t6.render(args.format, args.precision),
             t7.render(args.format, args.precision)]
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps({"tables": [json.loads(table_to_json(t)) for t in (t5, t6, t7)]}), encoding="utf-8")
    _emit("\n".join(parts), args.out)
    return 0


def cmd_report(args) -> int:
    from .report import table_from_json

    _need(args, "input")
    obj = json.loads(_existing(args.input).read_text(encoding="utf-8"))
    tables = obj["tables"] if "tables" in obj else [obj]
    _emit("\n".join(table_from_json(t).render(args.format, args.precision) for t in tables), args.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags override)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["csv", "md"], default="csv")
    common.add_argument("--precision", type=int, default=3, help="decimals in rendered tables")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--out", help="write the rendered table here instead of stdout")

    p = argparse.ArgumentParser(prog="erisklab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("corpus-stats", cmd_corpus_stats, "size, posts-per-user and words-per-post statistics of JSONL corpora")
    sp.add_argument("--input", nargs="+")
    sp.add_argument("--json-out")

    sp = add("make-synthetic", cmd_make_synthetic, "write a seeded planted-signal corpus")
    sp.add_argument("--n-users", type=int, default=200)
    sp.add_argument("--positive-fraction", type=float, default=0.1)
    sp.add_argument("--min-posts", type=int, default=20)
    sp.add_argument("--max-posts", type=int, default=60)
    sp.add_argument("--injection-rate", type=float, default=0.8)
    sp.add_argument("--signal-density", type=float, default=0.4)

    def lexicon_opts(sp):
        sp.add_argument("--sentiment-lexicon", help="token<TAB>valence file (default: bundled demo lexicon)")
        sp.add_argument("--no-negativity-filter", action="store_true")

    sp = add("train", cmd_train, "train a word-confidence risk model")
    sp.add_argument("--corpus")
    sp.add_argument("--alpha", type=float, default=1.0)
    lexicon_opts(sp)

    sp = add("select-vocab", cmd_select_vocab, "export the top-k positive-confidence words")
    sp.add_argument("--model")
    sp.add_argument("--k", type=int, default=40)

    sp = add("serve", cmd_serve, "run the mock evaluation server")
    sp.add_argument("--corpus")
    sp.add_argument("--token")
    sp.add_argument("--runs", type=int, default=1)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--log-dir", default="server_logs")
    sp.add_argument("--exit-when-finished", action="store_true")

    sp = add("client", cmd_client, "stream a server's rounds through one or more scorers")
    sp.add_argument("--server")
    sp.add_argument("--token")
    sp.add_argument("--model", action="append", help="word-confidence model JSON (repeatable; one run each)")
    sp.add_argument("--external", action="append", help="http://host:port or stdio:<command> (repeatable)")
    sp.add_argument("--timeout", type=float, default=30.0)
    sp.add_argument("--policy", help="policy JSON")
    sp.add_argument("--log-out", help="write the client's run log (JSONL)")

    sp = add("rank-symptoms", cmd_rank_symptoms, "rank sentences per symptom by embedding similarity")
    sp.add_argument("--corpus", help="JSONL corpus (posts become sentences) or id<TAB>text file")
    sp.add_argument("--symptoms")
    sp.add_argument("--embeddings")
    sp.add_argument("--test-provider", action="store_true", help="use seeded hash embeddings")
    sp.add_argument("--dim", type=int, default=32)
    sp.add_argument("--summarizer", choices=["max", "avg"], default="max")
    sp.add_argument("--limit", type=int, default=1000)
    sp.add_argument("--pos-lexicon")
    sp.add_argument("--stopwords")
    sp.add_argument("--emoji-map")
    sp.add_argument("--out-dir")
    lexicon_opts(sp)

    sp = add("eval-rankings", cmd_eval_rankings, "AP / R-PREC / P@10 / NDCG@1000 of a ranking run")
    sp.add_argument("--run-dir")
    sp.add_argument("--qrels")
    sp.add_argument("--scheme", choices=["majority", "unanimity"], default="majority")
    sp.add_argument("--n-symptoms", type=int, default=21)
    sp.add_argument("--per-symptom", action="store_true")
    sp.add_argument("--json-out")

    sp = add("eval-early", cmd_eval_early, "decision, ranking and timing metrics from a run log")
    sp.add_argument("--logs")
    sp.add_argument("--gold", help="labeled JSONL corpus")
    sp.add_argument("--deadlines", default="5,50")
    sp.add_argument("--checkpoints", default="1,100,500,1000")
    sp.add_argument("--penalty-p", type=float, default=0.0078)
    sp.add_argument("--latency-mode", choices=["median_penalty", "median_k"], default="median_penalty")
    sp.add_argument("--json-out")

    sp = add("report", cmd_report, "re-render tables saved with --json-out")
    sp.add_argument("--input")

    return p


def _apply_config(parser, args, argv):
    if not args.config:
        return args
    try:
        cfg = json.loads(_existing(args.config, "config file").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    # explicit flags win: re-parse with the config as defaults
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(k.replace("-", "_") for k in cfg if k.replace("-", "_") not in known)
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {unknown}")
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _apply_config(parser, args, argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"erisklab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        log.debug("failure", exc_info=True)
        print(f"erisklab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
