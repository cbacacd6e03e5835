"""Command-line front door for the localization pipeline.

One subcommand per stage: ingest raw annotations, translate, detect, run
the review service, materialize a budget, print statistics, and score
retrieval runs. Options can come from an INI config file; explicit flags
win over the file, the file wins over defaults.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import analytics, retrieval_eval, review
from .corpus import Corpus, CorpusError, CorpusStore, ingest_didemo
from .detect import DEFAULT_LOANWORDS, detect_corpus, load_lexicon
from .provider import (
    HttpTransport,
    JUDGE_KEY_ENV,
    MockTransport,
    ProviderClient,
    ProviderConfig,
    TRANSLATE_KEY_ENV,
)
from .translate import translate_corpus

logger = logging.getLogger(__name__)

TRANSLATE_TEMPERATURE = 0.7
JUDGE_TEMPERATURE = 0.0


def _load_config(path: Optional[str]) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path:
        read = cfg.read(path)
        if not read:
            raise CorpusError(f"cannot read config file: {path}")
    return cfg


def _cfg(cfg: configparser.ConfigParser, section: str, key: str, fallback=None):
    if cfg.has_option(section, key):
        return cfg.get(section, key)
    return fallback


def _pick(flag_value, cfg_value, default):
    if flag_value is not None:
        return flag_value
    if cfg_value is not None:
        return cfg_value
    return default


def _build_client(args, cfg, role: str) -> ProviderClient:
    section = "judge" if role == "judge" else "provider"
    default_temp = JUDGE_TEMPERATURE if role == "judge" else TRANSLATE_TEMPERATURE
    model = _pick(args.model, _cfg(cfg, section, "model"), f"mock-{role}")
    temperature = float(
        _pick(args.temperature, _cfg(cfg, section, "temperature"), default_temp)
    )
    top_p = float(_pick(args.top_p, _cfg(cfg, section, "top_p"), 1.0))
    cache_dir = _pick(args.cache_dir, _cfg(cfg, section, "cache_dir"), None)
    max_parallel = int(_pick(None, _cfg(cfg, section, "max_parallel"), 4))
    config = ProviderConfig(
        model=model,
        temperature=temperature,
        top_p=top_p,
        max_parallel=max_parallel,
        cache_dir=cache_dir,
    )
    if args.mock:
        transport = MockTransport(seed=args.seed)
    else:
        endpoint = _pick(args.endpoint, _cfg(cfg, section, "endpoint"), None)
        if not endpoint:
            raise CorpusError(
                f"no endpoint configured for the {role} provider; "
                "pass --endpoint, set it in the config file, or use --mock"
            )
        key_env = JUDGE_KEY_ENV if role == "judge" else TRANSLATE_KEY_ENV
        transport = HttpTransport(endpoint, key_env)
    return ProviderClient(transport, config)


def _load_corpus(args) -> tuple[Corpus, CorpusStore]:
    store = CorpusStore(args.corpus)
    corpus = store.load(recover=getattr(args, "recover", False))
    return corpus, store


def _emit(data: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True))
        return
    for key, value in data.items():
        print(f"{key}: {value}")


def cmd_ingest(args) -> int:
    sources = []
    assignment = {}
    for split in ("train", "val", "test"):
        for path in getattr(args, split) or []:
            sources.append(path)
            assignment[str(Path(path))] = split
    if not sources:
        raise CorpusError("no source files given; use --train/--val/--test")
    corpus = ingest_didemo(sources, assignment)
    CorpusStore(args.out).snapshot(corpus)
    print(f"ingested {len(corpus)} captions into {args.out}")
    print(f"corpus hash: {corpus.content_hash()}")
    return 0


def cmd_translate(args) -> int:
    cfg = _load_config(args.config)
    corpus, store = _load_corpus(args)
    client = _build_client(args, cfg, "translate")
    report = translate_corpus(corpus, client, store=store)
    store.snapshot(corpus)
    _emit(report.to_dict(), args.json)
    return 0 if report.failed == 0 else 1


def cmd_detect(args) -> int:
    cfg = _load_config(args.config)
    corpus, store = _load_corpus(args)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else DEFAULT_LOANWORDS
    judge = None if args.no_judge else _build_client(args, cfg, "judge")
    report = detect_corpus(corpus, judge_client=judge, lexicon=lexicon, store=store)
    store.snapshot(corpus)
    _emit(report.to_dict(), args.json)
    return 0


def cmd_review(args) -> int:
    cfg = _load_config(args.config)
    corpus, store = _load_corpus(args)
    budget = review.parse_budget(
        _pick(args.budget, _cfg(cfg, "review", "budget"), "few")
    )
    host = _pick(args.host, _cfg(cfg, "review", "host"), "127.0.0.1")
    port = int(_pick(args.port, _cfg(cfg, "review", "port"), 8000))
    static_dir = _pick(args.static, _cfg(cfg, "review", "static_dir"), None)
    print(f"serving {len(corpus)} captions on http://{host}:{port} (budget {budget})")
    review.serve(
        corpus,
        store=store,
        host=host,
        port=port,
        default_budget=budget,
        static_dir=static_dir,
    )
    return 0


def cmd_materialize(args) -> int:
    corpus, _ = _load_corpus(args)
    payload = review.render_materialized(corpus, args.budget)
    if args.out == "-":
        sys.stdout.write(payload)
    else:
        Path(args.out).write_text(payload, encoding="utf-8")
        lines = payload.count("\n") - 1
        print(f"wrote {lines} captions ({args.budget}) to {args.out}")
    return 0


def cmd_stats(args) -> int:
    corpus, _ = _load_corpus(args)
    data = {"summary": analytics.corpus_summary(corpus)}
    if args.full:
        data["wordcount_source"] = analytics.wordcount_stats(corpus, "source").to_dict()
        data["wordcount_target"] = analytics.wordcount_stats(corpus, "target").to_dict()
        data["ngrams_source"] = analytics.ngram_stats(corpus, "source")
        data["ngrams_target"] = analytics.ngram_stats(corpus, "target")
        data["error_breakdown"] = analytics.error_breakdown(corpus).to_dict()
    if args.json:
        print(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True))
    else:
        for section, payload in data.items():
            print(f"[{section}]")
            for key, value in payload.items():
                print(f"  {key}: {value}")
    return 0


def cmd_eval(args) -> int:
    report = retrieval_eval.evaluate_files(
        args.similarity,
        args.ground_truth,
        args.direction,
        "pessimistic" if args.pessimistic_ties else "optimistic",
    )
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.format_row())
    return 0


def cmd_sweep(args) -> int:
    tie = "pessimistic" if args.pessimistic_ties else "optimistic"
    reports = {
        budget: retrieval_eval.evaluate_files(
            getattr(args, budget), args.ground_truth, args.direction, tie
        )
        for budget in retrieval_eval.BUDGET_ORDER
    }
    ordered = retrieval_eval.budget_sweep(reports)
    if args.json:
        print(
            json.dumps(
                {budget: rep.to_dict() for budget, rep in ordered},
                indent=2,
                sort_keys=True,
            )
        )
    else:
        for budget, rep in ordered:
            print(f"{budget:5s}  {rep.format_row()}")
    return 0


def _add_corpus_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus file path")
    parser.add_argument(
        "--recover",
        action="store_true",
        help="tolerate a truncated final line from an interrupted run",
    )


def _add_provider_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--mock", action="store_true", help="use the offline mock provider")
    parser.add_argument("--seed", type=int, default=0, help="mock provider seed")
    parser.add_argument("--endpoint", help="provider HTTP endpoint")
    parser.add_argument("--model", help="model name")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--top-p", dest="top_p", type=float)
    parser.add_argument("--cache-dir", dest="cache_dir", help="response cache directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autoarabic",
        description="Localize a video-caption benchmark into Modern Standard Arabic.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a corpus from raw annotation files")
    p.add_argument("--out", required=True, help="corpus file to write")
    p.add_argument("--train", nargs="+", help="source files for the train split")
    p.add_argument("--val", nargs="+", help="source files for the val split")
    p.add_argument("--test", nargs="+", help="source files for the test split")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("translate", help="translate pending captions")
    _add_corpus_arg(p)
    _add_provider_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("detect", help="flag translation errors")
    _add_corpus_arg(p)
    _add_provider_args(p)
    p.add_argument("--no-judge", action="store_true", help="rules only, skip the judge")
    p.add_argument("--lexicon", help="loanword lexicon TSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("review", help="serve the post-editing API and UI")
    _add_corpus_arg(p)
    p.add_argument("--config", help="INI config file")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--budget", choices=[b.value for b in review.Budget])
    p.add_argument("--static", help="directory with the built review frontend")
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("materialize", help="write the published text for a budget")
    _add_corpus_arg(p)
    p.add_argument(
        "--budget", required=True, choices=[b.value for b in review.Budget]
    )
    p.add_argument("--out", required=True, help="output path, or - for stdout")
    p.set_defaults(func=cmd_materialize)

    p = sub.add_parser("stats", help="corpus statistics")
    _add_corpus_arg(p)
    p.add_argument("--full", action="store_true", help="include n-grams and error rates")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score one retrieval run")
    p.add_argument("--similarity", required=True, help="similarity matrix file")
    p.add_argument("--ground-truth", required=True, help="query/candidate TSV")
    p.add_argument("--direction", required=True, choices=retrieval_eval.DIRECTIONS)
    p.add_argument("--pessimistic-ties", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="score zero/few/full budget runs side by side")
    p.add_argument("--zero", required=True, help="similarity file for the zero budget")
    p.add_argument("--few", required=True, help="similarity file for the few budget")
    p.add_argument("--full", required=True, help="similarity file for the full budget")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--direction", required=True, choices=retrieval_eval.DIRECTIONS)
    p.add_argument("--pessimistic-ties", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
