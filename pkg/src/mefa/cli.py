"""Command-line entry point: ``mefa run|eval|sweep|gen-validation|cache|convert``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .domain import MefaConfig, dumps_canonical
from .evalbench import (
    VALIDATION_TEMPERATURE,
    convert_maven_ere,
    dump_corpus,
    evaluate,
    generate_validation,
    gold_set,
    load_corpus,
    load_predictions,
    load_seeds,
)
from .gateway import BackendSpec, DiskCache, Gateway, GatewayError
from .pipeline import DEFAULT_GRID, format_table, run_pipeline, sweep

log = logging.getLogger("mefa")


def _load_config(args) -> MefaConfig:
    config = MefaConfig.from_file(args.config) if args.config else MefaConfig()
    overrides = {}
    if getattr(args, "rounds", None) is not None:
        overrides["rounds"] = args.rounds
    if getattr(args, "concurrency", None) is not None:
        overrides["concurrency_limit"] = args.concurrency
    if overrides:
        config = MefaConfig.from_dict({**config.to_dict(), **overrides})
    return config


def _make_gateway(args, config: MefaConfig, temperature: float | None = None) -> Gateway:
    responses = None
    if args.backend == "scripted":
        if not args.responses:
            raise SystemExit("--backend scripted needs --responses FILE (JSON object)")
        responses = json.loads(Path(args.responses).read_text(encoding="utf-8"))
    spec = BackendSpec(
        kind=args.backend,
        model=args.model or ("scripted" if args.backend == "scripted" else ""),
        endpoint=args.endpoint,
        api_key_env=args.api_key_env,
        temperature=config.temperature if temperature is None else temperature,
        top_p=config.top_p,
        cache_dir=args.cache,
        responses=responses,
    )
    return Gateway(spec, retries=config.retries, timeout=config.timeout_seconds)


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--backend", choices=("http", "replay", "scripted"), default="replay")
    p.add_argument("--model", help="model name (also part of every cache key)")
    p.add_argument("--endpoint", help="base URL of a chat-completions API")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY",
                   help="environment variable holding the API key")
    p.add_argument("--cache", help="response cache directory")
    p.add_argument("--responses", help="scripted backend: JSON object of prompt/label -> answer")
    p.add_argument("--templates", help="override the prompt template directory")


def cmd_run(args) -> int:
    config = _load_config(args)
    docs = load_corpus(args.corpus)
    gateway = _make_gateway(args, config)
    result = run_pipeline(docs, config, gateway, aggregator=args.aggregator, scope=args.scope,
                          out_dir=args.out, corpus_path=args.corpus, template_dir=args.templates)
    counts = result.manifest["counts"]
    print(f"{counts['pairs']} pairs, {sum(d.directed is not None for d in result.predictions)} causal, "
          f"{counts['parse_fallbacks']} parse fallbacks -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    docs = load_corpus(args.corpus)
    preds = load_predictions(args.predictions)
    gold = gold_set(docs, args.scope)
    modes = ("ei", "di") if args.mode == "both" else (args.mode,)
    for mode in modes:
        print(dumps_canonical(evaluate(gold, preds, mode).to_dict()))
    return 0


def _parse_grid(spec: str | None) -> dict:
    if not spec:
        return DEFAULT_GRID
    grid = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, values = part.split("=", 1)
        grid[key.strip()] = [float(v) for v in values.split(",") if v.strip()]
    return grid


def cmd_sweep(args) -> int:
    config = _load_config(args)
    docs = load_corpus(args.corpus)
    gateway = _make_gateway(args, config)
    rows = sweep(docs, config, gateway, _parse_grid(args.grid), aggregator=args.aggregator,
                 scope=args.scope, template_dir=args.templates)
    table = format_table(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def cmd_gen_validation(args) -> int:
    config = _load_config(args)
    gateway = _make_gateway(args, config, temperature=VALIDATION_TEMPERATURE)
    seeds = load_seeds(args.seeds)
    docs = generate_validation(seeds, gateway, rewrite=not args.no_rewrite,
                               expand=not args.no_expand, extract=args.extract)
    dump_corpus(docs, args.out)
    print(f"{len(docs)} documents from {len(seeds)} seeds -> {args.out}")
    return 0


def cmd_cache(args) -> int:
    cache = DiskCache(args.cache)
    if args.action == "stats":
        entries = cache.entries()
        size = sum(len(e.raw_response.encode("utf-8")) for e in entries)
        print(dumps_canonical({"entries": len(entries), "response_bytes": size}))
    elif args.action == "clear":
        print(f"removed {cache.clear()} entries")
    else:
        out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
        try:
            for e in cache.entries():
                out.write(dumps_canonical(e.__dict__) + "\n")
        finally:
            if out is not sys.stdout:
                out.close()
    return 0


def cmd_convert(args) -> int:
    docs = []
    with open(args.input, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                docs.append(convert_maven_ere(json.loads(line)))
    dump_corpus(docs, args.out)
    print(f"{len(docs)} documents -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mefa", description="Zero-shot event causality identification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="gather evidence and decide every event pair")
    p.add_argument("--corpus", required=True)
    _add_backend_flags(p)
    p.add_argument("--aggregator", choices=("choquet", "wavg", "expavg", "einstein", "meda"),
                   default="choquet")
    p.add_argument("--scope", choices=("intra", "inter", "both"), default="both")
    p.add_argument("--rounds", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a predictions file against gold relations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", choices=("ei", "di", "both"), default="both")
    p.add_argument("--scope", choices=("intra", "inter", "both"), default="both")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid search delta/theta/a/b over cached evidence")
    p.add_argument("--corpus", required=True)
    _add_backend_flags(p)
    p.add_argument("--aggregator", choices=("choquet", "wavg", "expavg", "einstein", "meda"),
                   default="choquet")
    p.add_argument("--scope", choices=("intra", "inter", "both"), default="both")
    p.add_argument("--rounds", type=int)
    p.add_argument("--grid", help='e.g. "delta=0.3,0.6;theta=0.6,0.8" (default: full search grid)')
    p.add_argument("--out", help="write the table (TSV) here as well")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-validation", help="build validation documents from causal seeds")
    p.add_argument("--seeds", required=True, help="JSONL of {cause, effect, sentence}")
    _add_backend_flags(p)
    p.add_argument("--no-rewrite", action="store_true")
    p.add_argument("--no-expand", action="store_true")
    p.add_argument("--extract", action="store_true", help="also extract unlabeled mentions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_validation)

    p = sub.add_parser("cache", help="inspect or manage the response cache")
    p.add_argument("action", choices=("stats", "clear", "export"))
    p.add_argument("--cache", required=True)
    p.add_argument("--out", help="export destination (default stdout)")
    p.set_defaults(func=cmd_cache)

    p = sub.add_parser("convert", help="convert MAVEN-ERE style JSONL into the canonical corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GatewayError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
