"""Command-line entry point: ``hyposcore <command> ...``.

Exit codes: 0 success, 2 usage or input error, 3 evaluation aborted.
Every flag can also be set in a ``--config`` file of ``key = value`` lines.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import __version__
from .dataset import DatasetError, filter_by_length, load_corpus, sample, stats
from .evaluate import (
    EvalOptions,
    EvaluationAborted,
    RunManifest,
    check_abort,
    evaluate,
    file_digest,
    write_run,
)
from .llm import EndpointConfig, FixtureTransport, HttpTransport, LLMError
from .pinyin import PinyinError, default_lexicon, format_tokens, load_lexicon, transliterate
from .prompts import (
    PromptError,
    all_specs,
    build_direct_prompt,
    build_finetune_pair,
    load_template,
)
from .report import STATS_COLUMNS, pct, read_baseline, render, render_scores, stats_rows
from .scoring import (
    EmptyReference,
    UtteranceScore,
    cer,
    corpus_aggregate,
    oracles,
    pinyin_er,
)

logger = logging.getLogger("hyposcore")


class UsageError(Exception):
    pass


def _lexicon(args):
    if getattr(args, "lexicon", None):
        return load_lexicon(*args.lexicon)
    return default_lexicon()


def _spec(name: str):
    specs = all_specs()
    if name not in specs:
        raise UsageError(f"unknown spec {name!r}; valid names: {', '.join(specs)}")
    return specs[name]


def _template(args, style):
    return load_template(args.template, style) if getattr(args, "template", None) else None


# ---------------------------------------------------------------------------
# commands


def cmd_transliterate(args) -> int:
    lex = _lexicon(args)
    if args.file:
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = args.text or ""
    unknown: Counter = Counter()
    for line in text.splitlines():
        print(format_tokens(transliterate(line, lex, args.mode, args.strict, unknown)))
    if unknown:
        logger.warning("%d unknown Han character(s) passed through: %s",
                       sum(unknown.values()), "".join(sorted(unknown)))
    return 0


def _baselines(args):
    return read_baseline(args.baseline_run) if getattr(args, "baseline_run", None) else None


def cmd_score(args) -> int:
    lex = _lexicon(args)
    records = load_corpus(args.dataset)
    scores, skipped = [], 0
    per_utt = []
    for h in records:
        try:
            c = cer(h.one_best, h.transcription)
        except EmptyReference:
            logger.warning("skipping %s: empty reference", h.id)
            skipped += 1
            continue
        p = pinyin_er(h.one_best, h.transcription, lex, args.mode, not args.tone_insensitive)
        scores.append(UtteranceScore(h.id, h.corpus, c, pinyin=p))
        per_utt.append((h.id, h.corpus, p if args.metric == "pinyin" else c))
    baselines = _baselines(args)
    report = corpus_aggregate(scores, args.macro, skipped, baselines)
    if args.per_utt:
        label = "PinyinER%" if args.metric == "pinyin" else "CER%"
        rows = [[i, c, str(s.distance), str(s.ref_len), pct(s.rate)] for i, c, s in per_utt]
        sys.stdout.write(render(("id", "corpus", "errors", "ref_len", label), rows, args.format))
        print()
    sys.stdout.write(render_scores(report, args.format))
    return 0


def cmd_oracle(args) -> int:
    records = load_corpus(args.dataset)
    scores, skipped = [], 0
    for h in records:
        try:
            c = cer(h.one_best, h.transcription)
        except EmptyReference:
            logger.warning("skipping %s: empty reference", h.id)
            skipped += 1
            continue
        scores.append(UtteranceScore(h.id, h.corpus, c, oracle=oracles(h)))
    report = corpus_aggregate(scores, args.macro, skipped)
    ok = all(r.o_cp <= r.o_nb <= r.cer for r in report.rows if r.o_cp is not None)
    footer = [f"# check o_cp <= o_nb <= 1-best CER: {'ok' if ok else 'VIOLATED'}"]
    sys.stdout.write(render_scores(report, args.format, footer))
    return 0 if ok else 1


def cmd_prompt(args) -> int:
    spec = _spec(args.spec)
    if spec.baseline:
        raise UsageError("Baseline makes no model call and has no prompt")
    lex = _lexicon(args)
    template = _template(args, spec.style)
    records = load_corpus(args.dataset)
    rows = []
    for h in records:
        try:
            if spec.style == "finetune":
                prompt, response = build_finetune_pair(h, spec, lex, **({"template": template} if template else {}))
                rows.append({"prompt": prompt, "response": response})
            else:
                prompt = build_direct_prompt(h, spec, lex, **({"template": template} if template else {}))
                rows.append({"id": h.id, "corpus": h.corpus, "spec": args.spec,
                             "analysis_only": spec.analysis_only, "prompt": prompt})
        except PromptError as exc:
            logger.warning("skipping: %s", exc)
    if spec.analysis_only:
        logger.warning("%s includes ground-truth Pinyin: analysis only, unavailable in practice", args.spec)
    lines = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.spec}.jsonl").write_text(lines, encoding="utf-8", newline="\n")
        logger.info("wrote %d prompt(s) to %s", len(rows), out / f"{args.spec}.jsonl")
    else:
        sys.stdout.write(lines)
    return 0


def _endpoint(args) -> EndpointConfig:
    return EndpointConfig(
        base_url=args.base_url,
        model_name=args.model,
        temperature=args.temperature,
        timeout=args.timeout,
        max_retries=args.max_retries,
        backoff_initial=args.backoff,
        backoff_multiplier=args.backoff_multiplier,
        max_parallel=args.max_parallel,
    )


def _config_snapshot(args) -> dict:
    skip = {"func", "out", "config", "verbose", "argv"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _command_line(argv: list[str]) -> list[str]:
    # the output directory is where the manifest lives; leave it out so replays match
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def cmd_evaluate(args) -> int:
    spec = _spec(args.spec)
    lex = _lexicon(args)
    cfg = _endpoint(args)
    records = load_corpus(args.dataset)
    if spec.baseline:
        transport = None
    elif args.mock:
        transport = FixtureTransport.load(args.mock)
    else:
        transport = HttpTransport()
    opts = EvalOptions(
        spec_name=args.spec, sample=args.sample, seed=args.seed, max_chars=args.max_chars,
        abort_threshold=args.abort_threshold, mode=args.mode,
        tone_sensitive=not args.tone_insensitive, macro=args.macro,
    )
    result = evaluate(records, spec, opts, transport, cfg, lex, _template(args, spec.style), _baselines(args))

    inputs = {args.dataset: file_digest(args.dataset)}
    for extra in (args.mock, args.baseline_run and str(Path(args.baseline_run)), args.template,
                  *(args.lexicon or [])):
        if extra and Path(extra).is_file():
            inputs[extra] = file_digest(extra)
    config = _config_snapshot(args)
    config["analysis_only"] = spec.analysis_only
    manifest = RunManifest(command=["hyposcore", *_command_line(args.argv)], config=config,
                           seed=args.seed, inputs=inputs)
    out = write_run(args.out, result, manifest)
    sys.stdout.write(render_scores(result.report, args.format))
    logger.info("run written to %s", out)
    check_abort(result, args.abort_threshold)
    return 0


def _parse_quota(items: list[str]) -> list[tuple[str, int]]:
    quotas = []
    for item in items:
        corpus, sep, n = item.rpartition("=")
        if not sep or not corpus or not n.isdigit():
            raise UsageError(f"bad --quota {item!r}; expected corpus=N")
        quotas.append((corpus, int(n)))
    return quotas


def cmd_prepare_finetune(args) -> int:
    spec = _spec(args.spec)
    if spec.style != "finetune":
        raise UsageError(f"{args.spec} is not a fine-tuning spec (use Finetune1..Finetune4)")
    lex = _lexicon(args)
    template = _template(args, "finetune")
    records = []
    for path in args.datasets:
        records.extend(load_corpus(path))
    records = filter_by_length(records, args.max_chars)
    records = [r for r in records if len(r.hypotheses) >= spec.min_hypotheses and r.transcription]
    rows = []
    for corpus, n in _parse_quota(args.quota):
        pool = [r for r in records if r.corpus == corpus]
        picked = sample(pool, n, args.seed)
        for h in picked:
            prompt, response = build_finetune_pair(h, spec, lex, **({"template": template} if template else {}))
            rows.append({"prompt": prompt, "response": response})
        logger.info("%s: %d pair(s)", corpus, len(picked))
    lines = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(lines, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(lines)
    return 0


def cmd_stats(args) -> int:
    lex = _lexicon(args)
    rows = stats(load_corpus(args.dataset), lex, mode=args.mode, tone_sensitive=not args.tone_insensitive)
    sys.stdout.write(render(STATS_COLUMNS, stats_rows(rows), args.format))
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p, lexicon=True, fmt=True):
    if lexicon:
        p.add_argument("--lexicon", action="append", metavar="TSV",
                       help="lexicon file (repeatable; replaces the bundled lexicon)")
        p.add_argument("--mode", choices=("contextual", "per_char"), default="contextual",
                       help="heteronym handling for transliteration")
    if fmt:
        p.add_argument("--format", choices=("table", "tsv"), default="table")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyposcore", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", metavar="FILE", help="key = value file mirroring the flags")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("transliterate", help="print tone-numbered Pinyin for Chinese text")
    p.add_argument("text", nargs="?", default="")
    p.add_argument("--file")
    p.add_argument("--strict", action="store_true", help="fail on Han characters missing from the lexicon")
    _add_common(p, fmt=False)
    p.set_defaults(func=cmd_transliterate)

    p = sub.add_parser("score", help="1-best CER / PinyinER per corpus")
    p.add_argument("dataset")
    p.add_argument("--metric", choices=("cer", "pinyin"), default="cer")
    p.add_argument("--tone-insensitive", action="store_true")
    p.add_argument("--per-utt", action="store_true")
    p.add_argument("--macro", action="store_true", help="average per-utterance rates instead of edits")
    p.add_argument("--baseline-run", metavar="PATH")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("oracle", help="n-best and compositional oracle CER per corpus")
    p.add_argument("dataset")
    p.add_argument("--macro", action="store_true")
    _add_common(p, lexicon=False)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("prompt", help="build prompts (Prompt1..9) or fine-tuning pairs (Finetune1..4)")
    p.add_argument("dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--template", metavar="FILE", help="replacement template body")
    _add_common(p, fmt=False)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("evaluate", help="run corrections through an endpoint or mock and score them")
    p.add_argument("dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--mock", metavar="FIXTURES", help="JSONL of prompt_sha256/reply pairs")
    p.add_argument("--base-url", default=EndpointConfig.base_url)
    p.add_argument("--model", default=EndpointConfig.model_name)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=EndpointConfig.timeout)
    p.add_argument("--max-retries", type=int, default=EndpointConfig.max_retries)
    p.add_argument("--backoff", type=float, default=EndpointConfig.backoff_initial)
    p.add_argument("--backoff-multiplier", type=float, default=EndpointConfig.backoff_multiplier)
    p.add_argument("--max-parallel", type=int, default=EndpointConfig.max_parallel)
    p.add_argument("--sample", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-chars", type=int, default=100)
    p.add_argument("--abort-threshold", type=float, default=0.5,
                   help="abort (exit 3) when more than this fraction of requests fail in transport")
    p.add_argument("--baseline-run", metavar="PATH")
    p.add_argument("--tone-insensitive", action="store_true")
    p.add_argument("--macro", action="store_true")
    p.add_argument("--template", metavar="FILE")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("prepare-finetune", help="sample fine-tuning prompt/response pairs per corpus quota")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--quota", action="append", required=True, metavar="CORPUS=N")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-chars", type=int, default=100)
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--template", metavar="FILE")
    _add_common(p, fmt=False)
    p.set_defaults(func=cmd_prepare_finetune)

    p = sub.add_parser("stats", help="pairs, hypotheses per utterance, CER, PinyinER and oracles per corpus")
    p.add_argument("dataset")
    p.add_argument("--tone-insensitive", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_stats)
    return ap


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes around values are dropped."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key.strip().replace("-", "_")] = value
    return values


def _apply_config(ap: argparse.ArgumentParser, values: dict[str, str]) -> None:
    subparsers = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    for p in subparsers.choices.values():
        defaults = {}
        for action in p._actions:
            if action.dest not in values or not action.option_strings:
                continue
            raw = values[action.dest]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(action, argparse._AppendAction):
                defaults[action.dest] = [v.strip() for v in raw.split(",") if v.strip()]
            else:
                defaults[action.dest] = raw  # argparse applies ``type`` to string defaults
        p.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            _apply_config(ap, read_config(known.config))
    except (OSError, UsageError) as exc:
        print(f"hyposcore: error: {exc}", file=sys.stderr)
        return 2
    args = ap.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except EvaluationAborted as exc:
        print(f"hyposcore: aborted: {exc}", file=sys.stderr)
        return 3
    except (UsageError, DatasetError, PinyinError, PromptError, LLMError, OSError, ValueError) as exc:
        print(f"hyposcore: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
