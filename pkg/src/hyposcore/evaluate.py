"""End-to-end correction runs: prompt, complete, parse with fallback, score, write a run directory."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .dataset import HypothesisSet, filter_by_length, sample
from .llm import BatchResult, EndpointConfig, Transport, complete_batch
from .pinyin import Mode, PinyinLexicon, default_lexicon
from .prompts import (
    CorrectionRecord,
    PromptSpec,
    PromptTemplate,
    build_prompt,
    fallback,
    parse_response,
)
from .report import render_scores
from .scoring import ScoreReport, UtteranceScore, cer, corpus_aggregate, oracles, pinyin_er
from .text import normalize

logger = logging.getLogger(__name__)


class EvaluationAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalOptions:
    spec_name: str
    sample: int | None = None
    seed: int = 0
    max_chars: int = 100
    abort_threshold: float = 0.5
    mode: Mode = "contextual"
    tone_sensitive: bool = True
    macro: bool = False


@dataclass
class EvalItem:
    record: HypothesisSet
    prompt: str
    correction: CorrectionRecord
    score: UtteranceScore | None = None


@dataclass
class EvalResult:
    items: list[EvalItem]
    report: ScoreReport
    counts: dict = field(default_factory=dict)

    @property
    def transport_failure_rate(self) -> float:
        if not self.items:
            return 0.0
        return sum(i.correction.failure_reason == "transport" for i in self.items) / len(self.items)


def select_records(records: Sequence[HypothesisSet], opts: EvalOptions, spec: PromptSpec):
    counts = {"loaded": len(records)}
    if opts.sample is not None:
        records = sample(records, opts.sample, opts.seed)
    counts["sampled"] = len(records)
    records = filter_by_length(records, opts.max_chars)
    counts["after_length_filter"] = len(records)
    empty = [r for r in records if not normalize(r.transcription)]
    for r in empty:
        logger.warning("skipping %s: empty reference", r.id)
    records = [r for r in records if normalize(r.transcription)]
    counts["empty_reference"] = len(empty)
    if not spec.baseline:
        short = [r for r in records if len(r.hypotheses) < spec.min_hypotheses]
        if short:
            logger.warning("skipping %d record(s) with fewer than %d hypotheses",
                           len(short), spec.min_hypotheses)
        records = [r for r in records if len(r.hypotheses) >= spec.min_hypotheses]
    counts["evaluated"] = len(records)
    return list(records), counts


def evaluate(
    records: Sequence[HypothesisSet],
    spec: PromptSpec,
    opts: EvalOptions,
    transport: Transport | None,
    cfg: EndpointConfig,
    lex: PinyinLexicon | None = None,
    template: PromptTemplate | None = None,
    baselines: dict[str, float] | None = None,
) -> EvalResult:
    """Correct every selected record and score the corrections against the references.

    The baseline CER for CERR is each corpus's 1-best CER on the same records
    unless ``baselines`` (corpus -> CER fraction) is given.
    """
    lex = lex or default_lexicon()
    records, counts = select_records(records, opts, spec)

    if spec.baseline:
        prompts = [""] * len(records)
        replies = [BatchResult(reply="") for _ in records]
    else:
        prompts = [build_prompt(r, spec, lex, template, opts.mode) for r in records]
        replies = complete_batch(prompts, cfg, transport)

    items = []
    for rec, prompt, res in zip(records, prompts, replies):
        if spec.baseline:
            corr = CorrectionRecord(rec.id, "", rec.one_best)
        elif not res.ok:
            corr = fallback(rec, "", "transport")
        else:
            corr = parse_response(res.reply, rec, opts.max_chars, expect_json=spec.style == "direct")
        items.append(EvalItem(rec, prompt, corr))

    scores = []
    for item in items:
        rec = item.record
        item.score = UtteranceScore(
            rec.id, rec.corpus, cer(item.correction.correction, rec.transcription),
            pinyin=pinyin_er(item.correction.correction, rec.transcription, lex, opts.mode, opts.tone_sensitive),
            oracle=oracles(rec),
            baseline=cer(rec.one_best, rec.transcription),
        )
        scores.append(item.score)

    reasons = {}
    for item in items:
        reasons[item.correction.failure_reason] = reasons.get(item.correction.failure_reason, 0) + 1
    counts["failure_reasons"] = dict(sorted(reasons.items()))
    report = corpus_aggregate(scores, opts.macro, counts["empty_reference"], baselines)
    return EvalResult(items, report, counts)


def check_abort(result: EvalResult, threshold: float) -> None:
    rate = result.transport_failure_rate
    if rate > threshold:
        raise EvaluationAborted(
            f"{rate:.0%} of requests hit transport failures (threshold {threshold:.0%})"
        )


# ---------------------------------------------------------------------------
# run directory


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def run_timestamp() -> str:
    """UTC time of the run; ``SOURCE_DATE_EPOCH`` pins it for reproducible replays."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return now.replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class RunManifest:
    command: list[str]
    config: dict
    seed: int
    inputs: dict[str, str]
    tool_version: str = __version__
    timestamp: str = field(default_factory=run_timestamp)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def utterance_rows(result: EvalResult) -> list[dict]:
    rows = []
    for item in result.items:
        s = item.score
        rows.append({
            "id": item.record.id,
            "corpus": item.record.corpus,
            "prompt": item.prompt,
            "raw_reply": item.correction.raw_response,
            "correction": item.correction.correction,
            "fallback_used": item.correction.fallback_used,
            "failure_reason": item.correction.failure_reason,
            "errors": s.cer.distance if s else None,
            "ref_len": s.cer.ref_len if s else None,
            "cer": round(100 * s.cer.rate, 2) if s else None,
            "baseline_cer": round(100 * s.baseline.rate, 2) if s else None,
        })
    return rows


def write_run(out_dir: str | Path, result: EvalResult, manifest: RunManifest) -> Path:
    """Write ``manifest.json``, ``scores.tsv`` and ``utterances.jsonl`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8", newline="\n")
    counts = result.counts
    footer = [
        f"# evaluated {counts.get('evaluated', len(result.items))} of {counts.get('loaded', '?')} loaded records",
        "# failure reasons: " + ", ".join(f"{k}={v}" for k, v in counts.get("failure_reasons", {}).items()),
    ]
    if manifest.config.get("analysis_only"):
        footer.append("# analysis-only: prompts include ground-truth Pinyin derived from the reference")
    (out / "scores.tsv").write_text(render_scores(result.report, "tsv", footer), encoding="utf-8", newline="\n")
    with open(out / "utterances.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for row in utterance_rows(result):
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    return out

