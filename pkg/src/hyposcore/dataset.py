"""Hypotheses-transcription corpora: JSONL I/O, dedup, sampling, filtering, statistics."""

from __future__ import annotations

import json
import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .pinyin import Mode, PinyinLexicon, default_lexicon
from .scoring import EmptyReference, cer, oracles, pinyin_er
from .text import DEFAULT_POLICY, NormalizationPolicy, normalize

logger = logging.getLogger(__name__)

FIELDS = ("id", "corpus", "hyps", "ref")


class DatasetError(ValueError):
    pass


class SchemaError(DatasetError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class DuplicateId(DatasetError):
    pass


class SampleTooLarge(DatasetError):
    pass


@dataclass(frozen=True)
class HypothesisSet:
    """One utterance: its N-best list (best first) and the reference transcription."""

    id: str
    corpus: str
    hypotheses: tuple[str, ...]
    transcription: str

    def to_json(self) -> str:
        obj = {"id": self.id, "corpus": self.corpus, "hyps": list(self.hypotheses), "ref": self.transcription}
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))

    @property
    def one_best(self) -> str:
        return self.hypotheses[0]


def dedup(hyps: Iterable[str]) -> list[str]:
    """Drop repeated hypotheses, keeping the first occurrence of each."""
    return list(dict.fromkeys(hyps))


def _record(obj, path, lineno: int) -> HypothesisSet:
    if not isinstance(obj, dict):
        raise SchemaError(path, lineno, "expected a JSON object")
    for name in FIELDS:
        if name not in obj:
            raise SchemaError(path, lineno, f"missing field {name!r}")
    for name in ("id", "corpus", "ref"):
        if not isinstance(obj[name], str):
            raise SchemaError(path, lineno, f"field {name!r} must be a string")
    hyps = obj["hyps"]
    if not isinstance(hyps, list) or not all(isinstance(h, str) for h in hyps):
        raise SchemaError(path, lineno, "field 'hyps' must be a list of strings")
    if not hyps:
        raise SchemaError(path, lineno, "field 'hyps' must not be empty")
    if len(set(hyps)) != len(hyps):
        raise SchemaError(path, lineno, "field 'hyps' contains duplicates")
    if not obj["id"]:
        raise SchemaError(path, lineno, "field 'id' must not be empty")
    return HypothesisSet(obj["id"], obj["corpus"], tuple(hyps), obj["ref"])


def iter_corpus(path: str | Path) -> Iterator[HypothesisSet]:
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, lineno, f"invalid JSON: {exc.msg}") from exc
            rec = _record(obj, path, lineno)
            if rec.id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            yield rec


def load_corpus(path: str | Path) -> list[HypothesisSet]:
    """Read and validate a JSONL corpus (``{"id","corpus","hyps","ref"}`` per line)."""
    return list(iter_corpus(path))


def write_corpus(records: Iterable[HypothesisSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def sample_corpus_path() -> Path:
    return Path(str(resources.files("hyposcore") / "data" / "sample.jsonl"))


def prepare(
    h: HypothesisSet,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    table: dict[str, str] | None = None,
) -> HypothesisSet:
    """Normalize reference and hypotheses, then de-duplicate the hypotheses."""
    hyps = dedup(normalize(x, policy, table) for x in h.hypotheses)
    return HypothesisSet(h.id, h.corpus, tuple(hyps), normalize(h.transcription, policy, table))


def sample(corpus: Sequence[HypothesisSet], n: int, seed: int) -> list[HypothesisSet]:
    """Uniform sample without replacement, returned sorted by id."""
    if n < 0 or n > len(corpus):
        raise SampleTooLarge(f"cannot sample {n} records from {len(corpus)}")
    picked = random.Random(seed).sample(list(corpus), n)
    return sorted(picked, key=lambda h: h.id)


def filter_by_length(records: Sequence[HypothesisSet], max_chars: int) -> list[HypothesisSet]:
    """Keep records whose reference and every hypothesis are shorter than ``max_chars``."""
    if max_chars < 1:
        raise ValueError("max_chars must be >= 1")
    kept = [
        r for r in records
        if len(r.transcription) < max_chars and all(len(h) < max_chars for h in r.hypotheses)
    ]
    if len(kept) != len(records):
        logger.info("length filter (< %d chars): kept %d, dropped %d",
                    max_chars, len(kept), len(records) - len(kept))
    return kept


@dataclass(frozen=True)
class StatsRow:
    corpus: str
    pairs: int
    mean_hyps: float
    cer: float | None
    pinyin_er: float | None
    o_nb: float | None
    o_cp: float | None


def stats(
    corpus: Sequence[HypothesisSet],
    lex: PinyinLexicon | None = None,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    mode: Mode = "contextual",
    tone_sensitive: bool = True,
) -> list[StatsRow]:
    """Per-corpus counts plus 1-best CER / PinyinER and both oracles (micro-averaged).

    Records with an empty reference are counted as pairs but excluded from rates.
    An ``ALL`` row follows when more than one corpus is present.
    """
    lex = lex or default_lexicon()
    # per record: (cer errors, chars, pinyin errors, syllables, o_nb errors, o_cp errors)
    scored: dict[str, tuple[int, ...] | None] = {}
    for h in corpus:
        try:
            c = cer(h.one_best, h.transcription, policy)
        except EmptyReference:
            logger.warning("skipping %s: empty reference", h.id)
            scored[h.id] = None
            continue
        p = pinyin_er(h.one_best, h.transcription, lex, mode, tone_sensitive, policy)
        o = oracles(h, policy)
        scored[h.id] = (c.distance, c.ref_len, p.distance, p.ref_len, o.nbest_errors, o.compositional_errors)

    def row(tag: str, recs: list[HypothesisSet]) -> StatsRow:
        vals = [scored[h.id] for h in recs if scored[h.id] is not None]
        err, chars, pin, syl, nb, cp = (sum(col) for col in zip(*vals)) if vals else (0,) * 6
        return StatsRow(
            corpus=tag,
            pairs=len(recs),
            mean_hyps=sum(len(h.hypotheses) for h in recs) / len(recs),
            cer=err / chars if chars else None,
            pinyin_er=pin / syl if syl else None,
            o_nb=nb / chars if chars else None,
            o_cp=cp / chars if chars else None,
        )

    groups: dict[str, list[HypothesisSet]] = defaultdict(list)
    for h in corpus:
        groups[h.corpus].append(h)
    rows = [row(tag, groups[tag]) for tag in sorted(groups)]
    if len(groups) > 1:
        rows.append(row("ALL", list(corpus)))
    return rows
