"""Edit-distance metrics (CER, PinyinER, CERR) and n-best / compositional oracles.

Rates are kept as exact ``(errors, ref_len)`` integer pairs until reporting.
Alignment follows ASR conventions: ``hyp`` is aligned against ``ref``, a
reference token missing from the hypothesis is a deletion and an extra
hypothesis token is an insertion.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Hashable, Iterable, Sequence

from .pinyin import Mode, PinyinLexicon, Syllable, default_lexicon, transliterate
from .text import DEFAULT_POLICY, NormalizationPolicy, normalize

if TYPE_CHECKING:
    from .dataset import HypothesisSet

logger = logging.getLogger(__name__)


class ScoringError(ValueError):
    pass


class EmptyReference(ScoringError):
    pass


class EmptyHypothesisList(ScoringError):
    pass


class ZeroBaseline(ScoringError):
    pass


@dataclass(frozen=True)
class EditStats:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_len: int = 0

    @property
    def distance(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        if self.ref_len == 0:
            raise EmptyReference("rate undefined for an empty reference")
        return self.distance / self.ref_len

    def __add__(self, other: EditStats) -> EditStats:
        return EditStats(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.ref_len + other.ref_len,
        )


def edit_distance(hyp: Sequence[Hashable], ref: Sequence[Hashable]) -> EditStats:
    """Unit-cost Levenshtein alignment of ``hyp`` against ``ref``.

    The backtrace prefers the diagonal (match or substitution), then
    deletion, then insertion, so the operation counts are reproducible.
    """
    n, m = len(hyp), len(ref)
    # dp[i][j]: distance between hyp[:i] and ref[:j]
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        row, prev = dp[i], dp[i - 1]
        row[0] = i
        h = hyp[i - 1]
        for j in range(1, m + 1):
            row[j] = min(
                prev[j - 1] + (h != ref[j - 1]),
                row[j - 1] + 1,
                prev[j] + 1,
            )

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            subs += hyp[i - 1] != ref[j - 1]
            i, j = i - 1, j - 1
        elif j > 0 and dp[i][j] == dp[i][j - 1] + 1:
            dels += 1
            j -= 1
        else:
            ins += 1
            i -= 1
    return EditStats(subs, ins, dels, m)


def cer(
    hyp: str,
    ref: str,
    norm: NormalizationPolicy = DEFAULT_POLICY,
    table: dict[str, str] | None = None,
) -> EditStats:
    """Character-level edit statistics after normalizing both sides.

    Raises :class:`EmptyReference` when nothing is left of ``ref``.
    """
    ref_n = normalize(ref, norm, table)
    if not ref_n:
        raise EmptyReference(f"empty reference after normalization: {ref!r}")
    return edit_distance(normalize(hyp, norm, table), ref_n)


def _pinyin_keys(tokens, tone_sensitive: bool) -> list:
    keys = []
    for tok in tokens:
        if isinstance(tok, Syllable):
            keys.append(tok.key(tone_sensitive))
        else:
            keys.append(tok)
    return keys


def pinyin_er(
    hyp: str,
    ref: str,
    lex: PinyinLexicon | None = None,
    mode: Mode = "contextual",
    tone_sensitive: bool = True,
    norm: NormalizationPolicy = DEFAULT_POLICY,
    table: dict[str, str] | None = None,
) -> EditStats:
    """Edit statistics over Pinyin token sequences of ``hyp`` and ``ref``.

    Syllables compare by (initial, final, tone), or (initial, final) when
    ``tone_sensitive`` is off; literals compare by their text.
    """
    lex = lex or default_lexicon()
    ref_n = normalize(ref, norm, table)
    if not ref_n:
        raise EmptyReference(f"empty reference after normalization: {ref!r}")
    hyp_tok = transliterate(normalize(hyp, norm, table), lex, mode)
    ref_tok = transliterate(ref_n, lex, mode)
    return edit_distance(_pinyin_keys(hyp_tok, tone_sensitive), _pinyin_keys(ref_tok, tone_sensitive))


def cerr(baseline_cer: float, method_cer: float) -> float:
    """Relative CER reduction in percent; positive means the method improved."""
    if baseline_cer <= 0:
        raise ZeroBaseline("CERR needs a positive baseline CER")
    return 100.0 * (baseline_cer - method_cer) / baseline_cer


@dataclass(frozen=True)
class OracleResult:
    nbest_index: int
    nbest_errors: int
    compositional_errors: int
    ref_len: int

    @property
    def nbest_cer(self) -> float:
        return self.nbest_errors / self.ref_len

    @property
    def compositional_cer(self) -> float:
        return self.compositional_errors / self.ref_len


def _checked(h: HypothesisSet, norm, table) -> tuple[list[str], str]:
    if not h.hypotheses:
        raise EmptyHypothesisList(f"utterance {h.id!r} has no hypotheses")
    ref = normalize(h.transcription, norm, table)
    if not ref:
        raise EmptyReference(f"utterance {h.id!r} has an empty reference")
    return [normalize(x, norm, table) for x in h.hypotheses], ref


def oracle_nbest(
    h: HypothesisSet, norm: NormalizationPolicy = DEFAULT_POLICY, table=None
) -> tuple[int, EditStats]:
    """Best single candidate; ties go to the earliest (highest ranked) one."""
    hyps, ref = _checked(h, norm, table)
    best_i, best = 0, None
    for i, hyp in enumerate(hyps):
        stats = edit_distance(hyp, ref)
        if best is None or stats.distance < best.distance:
            best_i, best = i, stats
    return best_i, best


def compositional_errors(hyps: Iterable[str], ref: str) -> int:
    """Minimum edit distance from ``ref`` to any string built from the hypotheses' characters.

    Reference characters found somewhere in the pool can be kept; every other
    one costs exactly one edit, and deleting it achieves that bound.
    """
    pool = set().union(*map(set, hyps))
    return sum(ch not in pool for ch in ref)


def oracle_compositional(
    h: HypothesisSet, norm: NormalizationPolicy = DEFAULT_POLICY, table=None
) -> float:
    hyps, ref = _checked(h, norm, table)
    return compositional_errors(hyps, ref) / len(ref)


def oracles(h: HypothesisSet, norm: NormalizationPolicy = DEFAULT_POLICY, table=None) -> OracleResult:
    hyps, ref = _checked(h, norm, table)
    idx, stats = oracle_nbest(h, norm, table)
    return OracleResult(idx, stats.distance, compositional_errors(hyps, ref), len(ref))


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class UtteranceScore:
    id: str
    corpus: str
    cer: EditStats
    pinyin: EditStats | None = None
    oracle: OracleResult | None = None
    baseline: EditStats | None = None


@dataclass(frozen=True)
class CorpusRow:
    corpus: str
    n: int
    cer: float | None
    pinyin_er: float | None = None
    o_nb: float | None = None
    o_cp: float | None = None
    baseline_cer: float | None = None

    @property
    def cerr(self) -> float | None:
        if self.cer is None or not self.baseline_cer:
            return None
        return cerr(self.baseline_cer, self.cer)


@dataclass(frozen=True)
class ScoreReport:
    rows: tuple[CorpusRow, ...]
    skipped: int = 0
    macro: bool = False

    def row(self, corpus: str) -> CorpusRow:
        for r in self.rows:
            if r.corpus == corpus:
                return r
        raise KeyError(corpus)


ALL = "ALL"


def _micro(stats: list[tuple[int, int]]) -> float | None:
    total = sum(r for _, r in stats)
    return sum(e for e, _ in stats) / total if total else None


def _macro(stats: list[tuple[int, int]]) -> float | None:
    rates = [e / r for e, r in stats if r]
    return sum(rates) / len(rates) if rates else None


def _row(corpus: str, utts: list[UtteranceScore], macro: bool, baseline: float | None) -> CorpusRow:
    avg = _macro if macro else _micro

    def pick(fn):
        vals = [fn(u) for u in utts]
        return None if any(v is None for v in vals) else avg(vals)

    base = pick(lambda u: u.baseline and (u.baseline.distance, u.baseline.ref_len))
    return CorpusRow(
        corpus=corpus,
        n=len(utts),
        cer=avg([(u.cer.distance, u.cer.ref_len) for u in utts]),
        pinyin_er=pick(lambda u: u.pinyin and (u.pinyin.distance, u.pinyin.ref_len)),
        o_nb=pick(lambda u: u.oracle and (u.oracle.nbest_errors, u.oracle.ref_len)),
        o_cp=pick(lambda u: u.oracle and (u.oracle.compositional_errors, u.oracle.ref_len)),
        baseline_cer=baseline if baseline is not None else base,
    )


def corpus_aggregate(
    per_utt: Sequence[UtteranceScore],
    macro: bool = False,
    skipped: int = 0,
    baselines: dict[str, float] | None = None,
) -> ScoreReport:
    """Group utterances by corpus tag and average their rates.

    Micro-averaging (total edits over total reference characters) is the
    default. ``baselines`` maps corpus tag to a baseline CER fraction used
    for CERR; without it, each utterance's own ``baseline`` stats are used.
    An ``ALL`` row is appended when more than one corpus is present.
    """
    if not per_utt:
        logger.warning("no utterances to aggregate")
        return ScoreReport((), skipped, macro)
    groups: dict[str, list[UtteranceScore]] = defaultdict(list)
    for u in per_utt:
        groups[u.corpus].append(u)
    baselines = baselines or {}
    rows = [_row(c, groups[c], macro, baselines.get(c)) for c in sorted(groups)]
    if len(groups) > 1:
        rows.append(_row(ALL, list(per_utt), macro, baselines.get(ALL)))
    return ScoreReport(tuple(rows), skipped, macro)
