"""Pinyin-regularized prompts for direct prompting and fine-tuning, and reply parsing.

Prompt bodies live in ``templates/`` as versioned text with three slots,
``{HYPS}``, ``{PINYIN}`` and ``{GT_PINYIN}``. A slot that renders empty
removes its whole line. Every rendered line starts with a fixed marker
(``Hypothesis 1: ``, ``拼音2：`` ...) so line counts can be checked
mechanically with :func:`count_lines`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal as TypingLiteral

from .dataset import HypothesisSet
from .pinyin import Mode, PinyinLexicon, default_lexicon, pinyin_line
from .text import DEFAULT_POLICY, NormalizationPolicy, normalize

Style = TypingLiteral["direct", "finetune"]
FailureReason = TypingLiteral["none", "parse", "overlength", "transport"]


class PromptError(ValueError):
    pass


class NotEnoughHypotheses(PromptError):
    pass


class MissingReference(PromptError):
    pass


@dataclass(frozen=True)
class LineCount:
    count: int = 0
    repeat_first: bool = False

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if self.repeat_first and self.count < 2:
            raise ValueError("repeat_first needs count >= 2")

    @property
    def needed(self) -> int:
        """How many distinct hypotheses the lines draw from."""
        return min(self.count, 1) if self.repeat_first else self.count

    def __str__(self) -> str:
        if not self.count:
            return "-"
        return f"{self.count}*" if self.repeat_first else str(self.count)


@dataclass(frozen=True)
class PromptSpec:
    n_text: LineCount = LineCount(1)
    n_pinyin_transcribed: LineCount = LineCount()
    n_pinyin_ground_truth: LineCount = LineCount()
    style: Style = "direct"
    baseline: bool = False

    def __post_init__(self):
        if self.baseline:
            return
        if self.n_text.count < 1:
            raise ValueError("a prompt needs at least one hypothesis line")
        gt = self.n_pinyin_ground_truth
        if gt.count > 1 and not gt.repeat_first:
            raise ValueError("only one ground-truth Pinyin line exists; use repeat_first to repeat it")
        if self.style == "finetune" and gt.count:
            raise ValueError("fine-tuning prompts never carry ground-truth Pinyin")

    @property
    def analysis_only(self) -> bool:
        """True when the prompt leaks the reference through ground-truth Pinyin."""
        return self.n_pinyin_ground_truth.count > 0

    @property
    def min_hypotheses(self) -> int:
        return max(self.n_text.needed, self.n_pinyin_transcribed.needed)


def _lc(spec: str) -> LineCount:
    if spec == "-":
        return LineCount()
    if spec.endswith("*"):
        return LineCount(int(spec[:-1]), True)
    return LineCount(int(spec))


_DIRECT_SPECS = {
    "Prompt1": ("5", "-", "-"),
    "Prompt2": ("5", "5", "-"),
    "Prompt3": ("5", "-", "1"),
    "Prompt4": ("5", "-", "5*"),
    "Prompt5": ("1", "-", "-"),
    "Prompt6": ("1", "1", "-"),
    "Prompt7": ("1", "-", "1"),
    "Prompt8": ("2*", "-", "-"),
    "Prompt9": ("1", "2*", "-"),
}
_FINETUNE_SPECS = {
    "Finetune1": ("5", "-"),
    "Finetune2": ("5", "5"),
    "Finetune3": ("1", "-"),
    "Finetune4": ("1", "1"),
}

BASELINE = PromptSpec(LineCount(), baseline=True)


def table3_specs() -> dict[str, PromptSpec]:
    """The direct-prompting configurations, plus ``Baseline`` (1-best pass-through)."""
    specs = {"Baseline": BASELINE}
    for name, (text, tr, gt) in _DIRECT_SPECS.items():
        specs[name] = PromptSpec(_lc(text), _lc(tr), _lc(gt), "direct")
    return specs


def table4_specs() -> dict[str, PromptSpec]:
    return {
        name: PromptSpec(_lc(text), _lc(tr), style="finetune")
        for name, (text, tr) in _FINETUNE_SPECS.items()
    }


def all_specs() -> dict[str, PromptSpec]:
    return {**table3_specs(), **table4_specs()}


# ---------------------------------------------------------------------------
# templates


@dataclass(frozen=True)
class PromptTemplate:
    body: str
    hyp_prefix: str
    pinyin_prefix: str
    gt_prefix: str = ""
    pinyin_header: str = ""
    gt_header: str = ""
    name: str = ""


def _asset(name: str) -> str:
    return (resources.files("hyposcore") / "templates" / name).read_text(encoding="utf-8")


DIRECT_TEMPLATE = PromptTemplate(
    body=_asset("direct_en_v1.txt"),
    hyp_prefix="Hypothesis {i}: ",
    pinyin_prefix="Pinyin {i}: ",
    gt_prefix="Ground-truth Pinyin {i}: ",
    pinyin_header="Pinyin transcribed from the hypotheses (tone numbers 1-5, 5 is the neutral tone); "
                  "use it to spot characters that sound alike:",
    gt_header="Pinyin of the spoken utterance (tone numbers 1-5, 5 is the neutral tone):",
    name="direct_en_v1",
)
FINETUNE_TEMPLATE = PromptTemplate(
    body=_asset("finetune_zh_v1.txt"),
    hyp_prefix="候选{i}：",
    pinyin_prefix="拼音{i}：",
    pinyin_header="候选结果对应的拼音（数字表示声调，5为轻声）：",
    name="finetune_zh_v1",
)


def load_template(path: str | Path, style: Style) -> PromptTemplate:
    """Replace the body of the stock template for ``style`` with a file's contents."""
    base = DIRECT_TEMPLATE if style == "direct" else FINETUNE_TEMPLATE
    body = Path(path).read_text(encoding="utf-8")
    return PromptTemplate(body, base.hyp_prefix, base.pinyin_prefix, base.gt_prefix,
                          base.pinyin_header, base.gt_header, name=Path(path).stem)


def _lines(items: list[str], lc: LineCount, prefix: str) -> list[str]:
    if lc.repeat_first:
        first = prefix.format(i=1) + items[0]
        return [first] * lc.count
    return [prefix.format(i=i) + s for i, s in enumerate(items[:lc.count], 1)]


def _render(template: PromptTemplate, hyps: list[str], pinyin: list[str], gt: list[str]) -> str:
    slots = {"{HYPS}": hyps, "{PINYIN}": pinyin, "{GT_PINYIN}": gt}
    out = []
    for line in template.body.splitlines():
        stripped = line.strip()
        if stripped in slots:
            out.extend(slots[stripped])
        else:
            for slot, lines in slots.items():
                line = line.replace(slot, "\n".join(lines))
            out.append(line)
    return "\n".join(out) + "\n"


def _check(h: HypothesisSet, spec: PromptSpec) -> None:
    if spec.baseline:
        raise PromptError("the baseline makes no model call and has no prompt")
    if len(h.hypotheses) < spec.min_hypotheses:
        raise NotEnoughHypotheses(
            f"{h.id}: spec needs {spec.min_hypotheses} hypotheses, record has {len(h.hypotheses)}"
        )


def build_direct_prompt(
    h: HypothesisSet,
    spec: PromptSpec,
    lex: PinyinLexicon | None = None,
    template: PromptTemplate = DIRECT_TEMPLATE,
    mode: Mode = "contextual",
) -> str:
    if spec.style != "direct":
        raise PromptError("build_direct_prompt needs a direct-style spec")
    _check(h, spec)
    lex = lex or default_lexicon()
    hyps = _lines(list(h.hypotheses), spec.n_text, template.hyp_prefix)
    pinyin = []
    if spec.n_pinyin_transcribed.count:
        src = [pinyin_line(x, lex, mode) for x in h.hypotheses[:spec.n_pinyin_transcribed.needed]]
        pinyin = [template.pinyin_header] + _lines(src, spec.n_pinyin_transcribed, template.pinyin_prefix)
    gt = []
    if spec.n_pinyin_ground_truth.count:
        if not h.transcription:
            raise MissingReference(f"{h.id}: ground-truth Pinyin needs a transcription")
        src = [pinyin_line(h.transcription, lex, mode)]
        gt = [template.gt_header] + _lines(src, spec.n_pinyin_ground_truth, template.gt_prefix)
    return _render(template, hyps, pinyin, gt)


def build_finetune_pair(
    h: HypothesisSet,
    spec: PromptSpec,
    lex: PinyinLexicon | None = None,
    template: PromptTemplate = FINETUNE_TEMPLATE,
    mode: Mode = "contextual",
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> tuple[str, str]:
    """Build a (prompt, response) training pair; the response is the normalized reference."""
    if spec.style != "finetune":
        raise PromptError("build_finetune_pair needs a finetune-style spec")
    _check(h, spec)
    if not h.transcription:
        raise MissingReference(f"{h.id}: fine-tuning pairs need a transcription")
    lex = lex or default_lexicon()
    hyps = _lines(list(h.hypotheses), spec.n_text, template.hyp_prefix)
    pinyin = []
    if spec.n_pinyin_transcribed.count:
        src = [pinyin_line(x, lex, mode) for x in h.hypotheses[:spec.n_pinyin_transcribed.needed]]
        pinyin = [template.pinyin_header] + _lines(src, spec.n_pinyin_transcribed, template.pinyin_prefix)
    return _render(template, hyps, pinyin, []), normalize(h.transcription, policy)


def build_prompt(h: HypothesisSet, spec: PromptSpec, lex: PinyinLexicon | None = None,
                 template: PromptTemplate | None = None, mode: Mode = "contextual") -> str:
    if spec.style == "direct":
        return build_direct_prompt(h, spec, lex, template or DIRECT_TEMPLATE, mode)
    return build_finetune_pair(h, spec, lex, template or FINETUNE_TEMPLATE, mode)[0]


def count_lines(prompt: str, template: PromptTemplate) -> dict[str, int]:
    """Count hypothesis, transcribed-Pinyin and ground-truth-Pinyin lines by marker."""
    counts = {}
    for key, prefix in (("text", template.hyp_prefix), ("pinyin", template.pinyin_prefix),
                        ("ground_truth", template.gt_prefix)):
        if not prefix:
            counts[key] = 0
            continue
        pat = re.compile("^" + re.escape(prefix).replace(re.escape("{i}"), r"\d+"), re.M)
        counts[key] = len(pat.findall(prompt))
    return counts


# ---------------------------------------------------------------------------
# replies


@dataclass(frozen=True)
class CorrectionRecord:
    id: str
    raw_response: str
    correction: str
    fallback_used: bool = False
    failure_reason: FailureReason = "none"

    def __post_init__(self):
        if self.fallback_used != (self.failure_reason != "none"):
            raise ValueError("fallback_used must be set exactly when there is a failure reason")


_FENCE = re.compile(r"^```[\w-]*\s*$", re.M)


def extract_correction(raw: str) -> str | None:
    """Return the ``correction`` field of the first JSON object in ``raw`` that has one."""
    decoder = json.JSONDecoder()
    text = _FENCE.sub("", raw)
    idx = text.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(text, idx)
        except (json.JSONDecodeError, RecursionError):
            obj = None
        if isinstance(obj, dict) and isinstance(obj.get("correction"), str):
            return obj["correction"]
        idx = text.find("{", idx + 1)
    return None


def _plain_text(raw: str) -> str | None:
    for line in _FENCE.sub("", raw).splitlines():
        if line.strip():
            return line.strip()
    return None


def parse_response(
    raw: str,
    h: HypothesisSet,
    max_chars: int = 100,
    expect_json: bool = True,
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> CorrectionRecord:
    """Turn a model reply into a correction, falling back to the 1-best on failure.

    Direct prompts ask for ``{"correction": ...}``; with ``expect_json=False``
    (fine-tuned models answer in plain text) the first non-empty line is used
    when no such object is present. Corrections of ``max_chars`` characters or
    more are rejected as hallucinations. Never raises.
    """
    try:
        if not isinstance(raw, str):
            raw = raw.decode("utf-8", "replace") if isinstance(raw, (bytes, bytearray)) else str(raw)
        found = extract_correction(raw)
        if found is None and not expect_json:
            found = _plain_text(raw)
        if found is not None:
            found = normalize(found, policy)
    except Exception:  # the evaluation must never abort on a bad reply
        found = None
    if not found:
        return fallback(h, raw if isinstance(raw, str) else "", "parse")
    if len(found) >= max_chars:
        return fallback(h, raw, "overlength")
    return CorrectionRecord(h.id, raw, found)


def fallback(h: HypothesisSet, raw: str, reason: FailureReason) -> CorrectionRecord:
    return CorrectionRecord(h.id, raw, h.one_best, True, reason)
