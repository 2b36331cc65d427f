"""Acceptance criteria for the toolkit, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible even without
``-s``) before asserting. Run just this module with::

    python3 -m pytest tests/test_acceptance.py -v
"""

import json
import random
from collections import defaultdict

import pytest

from conftest import CASE1_FINETUNE, CASE1_NBEST, CASE1_REF, CASE2_FINETUNE, CASE2_NBEST, CASE2_REF
from oracles import brute_compositional, brute_distance

from hyposcore.cli import main
from hyposcore.dataset import HypothesisSet, sample_corpus_path
from hyposcore.llm import write_fixtures
from hyposcore.pinyin import all_syllables, format_syllable, parse_syllable, pinyin_line
from hyposcore.prompts import (
    DIRECT_TEMPLATE,
    FINETUNE_TEMPLATE,
    build_prompt,
    count_lines,
    table3_specs,
    table4_specs,
)
from hyposcore.scoring import cer, cerr, compositional_errors, edit_distance, oracles, pinyin_er

SAMPLE = str(sample_corpus_path())


@pytest.fixture
def verdict(capsys):
    def report(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
        assert ok, detail
    return report


def pct(stats) -> float:
    return round(100 * stats.rate, 2)


# 1 -------------------------------------------------------------------------

def test_golden_case_cers(verdict, case1, case2):
    bad = []
    for rec, ref, nbest, finetune in ((case1, CASE1_REF, CASE1_NBEST, CASE1_FINETUNE),
                                      (case2, CASE2_REF, CASE2_NBEST, CASE2_FINETUNE)):
        if rec.transcription != ref or list(rec.hypotheses) != [t for t, _ in nbest]:
            bad.append(f"{rec.id}: bundled record differs from the case text")
        for text, printed in [*nbest, *finetune]:
            got = pct(cer(text, ref))
            if got != printed:
                bad.append(f"{text}: {got:.2f} != {printed:.2f}")
    verdict(1, not bad, "18 case-level CERs exact at two decimals" if not bad else "; ".join(bad))


# 2 -------------------------------------------------------------------------

BASELINE_ROW = (5.84, 11.62, 16.03, 25.19, 29.81)
# method: ((CER, printed -CERR) per corpus, same column order as the baseline row)
METHOD_ROWS = {
    "o_cp": ((2.93, -49.83), (6.89, -40.71), (8.67, -45.91), (13.34, -47.04), (22.9, -23.18)),
    "o_nb": ((3.49, -40.24), (8.48, -27.02), (12.76, -20.40), (20.06, -20.37), (25.49, -14.49)),
    "Finetune1": ((5.14, -11.99), (13.27, 14.20), (17.3, 7.92), (27.4, 8.77), (31.12, 4.39)),
    "Finetune2": ((4.74, -18.84), (12.28, 5.68), (16.33, 1.87), (25.61, 1.67), (28.73, -3.62)),
    "Finetune3": ((6.88, 17.81), (14.36, 23.58), (18.25, 13.85), (28.09, 11.51), (33.25, 11.54)),
    "Finetune4": ((6.26, 7.19), (14.06, 21.00), (17.94, 11.92), (27.61, 9.61), (31.2, 4.66)),
}


def test_cerr_arithmetic(verdict):
    bad = []
    for method, row in METHOD_ROWS.items():
        for base, (method_cer, printed) in zip(BASELINE_ROW, row):
            got = -cerr(base, method_cer)
            if abs(got - printed) > 0.01:
                bad.append(f"{method} {method_cer}: {got:.4f} vs {printed}")
    verdict(2, not bad, "30 printed -CERR values within 0.01" if not bad else "; ".join(bad))


# 3 -------------------------------------------------------------------------

def random_set(rng: random.Random, i: int) -> HypothesisSet:
    alphabet = "天气很好今金晴情"
    ref = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 10)))
    hyps = set()
    while len(hyps) < rng.randint(1, 5):
        hyps.add("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12))) or "天")
    return HypothesisSet(f"s{i}", "synthetic", tuple(sorted(hyps)), ref)


def test_oracle_ordering(verdict):
    rng = random.Random(1234)
    violations = 0
    for i in range(1000):
        h = random_set(rng, i)
        o = oracles(h)
        one_best = cer(h.one_best, h.transcription).distance
        violations += not (o.compositional_errors <= o.nbest_errors <= one_best)
    verdict(3, violations == 0, f"o_cp <= o_nb <= 1-best on 1000 random sets, {violations} violation(s)")


# 4 -------------------------------------------------------------------------

def test_compositional_oracle_brute_force(verdict):
    rng = random.Random(99)
    mismatches = []
    for _ in range(200):
        pool = rng.sample("abcdef", rng.randint(1, 4))
        ref = "".join(rng.choice("abcdef") for _ in range(rng.randint(1, 6)))
        hyps = ["".join(rng.sample(pool, len(pool)))]
        hyps += ["".join(rng.choice(pool) for _ in range(rng.randint(0, 5))) for _ in range(rng.randint(0, 3))]
        fast = compositional_errors(hyps, ref)
        slow = brute_compositional(pool, ref, len(ref) + 2)
        if fast != slow:
            mismatches.append((pool, ref, fast, slow))
    verdict(4, not mismatches, f"closed-form o_cp equals brute force on 200 instances, {len(mismatches)} mismatch(es)")


# 5 -------------------------------------------------------------------------

def test_edit_distance_brute_force(verdict):
    rng = random.Random(7)
    mismatches = 0
    for _ in range(500):
        a = [rng.choice("abc") for _ in range(rng.randint(0, 7))]
        b = [rng.choice("abc") for _ in range(rng.randint(0, 7))]
        mismatches += edit_distance(a, b).distance != brute_distance(a, b)
    verdict(5, mismatches == 0, f"Levenshtein equals brute force on 500 pairs, {mismatches} mismatch(es)")


# 6 -------------------------------------------------------------------------

def homophone_groups(lex) -> list[list[str]]:
    groups = defaultdict(list)
    for cp in range(0x4E00, 0x6000):
        ch = chr(cp)
        s = lex.default(ch)
        if s is not None:
            groups[s].append(ch)
    return [g for g in groups.values() if len(g) > 1]


def perturb(rng: random.Random, ref: str, homophones: dict[str, list[str]], chars: list[str]) -> str:
    out = []
    for ch in ref:
        r = rng.random()
        if r < 0.3:
            out.append(rng.choice(homophones[ch]))
        elif r < 0.4:
            out.append(rng.choice(chars))
        elif r < 0.45:
            continue
        else:
            out.append(ch)
        if rng.random() < 0.05:
            out.append(rng.choice(chars))
    return "".join(out)


def test_pinyin_regularization(verdict, lex, sample_records):
    rng = random.Random(2024)
    groups = homophone_groups(lex)
    homophones = {ch: g for g in groups for ch in g}
    chars = sorted(homophones)
    violations = 0
    for _ in range(1000):
        ref = "".join(rng.choice(chars) for _ in range(rng.randint(1, 12)))
        hyp = perturb(rng, ref, homophones, chars)
        c = cer(hyp, ref)
        p = pinyin_er(hyp, ref, lex, mode="per_char")
        violations += p.distance > c.distance
    one_best_cer = sum((cer(h.one_best, h.transcription) for h in sample_records[1:]),
                       cer(sample_records[0].one_best, sample_records[0].transcription))
    one_best_pin = sum((pinyin_er(h.one_best, h.transcription, lex) for h in sample_records[1:]),
                       pinyin_er(sample_records[0].one_best, sample_records[0].transcription, lex))
    ok = violations == 0 and one_best_pin.rate < one_best_cer.rate
    verdict(6, ok, f"PinyinER <= CER on 1000 homophone pairs ({violations} violation(s)); "
                   f"sample 1-best PinyinER {pct(one_best_pin):.2f} < CER {pct(one_best_cer):.2f}")


# 7 -------------------------------------------------------------------------

def test_syllable_roundtrip(verdict):
    space = all_syllables()
    bad = [s for s in space if parse_syllable(format_syllable(s)) != s]
    texts = [format_syllable(s) for s in space]
    bad += [t for t in texts if format_syllable(parse_syllable(t)) != t]
    ok = not bad and len(set(texts)) == len(space)
    verdict(7, ok, f"parse/format roundtrip over {len(space)} syllables, {len(bad)} failure(s)")


# 8 -------------------------------------------------------------------------

def test_prompt_fidelity(verdict, lex, sample_records):
    problems = []
    specs = {**{k: v for k, v in table3_specs().items() if k != "Baseline"}, **table4_specs()}
    unrelated = "完全无关的参考文本"
    for name, spec in specs.items():
        template = DIRECT_TEMPLATE if spec.style == "direct" else FINETUNE_TEMPLATE
        for h in sample_records:
            prompt = build_prompt(h, spec, lex)
            want = {"text": spec.n_text.count, "pinyin": spec.n_pinyin_transcribed.count,
                    "ground_truth": spec.n_pinyin_ground_truth.count}
            if count_lines(prompt, template) != want:
                problems.append(f"{name}/{h.id}: line counts")
            for lc, prefix in ((spec.n_text, template.hyp_prefix), (spec.n_pinyin_transcribed, template.pinyin_prefix),
                               (spec.n_pinyin_ground_truth, template.gt_prefix)):
                if lc.repeat_first:
                    first = prefix.format(i=1)
                    lines = [ln for ln in prompt.splitlines() if ln.startswith(first)]
                    if len(lines) != lc.count or len(set(lines)) != 1:
                        problems.append(f"{name}/{h.id}: repeated lines differ")
            if spec.style == "finetune":
                swapped = HypothesisSet(h.id, h.corpus, h.hypotheses, unrelated)
                if build_prompt(swapped, spec, lex) != prompt or pinyin_line(unrelated, lex) in prompt:
                    problems.append(f"{name}/{h.id}: prompt depends on the reference")
    verdict(8, not problems, f"{len(specs)} specs x {len(sample_records)} records"
                             + ("" if not problems else ": " + "; ".join(problems[:5])))


# 9 -------------------------------------------------------------------------

def mock_run(tmp_path, capsys, records, spec_name, reply, label):
    spec = table3_specs()[spec_name]
    fx = tmp_path / f"{label}.jsonl"
    write_fixtures([(build_prompt(h, spec), reply(h)) for h in records], fx)
    out = tmp_path / label
    code = main(["evaluate", SAMPLE, "--spec", spec_name, "--mock", str(fx), "--out", str(out), "--format", "tsv"])
    capsys.readouterr()
    rows = {}
    for ln in (out / "scores.tsv").read_text(encoding="utf-8").splitlines():
        if ln and not ln.startswith(("#", "corpus\t")):
            cells = ln.split("\t")
            rows[cells[0]] = cells
    utts = [json.loads(ln) for ln in (out / "utterances.jsonl").read_text(encoding="utf-8").splitlines()]
    return code, rows, utts


def test_end_to_end_mock(verdict, tmp_path, capsys, sample_records):
    problems = []
    as_json = lambda text: json.dumps({"correction": text}, ensure_ascii=False)

    code, rows, utts = mock_run(tmp_path, capsys, sample_records, "Prompt2",
                                lambda h: as_json(h.transcription), "identity")
    if code != 0 or any(r[2] != "0.00" or r[6] != "-100.00" for r in rows.values()):
        problems.append(f"identity: {rows.get('ALL')}")

    code, rows, utts = mock_run(tmp_path, capsys, sample_records, "Prompt2",
                                lambda h: as_json(h.one_best), "echo")
    if code != 0 or any(r[6] != "0.00" for r in rows.values()):
        problems.append(f"echo: {rows.get('ALL')}")
    if any(u["cer"] != u["baseline_cer"] for u in utts):
        problems.append("echo: utterance CER differs from baseline")
    echo_all = rows.get("ALL")

    code, rows, utts = mock_run(tmp_path, capsys, sample_records, "Prompt2",
                                lambda h: "I am sorry, I can't determine the sentence.", "garbage")
    if code != 0 or rows.get("ALL", [None] * 3)[2] != echo_all[2] or any(r[6] != "0.00" for r in rows.values()):
        problems.append(f"garbage: {rows.get('ALL')}")
    if any(u["failure_reason"] != "parse" or not u["fallback_used"] for u in utts):
        problems.append("garbage: not every record flagged parse")
    verdict(9, not problems, "identity CER 0.00 / -CERR -100.00, echo and garbage CER = baseline "
                             f"{echo_all[2]} with 100% parse fallbacks" if not problems else "; ".join(problems))


# 10 ------------------------------------------------------------------------

def test_determinism(verdict, tmp_path, capsys, monkeypatch, sample_records):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    spec = table3_specs()["Prompt6"]
    fx = tmp_path / "fx.jsonl"
    write_fixtures([(build_prompt(h, spec), json.dumps({"correction": h.hypotheses[1]}, ensure_ascii=False))
                    for h in sample_records], fx)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        main(["evaluate", SAMPLE, "--spec", "Prompt6", "--mock", str(fx), "--sample", "8", "--seed", "11",
              "--max-parallel", "3", "--out", str(out)])
        capsys.readouterr()
        outs.append(out)
    names = ("scores.tsv", "manifest.json", "utterances.jsonl")
    same = [n for n in names if (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()]
    verdict(10, len(same) == len(names), f"byte-identical across two runs: {', '.join(same) or 'none'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
