"""Regenerate the bundled lexicon and traditional->simplified table.

Inputs are the data files shipped inside the pypinyin wheel (MIT) and the
OpenCC dictionary from opencc-python-reimplemented (Apache-2.0)::

    python tools/build_data.py --pinyin-dict pypinyin/pinyin_dict.json \\
        --phrases-dict pypinyin/phrases_dict.json \\
        --ts-characters opencc/dictionary/TSCharacters.txt

Readings outside the initial/final inventory (m, ng, hm, hng) are dropped.
Only phrases whose reading differs from the per-character defaults are kept,
since the rest never change a contextual transliteration.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from hyposcore.pinyin import PinyinError, format_syllable, normalize_reading, parse_syllable

DATA = Path(__file__).resolve().parents[1] / "src" / "hyposcore" / "data"


def _convert(reading: str) -> str | None:
    try:
        return format_syllable(parse_syllable(normalize_reading(reading)))
    except PinyinError:
        return None


def build_chars(pinyin_dict: dict[str, str]) -> dict[str, list[str]]:
    chars = {}
    for cp, raw in sorted(pinyin_dict.items(), key=lambda kv: int(kv[0])):
        readings = []
        for r in raw.split(","):
            s = _convert(r)
            if s and s not in readings:
                readings.append(s)
        if readings:
            chars[chr(int(cp))] = readings
    return chars


def build_phrases(phrases: dict[str, list[list[str]]], chars: dict[str, list[str]]) -> dict[str, list[str]]:
    out = {}
    for phrase, readings in sorted(phrases.items()):
        if len(readings) != len(phrase) or any(c not in chars for c in phrase):
            continue
        sylls = [_convert(r[0]) for r in readings]
        if None in sylls:
            continue
        if any(chars[c][0] != s for c, s in zip(phrase, sylls)):
            out[phrase] = sylls
    return out


def build_t2s(path: Path) -> dict[str, str]:
    table = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        trad, simp = line.split("\t")
        simp = simp.split(" ")[0]
        if len(trad) == 1 and len(simp) == 1 and trad != simp:
            table[trad] = simp
    # resolve chains so that applying the table once is a fixed point
    resolved = {}
    for trad in table:
        seen, cur = {trad}, table[trad]
        while cur in table and cur not in seen:
            seen.add(cur)
            cur = table[cur]
        if cur != trad and cur not in table:
            resolved[trad] = cur
    return dict(sorted(resolved.items()))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pinyin-dict", type=Path, required=True)
    ap.add_argument("--phrases-dict", type=Path, required=True)
    ap.add_argument("--ts-characters", type=Path, required=True)
    args = ap.parse_args()

    chars = build_chars(json.loads(args.pinyin_dict.read_text(encoding="utf-8")))
    phrases = build_phrases(json.loads(args.phrases_dict.read_text(encoding="utf-8")), chars)
    t2s = build_t2s(args.ts_characters)

    with open(DATA / "chars.tsv", "w", encoding="utf-8") as fh:
        fh.write("# character\treadings (first is the default)\n")
        fh.write("# derived from pypinyin pinyin_dict (MIT), itself built from Unihan\n")
        for ch, readings in chars.items():
            fh.write(f"{ch}\t{','.join(readings)}\n")
    with open(DATA / "phrases.tsv", "w", encoding="utf-8") as fh:
        fh.write("# phrase\tone syllable per character\n")
        fh.write("# derived from pypinyin phrases_dict (MIT); only context-changing entries\n")
        for phrase, sylls in phrases.items():
            fh.write(f"{phrase}\t{','.join(sylls)}\n")
    with open(DATA / "t2s.tsv", "w", encoding="utf-8") as fh:
        fh.write("# traditional\tsimplified\n")
        fh.write("# derived from OpenCC TSCharacters.txt (Apache-2.0), first candidate, chains resolved\n")
        for trad, simp in t2s.items():
            fh.write(f"{trad}\t{simp}\n")
    print(f"chars={len(chars)} phrases={len(phrases)} t2s={len(t2s)}")


if __name__ == "__main__":
    main()
