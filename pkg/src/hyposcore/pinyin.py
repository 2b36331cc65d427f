"""Hanyu Pinyin syllables, lexicons and grapheme-to-Pinyin transliteration.

A syllable is split into an optional initial, a final and a tone digit, with
the neutral tone written as ``5``::

    >>> parse_syllable("zhuo1")
    Syllable(initial='zh', final='uo', tone=1)
    >>> format_syllable(Syllable(None, "a", 5))
    'a5'
"""

from __future__ import annotations

import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal as TypingLiteral, Union

logger = logging.getLogger(__name__)

INITIALS: tuple[str, ...] = (
    "b", "c", "ch", "d", "f", "g", "h", "j", "k", "l", "m", "n",
    "p", "q", "r", "s", "sh", "t", "w", "x", "y", "z", "zh",
)
FINALS: tuple[str, ...] = (
    "a", "ai", "an", "ang", "ao", "e", "ei", "en", "eng", "er",
    "i", "ia", "ian", "iang", "iao", "ie", "in", "ing", "iong", "iu",
    "o", "ong", "ou", "u", "ua", "uai", "uan", "uang", "ue", "ui",
    "un", "uo", "ü", "üe",
)
TONES: tuple[int, ...] = (1, 2, 3, 4, 5)
NEUTRAL_TONE = 5

_INITIAL_SET = frozenset(INITIALS)
_FINAL_SET = frozenset(FINALS)
# two-letter initials must win over their one-letter prefixes
_INITIALS_LONGEST_FIRST = tuple(sorted(INITIALS, key=len, reverse=True))

# combining marks produced by NFD on tone-marked vowels
_TONE_MARKS = {"̄": 1, "́": 2, "̌": 3, "̀": 4}
_CIRCUMFLEX = "̂"

Mode = TypingLiteral["contextual", "per_char"]


class PinyinError(ValueError):
    """Base class for Pinyin parsing and lexicon errors."""


class RemainderNotAFinal(PinyinError):
    pass


class EmptyFinal(PinyinError):
    pass


class BadToneDigit(PinyinError):
    pass


class UnknownCharacter(PinyinError):
    pass


class LexiconParseError(PinyinError):
    def __init__(self, path: str | Path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class InvariantViolation(PinyinError):
    pass


@dataclass(frozen=True, order=True)
class Syllable:
    initial: str | None
    final: str
    tone: int

    def __post_init__(self):
        if self.initial is not None and self.initial not in _INITIAL_SET:
            raise InvariantViolation(f"not an initial: {self.initial!r}")
        if self.final not in _FINAL_SET:
            raise InvariantViolation(f"not a final: {self.final!r}")
        if self.tone not in TONES:
            raise InvariantViolation(f"tone must be 1-5, got {self.tone!r}")

    def __str__(self) -> str:
        return format_syllable(self)

    def key(self, tone_sensitive: bool = True) -> tuple:
        if tone_sensitive:
            return (self.initial, self.final, self.tone)
        return (self.initial, self.final)


@dataclass(frozen=True)
class Literal:
    """A non-Han character (or an unknown Han character) passed through as is."""

    text: str

    def __str__(self) -> str:
        return self.text


PinyinToken = Union[Syllable, Literal]


def parse_syllable(text: str, lenient: bool = True) -> Syllable:
    """Split a tone-numbered syllable such as ``"ni3"`` into its parts.

    The initial is the longest inventory prefix; whatever is left before the
    tone digit must be a final. Without a trailing digit the tone is neutral
    when ``lenient`` is set, otherwise :class:`BadToneDigit` is raised.
    """
    if not text:
        raise EmptyFinal("empty syllable")
    body = text
    if text[-1].isdigit():
        digit = int(text[-1])
        if digit not in TONES:
            raise BadToneDigit(f"{text!r}: tone digit must be 1-5")
        tone = digit
        body = text[:-1]
    elif lenient:
        tone = NEUTRAL_TONE
    else:
        raise BadToneDigit(f"{text!r}: missing tone digit")

    initial = None
    for candidate in _INITIALS_LONGEST_FIRST:
        if body.startswith(candidate):
            initial = candidate
            break
    rest = body[len(initial):] if initial else body
    if not rest:
        raise EmptyFinal(f"{text!r}: nothing left after initial {initial!r}")
    if rest not in _FINAL_SET:
        raise RemainderNotAFinal(f"{text!r}: {rest!r} is not a final")
    return Syllable(initial, rest, tone)


def format_syllable(s: Syllable) -> str:
    return f"{s.initial or ''}{s.final}{s.tone}"


def format_tokens(tokens: Iterable[PinyinToken]) -> str:
    """Render tokens space-separated, e.g. ``"jin1 tian1 , hao3"``; whitespace literals are dropped."""
    return " ".join(s for s in map(str, tokens) if s.strip())


def normalize_reading(text: str) -> str:
    """Bring a lexicon reading into the tone-numbered form ``parse_syllable`` takes.

    Handles tone-marked vowels, ``v`` for ``ü``, the bare syllabic ``n``
    (written ``en``) and a missing tone digit (neutral tone).
    """
    decomposed = unicodedata.normalize("NFD", text.strip().lower())
    tone = None
    kept = []
    for ch in decomposed:
        if ch in _TONE_MARKS:
            tone = _TONE_MARKS[ch]
        elif ch == _CIRCUMFLEX:
            continue
        else:
            kept.append(ch)
    body = unicodedata.normalize("NFC", "".join(kept)).replace("v", "ü")
    if body and body[-1].isdigit():
        if tone is not None:
            raise BadToneDigit(f"{text!r}: both a tone mark and a tone digit")
        body, tone = body[:-1], int(body[-1])
    if body == "n":
        body = "en"
    return f"{body}{tone if tone is not None else NEUTRAL_TONE}"


def is_han(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0xF900 <= cp <= 0xFAFF
        or 0x20000 <= cp <= 0x3134F
    )


@dataclass(frozen=True)
class PinyinLexicon:
    char_readings: dict[str, tuple[Syllable, ...]]
    phrase_readings: dict[str, tuple[Syllable, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for ch, readings in self.char_readings.items():
            if len(ch) != 1 or not readings:
                raise InvariantViolation(f"bad character entry {ch!r}")
        for phrase, sylls in self.phrase_readings.items():
            if len(sylls) != len(phrase):
                raise InvariantViolation(
                    f"phrase {phrase!r} has {len(sylls)} syllables for {len(phrase)} characters"
                )
            missing = [c for c in phrase if c not in self.char_readings]
            if missing:
                raise InvariantViolation(
                    f"phrase {phrase!r} uses characters without a reading: {''.join(missing)}"
                )
        object.__setattr__(
            self, "max_phrase_len", max(map(len, self.phrase_readings), default=0)
        )

    def default(self, ch: str) -> Syllable | None:
        readings = self.char_readings.get(ch)
        return readings[0] if readings else None


def _parse_row_readings(raw: str) -> tuple[Syllable, ...]:
    return tuple(parse_syllable(normalize_reading(r)) for r in raw.split(",") if r.strip())


def load_lexicon(*paths: str | Path) -> PinyinLexicon:
    """Read one or more lexicon TSV files into a validated lexicon.

    Each row is ``<char-or-phrase>\\t<comma-separated syllables>``. Rows read
    later override earlier ones for the same key.
    """
    chars: dict[str, tuple[Syllable, ...]] = {}
    phrases: dict[str, tuple[Syllable, ...]] = {}
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0] or not parts[1].strip():
                    raise LexiconParseError(path, lineno, "expected '<key>\\t<readings>'")
                key, raw = parts
                try:
                    readings = _parse_row_readings(raw)
                except PinyinError as exc:
                    raise InvariantViolation(f"{path}:{lineno}: entry {key!r}: {exc}") from exc
                target = chars if len(key) == 1 else phrases
                if key in target:
                    logger.warning("%s:%d: duplicate entry %r overrides earlier row", path, lineno, key)
                target[key] = readings
    return PinyinLexicon(chars, phrases)


@lru_cache(maxsize=1)
def default_lexicon() -> PinyinLexicon:
    """The bundled character and phrase lexicon."""
    data = resources.files("hyposcore") / "data"
    with resources.as_file(data / "chars.tsv") as chars, resources.as_file(
        data / "phrases.tsv"
    ) as phrases:
        return load_lexicon(chars, phrases)


def transliterate(
    text: str,
    lex: PinyinLexicon,
    mode: Mode = "contextual",
    strict: bool = False,
    unknown: Counter | None = None,
) -> list[PinyinToken]:
    """Map every character of ``text`` to exactly one token.

    In contextual mode the longest phrase entry starting at each position is
    used, falling back to the default reading of single characters. Han
    characters missing from the lexicon become :class:`Literal` tokens (and
    are tallied in ``unknown`` when given) unless ``strict`` is set.
    """
    if mode not in ("contextual", "per_char"):
        raise ValueError(f"unknown transliteration mode {mode!r}")
    out: list[PinyinToken] = []
    i, n = 0, len(text)
    longest = lex.max_phrase_len if mode == "contextual" else 0
    while i < n:
        for size in range(min(longest, n - i), 1, -1):
            sylls = lex.phrase_readings.get(text[i:i + size])
            if sylls is not None:
                out.extend(sylls)
                i += size
                break
        else:
            ch = text[i]
            syll = lex.default(ch)
            if syll is not None:
                out.append(syll)
            elif is_han(ch):
                if strict:
                    raise UnknownCharacter(f"no reading for {ch!r} (U+{ord(ch):04X})")
                if unknown is not None:
                    unknown[ch] += 1
                out.append(Literal(ch))
            else:
                out.append(Literal(ch))
            i += 1
    return out


def pinyin_line(text: str, lex: PinyinLexicon, mode: Mode = "contextual") -> str:
    return format_tokens(transliterate(text, lex, mode))


def all_syllables() -> list[Syllable]:
    """Every inventory combination, including the initial-less ones."""
    return [
        Syllable(initial, final, tone)
        for initial in (None, *INITIALS)
        for final in FINALS
        for tone in TONES
    ]
