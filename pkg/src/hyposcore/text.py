"""Text normalization applied before scoring: simplification, width folding, stripping."""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class NormalizationPolicy:
    """Which normalization steps to apply, in the fixed order listed here.

    ``punctuation=None`` means every Unicode punctuation character (category
    ``P*``) plus the ASCII symbols in :data:`string.punctuation`.
    """

    to_simplified: bool = True
    width_fold: bool = True
    strip_whitespace: bool = True
    strip_punctuation: bool = True
    punctuation: frozenset[str] | None = None

    def is_punct(self, ch: str) -> bool:
        if self.punctuation is not None:
            return ch in self.punctuation
        return ch in string.punctuation or unicodedata.category(ch).startswith("P")


DEFAULT_POLICY = NormalizationPolicy()
RAW_POLICY = NormalizationPolicy(
    to_simplified=False, width_fold=False, strip_whitespace=False, strip_punctuation=False
)


def load_simplification_table(path: str | Path) -> dict[str, str]:
    """Read ``<trad-char>\\t<simp-char>`` rows; ``#`` lines are comments."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or len(parts[0]) != 1 or len(parts[1]) != 1:
                raise ValueError(f"{path}:{lineno}: expected '<trad-char>\\t<simp-char>'")
            table[parts[0]] = parts[1]
    return table


@lru_cache(maxsize=1)
def default_simplification_table() -> dict[str, str]:
    with resources.as_file(resources.files("hyposcore") / "data" / "t2s.tsv") as p:
        return load_simplification_table(p)


def fold_width(ch: str) -> str:
    cp = ord(ch)
    if 0xFF01 <= cp <= 0xFF5E:
        return chr(cp - 0xFEE0)
    if cp == 0x3000:
        return " "
    return ch


def normalize(
    text: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    table: dict[str, str] | None = None,
) -> str:
    if policy.to_simplified:
        if table is None:
            table = default_simplification_table()
        text = "".join(table.get(ch, ch) for ch in text)
    if policy.width_fold:
        text = "".join(fold_width(ch) for ch in text)
    if policy.strip_whitespace:
        text = "".join(ch for ch in text if not ch.isspace())
    if policy.strip_punctuation:
        text = "".join(ch for ch in text if not policy.is_punct(ch))
    return text
