"""Table-style rendering (TSV or aligned text) of score, oracle and corpus statistics."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .dataset import StatsRow
from .scoring import ScoreReport

SCORE_COLUMNS = ("corpus", "N", "CER%", "PinyinER%", "o_nb%", "o_cp%", "-CERR%")
CERR_LEGEND = "# -CERR% = -100*(baseline-CER)/baseline; negative values are improvements"


def pct(x: float | None) -> str:
    if x is None:
        return "-"
    return f"{round(100 * x, 2) + 0.0:.2f}"


def signed(x: float | None) -> str:
    if x is None:
        return "-"
    return f"{round(x, 2) + 0.0:.2f}"


def score_rows(report: ScoreReport) -> list[list[str]]:
    rows = []
    for r in report.rows:
        minus_cerr = None if r.cerr is None else -r.cerr
        rows.append([r.corpus, str(r.n), pct(r.cer), pct(r.pinyin_er), pct(r.o_nb), pct(r.o_cp),
                     signed(minus_cerr)])
    return rows


def stats_rows(rows: Sequence[StatsRow]) -> list[list[str]]:
    return [
        [r.corpus, str(r.pairs), f"{r.mean_hyps:.2f}", pct(r.cer), pct(r.pinyin_er), pct(r.o_nb), pct(r.o_cp)]
        for r in rows
    ]


STATS_COLUMNS = ("corpus", "pairs", "hyps/utt", "CER%", "PinyinER%", "o_nb%", "o_cp%")


def render(header: Sequence[str], rows: Sequence[Sequence[str]], fmt: str = "table",
           footer: Sequence[str] = ()) -> str:
    if fmt == "tsv":
        lines = ["\t".join(header)] + ["\t".join(r) for r in rows]
    else:
        widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
        def line(cells):
            first = str(cells[0]).ljust(widths[0])
            rest = [str(c).rjust(w) for c, w in zip(cells[1:], widths[1:])]
            return "  ".join([first, *rest]).rstrip()
        lines = [line(header), "  ".join("-" * w for w in widths)] + [line(r) for r in rows]
    return "\n".join([*lines, *footer]) + "\n"


def render_scores(report: ScoreReport, fmt: str = "table", extra_footer: Sequence[str] = ()) -> str:
    footer = [CERR_LEGEND]
    if report.macro:
        footer.append("# rates are macro-averaged over utterances")
    if report.skipped:
        footer.append(f"# skipped {report.skipped} utterance(s) with an empty reference")
    return render(SCORE_COLUMNS, score_rows(report), fmt, [*footer, *extra_footer])


def read_baseline(path: str | Path) -> dict[str, float]:
    """Corpus -> CER fraction from a ``scores.tsv`` (or a run directory holding one)."""
    path = Path(path)
    if path.is_dir():
        path = path / "scores.tsv"
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    for row in csv.DictReader(lines, delimiter="\t"):
        if row.get("CER%") not in (None, "-"):
            out[row["corpus"]] = float(row["CER%"]) / 100
    if not out:
        raise ValueError(f"{path}: no CER% rows")
    return out

