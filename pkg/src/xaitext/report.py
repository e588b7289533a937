"""Static HTML token heatmaps and metric tables."""
from __future__ import annotations

import csv
import html
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text import PAD_ID, decode

RED = (214, 39, 40)
BLUE = (31, 119, 180)

TABLE_COLUMNS = ("Method", "Δ_comp", "Δ_suff", "AOPC", "Flip@k", "Time [s]")


@dataclass(frozen=True)
class HeatmapSpec:
    tokens: tuple
    scores: tuple
    normalization: float
    positive_label: str = "true"
    negative_label: str = "fake"

    def __post_init__(self):
        if len(self.tokens) != len(self.scores):
            raise ValueError("token and score counts differ")

    def alphas(self) -> list[float]:
        if self.normalization == 0:
            return [0.0] * len(self.scores)
        return [abs(s) / self.normalization for s in self.scores]


def heatmap_spec(seq, attr, vocab) -> HeatmapSpec:
    seq = np.asarray(seq)
    scores = np.asarray(getattr(attr, "scores", attr), dtype=float)
    if scores.shape != seq.shape:
        raise ValueError("attribution is not aligned with the sequence")
    kept = scores[seq != PAD_ID]
    norm = float(np.max(np.abs(kept))) if kept.size else 0.0
    return HeatmapSpec(tuple(decode(seq, vocab)), tuple(kept.tolist()), norm)


def _span(token: str, score: float, alpha: float) -> str:
    if score > 0:
        rgb = RED
    elif score < 0:
        rgb = BLUE
    else:
        return f'<span class="tok" style="background-color: transparent">{html.escape(token)}</span>'
    r, g, b = rgb
    return (f'<span class="tok" style="background-color: rgba({r}, {g}, {b}, {alpha:.4f})">'
            f"{html.escape(token)}</span>")


def render_heatmap(seq, attr, vocab, path=None, caption: str = "") -> str:
    """Self-contained HTML page; red pushes towards the true class, blue towards fake.

    Background alpha is ``|a_i| / max |a|``; PAD positions are not shown.
    """
    spec = heatmap_spec(seq, attr, vocab)
    spans = " ".join(_span(t, s, a) for t, s, a in zip(spec.tokens, spec.scores, spec.alphas()))
    title = html.escape(caption or "token attributions")
    doc = (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8">\n'
        f"<title>{title}</title>\n"
        "<style>body{font-family:sans-serif;line-height:1.9;max-width:60em;margin:2em auto}"
        ".tok{padding:0.1em 0.2em;border-radius:0.2em}"
        ".legend span{padding:0.1em 0.4em;margin-right:1em}</style>\n"
        "</head>\n<body>\n"
        f"<h3>{title}</h3>\n"
        '<p class="legend">'
        f'<span style="background-color: rgba({RED[0]}, {RED[1]}, {RED[2]}, 1.0000)">'
        f"towards {spec.positive_label}</span>"
        f'<span style="background-color: rgba({BLUE[0]}, {BLUE[1]}, {BLUE[2]}, 1.0000)">'
        f"towards {spec.negative_label}</span>"
        f"max |a| = {spec.normalization:.6g}</p>\n"
        f'<p class="text">{spans}</p>\n'
        "</body>\n</html>\n"
    )
    if path is not None:
        Path(path).write_text(doc, encoding="utf-8")
    return doc


def _row_values(row):
    if isinstance(row, dict):
        return [row["method"], row["delta_comp"], row["delta_suff"], row["aopc"],
                row["flip_at_k"], row["time_s"]]
    return [row.method, row.delta_comp, row.delta_suff, row.aopc, row.flip_at_k, row.time_s]


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{v:.6f}"


def render_metrics_table(rows, fmt: str = "markdown") -> str:
    """Method x metric table with six-decimal fixed formatting."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to render")
    cells = [[_cell(v) for v in _row_values(r)] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(cells)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(TABLE_COLUMNS) + " |",
                 "|" + "|".join(["---"] + ["---:"] * (len(TABLE_COLUMNS) - 1)) + "|"]
        lines += ["| " + " | ".join(c) + " |" for c in cells]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")
