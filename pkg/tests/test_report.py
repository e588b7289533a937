import re
from html.parser import HTMLParser

import numpy as np
import pytest

from xaitext.faithfulness import AggregateRow
from xaitext.report import TABLE_COLUMNS, heatmap_spec, render_heatmap, render_metrics_table
from xaitext.text import Vocabulary

VOCAB = Vocabulary({"the": 2, "cat": 3, "sat": 4, "<b>": 5}, 10)


class SpanCollector(HTMLParser):
    def __init__(self):
        super().__init__()
        self.spans, self._open, self.external = [], None, False

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if tag in ("link", "script", "img") or "src" in attrs or "href" in attrs:
            self.external = True
        if tag == "span" and attrs.get("class") == "tok":
            self._open = [attrs["style"], ""]

    def handle_data(self, data):
        if self._open is not None:
            self._open[1] += data

    def handle_endtag(self, tag):
        if tag == "span" and self._open is not None:
            self.spans.append(tuple(self._open))
            self._open = None


def spans_of(doc):
    parser = SpanCollector()
    parser.feed(doc)
    out = []
    for style, text in parser.spans:
        m = re.search(r"rgba\((\d+), (\d+), (\d+), ([\d.]+)\)", style)
        out.append((text, (tuple(map(int, m.groups()[:3])), float(m.group(4))) if m else None))
    return out, parser.external


def test_heatmap_proportional_alphas():
    doc = render_heatmap([2, 3, 0, 0], np.array([0.4, -0.2, 0.0, 0.0]), VOCAB, caption="ig / cnn")
    spans, external = spans_of(doc)
    assert spans == [("the", ((214, 39, 40), 1.0)), ("cat", ((31, 119, 180), 0.5))]
    assert not external and "ig / cnn" in doc


def test_heatmap_all_zero_is_neutral():
    spans, _ = spans_of(render_heatmap([2, 3, 4], np.zeros(3), VOCAB))
    assert [s[0] for s in spans] == ["the", "cat", "sat"]
    assert all(s[1] is None for s in spans)


def test_heatmap_single_positive_full_intensity():
    spans, _ = spans_of(render_heatmap([2, 3, 4], np.array([0.0, 0.03, 0.0]), VOCAB))
    colored = [s for s in spans if s[1] is not None]
    assert colored == [("cat", ((214, 39, 40), 1.0))]


def test_heatmap_tokens_in_order_escaped_and_pure(tmp_path):
    seq, attr = [5, 2, 5, 0], np.array([0.1, -0.3, 0.2, 0.0])
    doc = render_heatmap(seq, attr, VOCAB, path=tmp_path / "h.html")
    assert (tmp_path / "h.html").read_text(encoding="utf-8") == doc
    assert doc == render_heatmap(seq, attr, VOCAB)
    assert "&lt;b&gt;" in doc
    assert [s[0] for s in spans_of(doc)[0]] == ["<b>", "the", "<b>"]


def test_heatmap_spec_rejects_misaligned():
    spec = heatmap_spec([2, 0], np.array([0.5, 0.0]), VOCAB)
    assert spec.tokens == ("the",) and spec.normalization == 0.5
    with pytest.raises(ValueError):
        heatmap_spec([2, 0], np.array([0.5]), VOCAB)


ROW = AggregateRow("ig", 0.5, 0.2008, 0.6498, 4.7833, 0.1559)


def parse_markdown_table(text):
    """Strict pipe-table parser: every line framed by pipes, equal cell counts."""
    lines = text.rstrip("\n").split("\n")
    rows = []
    for line in lines:
        if not (line.startswith("|") and line.endswith("|")):
            raise ValueError(f"unframed line {line!r}")
        rows.append([c.strip() for c in line[1:-1].split("|")])
    if len({len(r) for r in rows}) != 1:
        raise ValueError("ragged table")
    if not all(re.fullmatch(r":?-{3,}:?", c) for c in rows[1]):
        raise ValueError("bad separator row")
    return rows[0], rows[2:]


def test_markdown_table_round_trip():
    rows = [ROW, AggregateRow("lime", 0.1, 0.2, 0.3, 21.0, None)]
    header, body = parse_markdown_table(render_metrics_table(rows))
    assert tuple(header) == TABLE_COLUMNS
    assert body[0] == ["ig", "0.500000", "0.200800", "0.649800", "4.783300", "0.155900"]
    assert body[1][-1] == "-"
    assert [float(c) for c in body[0][1:]] == [0.5, 0.2008, 0.6498, 4.7833, 0.1559]


def test_csv_table_one_row():
    lines = render_metrics_table([ROW], fmt="csv").splitlines()
    assert len(lines) == 2 and lines[0].split(",") == list(TABLE_COLUMNS)
    assert lines[1].startswith("ig,0.500000,")
    with pytest.raises(ValueError):
        render_metrics_table([])
    with pytest.raises(ValueError):
        render_metrics_table([ROW], fmt="latex")
