"""Per-span label scores: boundary differences through a per-language MLP.

For each span (i, j) the feature vector concatenates the forward-half
difference f_j - f_i with the backward-half difference b_i - b_j of the
boundary rows. A two-layer MLP (one ReLU) maps it to one score per label.
Label index 0 is the reserved empty label and its column is pinned to exactly
zero; only relative scores matter for decoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .trees import EMPTY, SpanSet


class IndexOutOfRange(IndexError):
    pass


class UnknownLabel(KeyError):
    pass


class VocabMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass
class LanguageHead:
    """One MLP span classifier: labels[0] is the empty label."""

    language: str
    labels: list[str]
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    label_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        assert self.labels and self.labels[0] == EMPTY, "label 0 must be the empty label"
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def param_count(self) -> int:
        return sum(t.data.size for t in (self.w1, self.b1, self.w2, self.b2))

    def params(self) -> dict[str, Tensor]:
        pre = f"head.{self.language}"
        return {f"{pre}.w1": self.w1, f"{pre}.b1": self.b1,
                f"{pre}.w2": self.w2, f"{pre}.b2": self.b2}


def init_head(language: str, labels: list[str], d_model: int, d_hidden: int,
              rng: np.random.Generator) -> LanguageHead:
    if not labels or labels[0] != EMPTY:
        labels = [EMPTY] + [lab for lab in labels if lab != EMPTY]
    return LanguageHead(
        language,
        labels,
        w1=ad.parameter(rng.normal(0.0, np.sqrt(1.0 / d_model), size=(d_model, d_hidden))),
        b1=ad.parameter(np.zeros(d_hidden)),
        w2=ad.parameter(rng.normal(0.0, np.sqrt(1.0 / d_hidden), size=(d_hidden, len(labels)))),
        b2=ad.parameter(np.zeros(len(labels))),
    )


class ScoreChart:
    """Dense s(i, j, label) table for one sentence.

    ``scores[i, j, l]`` is valid for 0 <= i < j <= n; the empty-label column
    is exactly zero. When built by :func:`score_chart` the chart also carries
    the underlying autodiff tensor of shape (num_spans, L), with spans in
    lexicographic (i, j) order, so losses can flow gradients into it.
    """

    def __init__(self, n: int, labels: list[str], scores: np.ndarray,
                 tensor: Tensor | None = None):
        assert labels[0] == EMPTY
        self.n = n
        self.labels = labels
        self.label_index = {lab: i for i, lab in enumerate(labels)}
        self.scores = scores
        self.tensor = tensor

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def row(self, i: int, j: int) -> int:
        """Row of span (i, j) in the flat lexicographic span order."""
        if not (0 <= i < j <= self.n):
            raise IndexOutOfRange(f"span ({i}, {j}) invalid for n={self.n}")
        return i * self.n - i * (i - 1) // 2 + (j - i - 1)


def iter_spans(n: int):
    for i in range(n):
        for j in range(i + 1, n + 1):
            yield i, j


def span_vector(boundary: np.ndarray, i: int, j: int) -> np.ndarray:
    """v = concat(f_j - f_i, b_i - b_j) from the halves of boundary rows."""
    reprs = boundary.data if isinstance(boundary, Tensor) else boundary
    n = reprs.shape[0] - 1
    if not (0 <= i < j <= n):
        raise IndexOutOfRange(f"span ({i}, {j}) invalid for n={n}")
    half = reprs.shape[1] // 2
    return np.concatenate([
        reprs[j, :half] - reprs[i, :half],
        reprs[i, half:] - reprs[j, half:],
    ])


def score_chart(boundary: Tensor, head: LanguageHead) -> ScoreChart:
    """Score every span of the sentence with the head's MLP."""
    n = boundary.shape[0] - 1
    d = boundary.shape[1]
    if head.w1.shape[0] != d:
        raise ad.ShapeMismatch("score_chart", head.w1.shape[0], d)
    half = d // 2
    starts = [i for i, _ in iter_spans(n)]
    ends = [j for _, j in iter_spans(n)]
    fwd = ad.slice_last(boundary, 0, half)
    bwd = ad.slice_last(boundary, half, d)
    feats = ad.concat([
        ad.sub(ad.embedding_lookup(fwd, ends), ad.embedding_lookup(fwd, starts)),
        ad.sub(ad.embedding_lookup(bwd, starts), ad.embedding_lookup(bwd, ends)),
    ])
    hidden = ad.relu(ad.add(ad.matmul(feats, head.w1), head.b1))
    raw = ad.add(ad.matmul(hidden, head.w2), head.b2)
    num_spans = len(starts)
    # Pin the empty-label column to an exact zero constant; no gradient flows
    # into the head through it.
    pinned = ad.concat([
        ad.tensor(np.zeros((num_spans, 1))),
        ad.slice_last(raw, 1, len(head.labels)),
    ])
    dense = np.zeros((n + 1, n + 1, len(head.labels)))
    dense[np.array(starts), np.array(ends)] = pinned.data
    return ScoreChart(n, list(head.labels), dense, tensor=pinned)


def tree_score(chart: ScoreChart, spans: SpanSet) -> float:
    """Sum of chart cells over the tree's spans; empty-labeled spans add 0."""
    total = 0.0
    for s in spans:
        if not (0 <= s.start < s.end <= chart.n):
            raise IndexOutOfRange(f"span {s} outside chart of length {chart.n}")
        idx = chart.label_index.get(s.label)
        if idx is None:
            raise UnknownLabel(f"label {s.label!r} not in chart vocabulary")
        total += float(chart.scores[s.start, s.end, idx])
    return total


def ensemble_chart(charts: list[ScoreChart]) -> ScoreChart:
    """Cellwise arithmetic mean, summed in list order."""
    assert charts, "need at least one chart"
    first = charts[0]
    for c in charts[1:]:
        if c.n != first.n:
            raise LengthMismatch(f"chart lengths differ: {c.n} vs {first.n}")
        if c.labels != first.labels:
            raise VocabMismatch("ensemble requires identical label vocabularies")
    acc = first.scores.copy()
    for c in charts[1:]:
        acc += c.scores
    acc /= len(charts)
    return ScoreChart(first.n, list(first.labels), acc)


def dump_chart(chart: ScoreChart, fh) -> None:
    """Debug dump: one ``i j label score`` line per cell."""
    for i, j in iter_spans(chart.n):
        for l, lab in enumerate(chart.labels):
            shown = lab if lab != EMPTY else "∅"
            fh.write(f"{i} {j} {shown} {chart.scores[i, j, l]!r}\n")
