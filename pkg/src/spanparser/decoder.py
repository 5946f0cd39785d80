"""Exact argmax tree search over a score chart.

`cky_decode` runs the cubic dynamic program; `brute_force_decode` enumerates
every binary bracketing (test oracle, n <= 8). Both use the same label rules
(the empty label competes everywhere except at the root) and the same tie
order (lowest split point, then lowest label index), and both accumulate the
total as s(span) + (left_total + right_total) so equal trees produce
bit-identical scores. Spans that come out labeled empty are elided when the
tree is rebuilt.
"""

from __future__ import annotations

import numpy as np

from .scorer import LengthMismatch, ScoreChart, UnknownLabel
from .trees import EMPTY, Internal, Leaf, SpanSet, Tree


class EmptyChart(ValueError):
    pass


class SentenceTooLong(ValueError):
    def __init__(self, n: int, limit: int):
        super().__init__(f"sentence length {n} exceeds decoder limit {limit}")
        self.n = n


def _placeholder_leaves(n: int) -> list[tuple[str, str]]:
    return [(f"w{i}", "XX") for i in range(n)]


def _cky_tables(scores: np.ndarray, n: int):
    """Fill best score / label / split tables bottom-up."""
    best = np.zeros((n + 1, n + 1))
    best_label = np.zeros((n + 1, n + 1), dtype=np.intp)
    best_split = np.full((n + 1, n + 1), -1, dtype=np.intp)
    for width in range(1, n + 1):
        for i in range(0, n - width + 1):
            j = i + width
            if (i, j) == (0, n):
                lab = 1 + int(np.argmax(scores[i, j, 1:]))  # root excludes empty
            else:
                lab = int(np.argmax(scores[i, j]))
            total = scores[i, j, lab]
            if width > 1:
                sums = best[i, i + 1 : j] + best[i + 1 : j, j]
                k = int(np.argmax(sums))  # first max = lowest split
                best_split[i, j] = i + 1 + k
                total = total + sums[k]
            best[i, j] = total
            best_label[i, j] = lab
    return best, best_label, best_split


def _rebuild(i: int, j: int, labels, best_label, best_split,
             leaves) -> list[Tree]:
    if j - i == 1:
        word, tag = leaves[i]
        children: list[Tree] = [Leaf(i, word, tag)]
    else:
        k = int(best_split[i, j])
        children = _rebuild(i, k, labels, best_label, best_split, leaves) + \
            _rebuild(k, j, labels, best_label, best_split, leaves)
    lab = labels[best_label[i, j]]
    if lab == EMPTY:
        return children
    return [Internal(lab, children)]


def cky_decode(chart: ScoreChart, leaves: list[tuple[str, str]] | None = None,
               max_len: int = 300) -> Tree:
    """Highest-scoring tree (collapsed form) under the chart."""
    tree, _ = cky_decode_scored(chart, leaves, max_len)
    return tree


def cky_decode_scored(chart: ScoreChart, leaves: list[tuple[str, str]] | None = None,
                      max_len: int = 300) -> tuple[Tree, float]:
    n = chart.n
    if n < 1:
        raise EmptyChart("chart covers no tokens")
    if n > max_len:
        raise SentenceTooLong(n, max_len)
    if leaves is None:
        leaves = _placeholder_leaves(n)
    best, best_label, best_split = _cky_tables(chart.scores, n)
    forest = _rebuild(0, n, chart.labels, best_label, best_split, leaves)
    assert len(forest) == 1, "root label is never empty"
    return forest[0], float(best[0, n])


def _bracketings(i: int, j: int):
    """All binary bracketings of (i, j), splits enumerated in ascending order."""
    if j - i == 1:
        yield (i, j, None)
        return
    for k in range(i + 1, j):
        for left in _bracketings(i, k):
            for right in _bracketings(k, j):
                yield (i, j, (k, left, right))


def brute_force_decode(chart: ScoreChart,
                       leaves: list[tuple[str, str]] | None = None) -> Tree:
    tree, _ = brute_force_decode_scored(chart, leaves)
    return tree


def brute_force_decode_scored(chart: ScoreChart,
                              leaves: list[tuple[str, str]] | None = None,
                              limit: int = 8) -> tuple[Tree, float]:
    """Exhaustive search over bracketings x label choices; exact maximum."""
    n = chart.n
    if n < 1:
        raise EmptyChart("chart covers no tokens")
    if n > limit:
        raise SentenceTooLong(n, limit)
    if leaves is None:
        leaves = _placeholder_leaves(n)
    scores = chart.scores
    L = chart.num_labels

    def best_label(i: int, j: int) -> tuple[int, float]:
        first = 1 if (i, j) == (0, n) else 0
        lab, val = first, float(scores[i, j, first])
        for l in range(first + 1, L):
            v = float(scores[i, j, l])
            if v > val:
                lab, val = l, v
        return lab, val

    def score_of(node) -> tuple[float, list]:
        i, j, split = node
        lab, val = best_label(i, j)
        if split is None:
            return val, [(i, j, lab)]
        k, left, right = split
        lscore, lcells = score_of(left)
        rscore, rcells = score_of(right)
        return val + (lscore + rscore), [(i, j, lab)] + lcells + rcells

    best_score = -np.inf
    best_cells = None
    for structure in _bracketings(0, n):
        total, cells = score_of(structure)
        if total > best_score:
            best_score = total
            best_cells = cells

    assert best_cells is not None
    # Rebuild the tree from the chosen cells (parents precede children).
    cell_label = {(i, j): lab for i, j, lab in best_cells}
    order = sorted(cell_label, key=lambda ij: (ij[0], -ij[1]))

    def build(idx: int) -> tuple[list[Tree], int, int]:
        i, j = order[idx]
        idx += 1
        children: list[Tree] = []
        pos = i
        while pos < j:
            if idx < len(order) and order[idx][0] == pos and order[idx][1] <= j:
                sub, idx, pos = build(idx)
                children.extend(sub)
            else:
                word, tag = leaves[pos]
                children.append(Leaf(pos, word, tag))
                pos += 1
        lab = chart.labels[cell_label[(i, j)]]
        if lab == EMPTY:
            return children, idx, j
        return [Internal(lab, children)], idx, j

    forest, idx, _ = build(0)
    assert idx == len(order) and len(forest) == 1
    return forest[0], float(best_score)


def loss_augmented_decode(chart: ScoreChart, gold: SpanSet,
                          leaves: list[tuple[str, str]] | None = None,
                          max_len: int = 300) -> Tree:
    tree, _ = loss_augmented_decode_scored(chart, gold, leaves, max_len)
    return tree


def loss_augmented_decode_scored(chart: ScoreChart, gold: SpanSet,
                                 leaves: list[tuple[str, str]] | None = None,
                                 max_len: int = 300) -> tuple[Tree, float]:
    """Decode under s'(i,j,l) = s(i,j,l) + 1[(i,j,l) disagrees with gold].

    A span absent from gold implicitly carries the empty label, so predicting
    empty there costs nothing while every other label gains +1; at a gold
    span only the gold label escapes the +1. The returned score is the
    augmented total, i.e. s(tree) plus the accrued Hamming cost.
    """
    n = chart.n
    if gold.length != n:
        raise LengthMismatch(f"gold covers {gold.length} tokens, chart {n}")
    augmented = chart.scores + 1.0
    gold_map = gold.by_span()
    for (i, j), label in gold_map.items():
        idx = chart.label_index.get(label)
        if idx is None:
            raise UnknownLabel(f"gold label {label!r} not in chart vocabulary")
        augmented[i, j, idx] -= 1.0
    for i in range(n):
        for j in range(i + 1, n + 1):
            if (i, j) not in gold_map:
                augmented[i, j, 0] -= 1.0
    shadow = ScoreChart(n, chart.labels, augmented)
    return cky_decode_scored(shadow, leaves, max_len)
