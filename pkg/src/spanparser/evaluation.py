"""Labeled bracket scoring, paired bootstrap significance, relative error.

Scoring follows the evalb conventions: brackets are (start, end, label)
multisets read off the expanded trees, POS preterminals never count, and
whole-sentence brackets whose label is in the ignore set (TOP and friends)
are dropped. Corpus precision/recall/F1 come from summed counts, never from
averaged per-sentence scores.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .trees import Internal, Tree, Treebank, expand_unaries

DEFAULT_IGNORE = frozenset({"TOP", "ROOT", "VROOT", "S1"})


class SentenceCountMismatch(ValueError):
    pass


class TokenCountMismatch(ValueError):
    def __init__(self, sentence_id: str, got: int, expected: int):
        super().__init__(
            f"sentence {sentence_id!r}: {got} tokens predicted, {expected} in gold"
        )
        self.sentence_id = sentence_id


class DegenerateBase(ValueError):
    pass


@dataclass
class EvalReport:
    matched: int
    gold_count: int
    pred_count: int
    precision: float  # percent
    recall: float
    f1: float
    exact_match: float
    per_sentence: list[tuple[int, int, int]]  # (matched, gold, predicted)


@dataclass
class BootstrapResult:
    p_value: float
    resamples: int
    observed_delta: float


def bracket_multiset(tree: Tree, ignore_labels=DEFAULT_IGNORE) -> Counter:
    """Multiset of (start, end, label) brackets of the expanded tree."""
    tree = expand_unaries(tree)
    n = tree.end
    counts: Counter = Counter()

    def visit(node: Tree) -> None:
        if not isinstance(node, Internal):
            return
        if not (node.start == 0 and node.end == n and node.label in ignore_labels):
            counts[(node.start, node.end, node.label)] += 1
        for child in node.children:
            visit(child)

    visit(tree)
    return counts


def prf_from_counts(matched: int, gold: int, pred: int) -> tuple[float, float, float]:
    p = 100.0 * matched / pred if pred > 0 else 0.0
    r = 100.0 * matched / gold if gold > 0 else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def _tree_list(bank) -> list[tuple[str, Tree]]:
    if isinstance(bank, Treebank):
        return list(bank.entries)
    return [(str(i), t) for i, t in enumerate(bank)]


def labeled_prf(gold, pred, ignore_labels=DEFAULT_IGNORE) -> EvalReport:
    """PARSEVAL labeled precision/recall/F1 over aligned treebanks."""
    gold_entries = _tree_list(gold)
    pred_entries = _tree_list(pred)
    if len(gold_entries) != len(pred_entries):
        raise SentenceCountMismatch(
            f"{len(gold_entries)} gold sentences vs {len(pred_entries)} predicted"
        )
    per_sentence: list[tuple[int, int, int]] = []
    exact = 0
    for (sid, gtree), (_, ptree) in zip(gold_entries, pred_entries):
        g_tokens = len(gtree.leaves())
        p_tokens = len(ptree.leaves())
        if g_tokens != p_tokens:
            raise TokenCountMismatch(sid, p_tokens, g_tokens)
        gb = bracket_multiset(gtree, ignore_labels)
        pb = bracket_multiset(ptree, ignore_labels)
        m = sum((gb & pb).values())
        per_sentence.append((m, sum(gb.values()), sum(pb.values())))
        if gb == pb:
            exact += 1
    matched = sum(m for m, _, _ in per_sentence)
    gold_count = sum(g for _, g, _ in per_sentence)
    pred_count = sum(p for _, _, p in per_sentence)
    p, r, f1 = prf_from_counts(matched, gold_count, pred_count)
    exact_rate = 100.0 * exact / len(per_sentence) if per_sentence else 0.0
    return EvalReport(matched, gold_count, pred_count, p, r, f1, exact_rate, per_sentence)


def _resampled_delta(counts_a: np.ndarray, counts_b: np.ndarray,
                     idx: np.ndarray) -> float:
    ma, ga, pa = counts_a[idx].sum(axis=0)
    mb, gb, pb = counts_b[idx].sum(axis=0)
    return prf_from_counts(int(ma), int(ga), int(pa))[2] - \
        prf_from_counts(int(mb), int(gb), int(pb))[2]


def bootstrap_significance(gold, pred_a, pred_b, resamples: int = 10000,
                           seed: int = 0,
                           ignore_labels=DEFAULT_IGNORE) -> BootstrapResult:
    """Paired bootstrap shift test over sentences.

    p is the fraction of resamples where (delta* - delta) >= delta, ties
    counted as exceeding. Each resample derives its own rng from the seed, so
    the result does not depend on evaluation order.
    """
    assert resamples >= 1, "need at least one resample"
    report_a = labeled_prf(gold, pred_a, ignore_labels)
    report_b = labeled_prf(gold, pred_b, ignore_labels)
    counts_a = np.array(report_a.per_sentence, dtype=np.int64)
    counts_b = np.array(report_b.per_sentence, dtype=np.int64)
    delta = report_a.f1 - report_b.f1
    n = counts_a.shape[0]
    exceed = 0
    for r in range(resamples):
        rng = np.random.default_rng([seed, r])
        idx = rng.integers(0, n, size=n)
        if _resampled_delta(counts_a, counts_b, idx) - delta >= delta:
            exceed += 1
    return BootstrapResult(exceed / resamples, resamples, delta)


def relative_error_delta(f1_base: float, f1_new: float) -> float:
    """Percent change in error rate: ((100-new) - (100-base)) / (100-base) * 100."""
    if not 0.0 <= f1_base < 100.0:
        raise DegenerateBase(f"base F1 {f1_base} must lie in [0, 100)")
    if not 0.0 <= f1_new <= 100.0:
        raise ValueError(f"new F1 {f1_new} must lie in [0, 100]")
    return ((100.0 - f1_new) - (100.0 - f1_base)) / (100.0 - f1_base) * 100.0
