import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spanparser.trees import (
    EMPTY,
    EmptyNode,
    IllegalLabelCharacter,
    Internal,
    LabeledSpan,
    Leaf,
    MissingRootSpan,
    OverlappingSpans,
    SpanSet,
    UnbalancedBrackets,
    collapse_unaries,
    expand_unaries,
    parse_bracketed,
    serialize,
    spans_to_tree,
    tree_to_spans,
)


def reference_read(text):
    """Independent reader used as an oracle: tokenizes parens and recurses."""
    toks = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = [0]

    def helper(i):
        assert toks[i] == "("
        i += 1
        label = None
        if toks[i] not in "()":
            label = toks[i]
            i += 1
        children = []
        word = None
        while toks[i] != ")":
            if toks[i] == "(":
                child, i = helper(i)
                children.append(child)
            else:
                word = toks[i]
                i += 1
        i += 1
        if word is not None:
            leaf = Leaf(pos[0], word, label)
            pos[0] += 1
            return leaf, i
        return Internal(label if label is not None else "TOP", children), i

    trees = []
    i = 0
    while i < len(toks):
        pos[0] = 0
        tree, i = helper(i)
        trees.append(tree)
    return trees


def leaf_words(tree):
    return [leaf.word for leaf in tree.leaves()]


class TestParse:
    def test_simple_tree(self):
        (tree,) = parse_bracketed("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        assert isinstance(tree, Internal)
        assert tree.label == "S"
        assert leaf_words(tree) == ["the", "cat", "sat"]
        assert [leaf.position for leaf in tree.leaves()] == [0, 1, 2]

    def test_unbalanced(self):
        with pytest.raises(UnbalancedBrackets):
            parse_bracketed("(S (NP (NN a))")
        with pytest.raises(UnbalancedBrackets):
            parse_bracketed("(S (NP (NN a))))")

    def test_empty_node(self):
        with pytest.raises(EmptyNode):
            parse_bracketed("(S ())")
        with pytest.raises(EmptyNode):
            parse_bracketed("(S (NP))")

    def test_reserved_separator_rejected(self):
        with pytest.raises(IllegalLabelCharacter):
            parse_bracketed("(S::VP (NN x))")

    def test_unlabeled_wrapper_becomes_top(self):
        (tree,) = parse_bracketed("( (S (NP (NN x))))")
        assert tree.label == "TOP"
        assert tree.children[0].label == "S"

    def test_nested_unlabeled_rejected(self):
        with pytest.raises(EmptyNode):
            parse_bracketed("(S ( (NN x)))")

    def test_decorations_stripped(self):
        (tree,) = parse_bracketed("(S##mwh=yes## (NP##x## (NN##f## cat)) (VP (VBD sat)))")
        assert tree.label == "S"
        assert tree.children[0].label == "NP"
        assert tree.leaves()[0].pos_tag == "NN"

    def test_against_reference_reader(self, fixture_lines):
        for line in fixture_lines:
            (got,) = parse_bracketed(line)
            (want,) = reference_read(line)
            assert got == want

    def test_multiple_trees_per_call(self, fixture_lines):
        trees = parse_bracketed("\n".join(fixture_lines))
        assert len(trees) == len(fixture_lines)

    def test_error_reports_line(self):
        with pytest.raises(UnbalancedBrackets, match="line 2"):
            parse_bracketed("(S (NN a))\n(S (NP (NN b))")


class TestSerialize:
    def test_leaf_under_np(self):
        tree = Internal("NP", [Leaf(0, "cat", "NN")])
        assert serialize(tree) == "(NP (NN cat))"

    def test_round_trip_byte_identical(self, fixture_lines):
        for line in fixture_lines:
            (tree,) = parse_bracketed(line)
            normalized = " ".join(line.replace("(", " ( ").replace(")", " ) ").split())
            re_normalized = " ".join(
                serialize(tree).replace("(", " ( ").replace(")", " ) ").split()
            )
            assert normalized == re_normalized

    def test_round_trip_structural(self, fixture_trees):
        for tree in fixture_trees:
            (back,) = parse_bracketed(serialize(tree))
            assert back == tree

    def test_empty_label_refused(self):
        tree = Internal(EMPTY, [Leaf(0, "x", "NN")])
        with pytest.raises(ValueError):
            serialize(tree)

    def test_collapsed_tree_expands_before_serializing(self):
        for line in [
            "(S (VP (VB go)))",
            "(TOP (FRAG (INTJ (UH oh))))",
            "(TOP (S (NP (NN x)) (VP (VB y))))",
        ]:
            (tree,) = parse_bracketed(line)
            out = serialize(expand_unaries(collapse_unaries(tree)))
            assert "::" not in out
            (back,) = parse_bracketed(out)
            assert back == tree


class TestUnaries:
    def test_single_chain(self):
        (tree,) = parse_bracketed("(S (VP (VB go)))")
        collapsed = collapse_unaries(tree)
        assert collapsed.label == "S::VP"
        assert isinstance(collapsed.children[0], Leaf)

    def test_no_chain_unchanged(self):
        (tree,) = parse_bracketed("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        assert collapse_unaries(tree) == tree

    def test_three_deep_chain(self):
        # Brute-force chain walk: each node has one internal child until depth 3.
        (tree,) = parse_bracketed("(S (VP (NP (NN x))))")
        node, chain = tree, []
        while isinstance(node, Internal):
            chain.append(node.label)
            assert len(node.children) == 1
            node = node.children[0]
        assert chain == ["S", "VP", "NP"]
        collapsed = collapse_unaries(tree)
        assert collapsed.label == "::".join(chain)

    def test_expand_inverts_collapse(self, fixture_trees):
        for tree in fixture_trees:
            assert expand_unaries(collapse_unaries(tree)) == tree


class TestSpans:
    def test_example_spans(self):
        (tree,) = parse_bracketed("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        spans = tree_to_spans(collapse_unaries(tree))
        assert set(spans) == {
            LabeledSpan(0, 3, "S"),
            LabeledSpan(0, 2, "NP"),
            LabeledSpan(2, 3, "VP"),
        }
        assert spans.length == 3

    def test_single_word(self):
        (tree,) = parse_bracketed("(TOP (NN x))")
        spans = tree_to_spans(collapse_unaries(tree))
        assert set(spans) == {LabeledSpan(0, 1, "TOP")}

    def test_empty_spans_dropped_on_rebuild(self):
        spans = SpanSet(
            (
                LabeledSpan(0, 3, "S"),
                LabeledSpan(0, 2, EMPTY),
                LabeledSpan(2, 3, "VP"),
            ),
            3,
        )
        leaves = [("x0", "T0"), ("x1", "T1"), ("x2", "T2")]
        tree = spans_to_tree(spans, leaves)
        assert tree.label == "S"
        # x0 and x1 sit directly under S; only (2,3) gets a VP node.
        assert [type(c).__name__ for c in tree.children] == ["Leaf", "Leaf", "Internal"]
        assert tree.children[2].label == "VP"

    def test_rebuild_matches_enumeration_for_n3(self):
        # Oracle: enumerate every nested placement of an empty span over n=3
        # and confirm the rebuilt tree keeps exactly the non-empty brackets.
        leaves = [("a", "A"), ("b", "B"), ("c", "C")]
        for extra in [(0, 2), (1, 3)]:
            spans = SpanSet(
                (LabeledSpan(0, 3, "S"), LabeledSpan(*extra, EMPTY)), 3
            )
            tree = spans_to_tree(spans, leaves)
            got = tree_to_spans(tree)
            assert set(got) == {LabeledSpan(0, 3, "S")}

    def test_missing_root(self):
        with pytest.raises(MissingRootSpan):
            spans_to_tree(SpanSet((LabeledSpan(0, 1, "NP"),), 2), [("a", "A"), ("b", "B")])

    def test_overlapping(self):
        spans = SpanSet(
            (LabeledSpan(0, 3, "S"), LabeledSpan(0, 2, "A"), LabeledSpan(1, 3, "B")),
            3,
        )
        with pytest.raises(OverlappingSpans):
            spans_to_tree(spans, [("a", "A"), ("b", "B"), ("c", "C")])

    def test_round_trip_identity(self, fixture_trees):
        for tree in fixture_trees:
            collapsed = collapse_unaries(tree)
            leaves = [(leaf.word, leaf.pos_tag) for leaf in tree.leaves()]
            rebuilt = spans_to_tree(tree_to_spans(collapsed), leaves)
            assert expand_unaries(rebuilt) == tree

    def test_nestedness(self, fixture_trees):
        for tree in fixture_trees:
            spans = list(tree_to_spans(collapse_unaries(tree)))
            for a in spans:
                for b in spans:
                    assert not (a.start < b.start < a.end < b.end)


@st.composite
def random_trees(draw, max_leaves=6):
    """Random small trees with PTB-ish labels."""
    labels = st.sampled_from(["S", "NP", "VP", "PP", "ADJP", "X"])
    tags = st.sampled_from(["NN", "DT", "VB", "IN", "JJ"])
    words = st.sampled_from(["a", "b", "cat", "runs", "deep", "w"])
    n = draw(st.integers(1, max_leaves))
    counter = [0]

    def gen(budget, unary_depth=0):
        if budget == 1:
            leaf = Leaf(counter[0], draw(words), draw(tags))
            counter[0] += 1
            if draw(st.booleans()):
                return Internal(draw(labels), [leaf])
            return leaf
        k = draw(st.integers(1 if unary_depth < 2 else 2, min(3, budget)))
        if k == 1:
            return Internal(draw(labels), [gen(budget, unary_depth + 1)])
        cuts = sorted(draw(st.lists(st.integers(1, budget - 1), min_size=k - 1,
                                    max_size=k - 1, unique=True)))
        sizes = []
        prev = 0
        for c in cuts + [budget]:
            sizes.append(c - prev)
            prev = c
        return Internal(draw(labels), [gen(s) for s in sizes])

    tree = gen(n)
    if isinstance(tree, Leaf):
        tree = Internal("TOP", [tree])
    return tree


@settings(max_examples=60, deadline=None)
@given(random_trees())
def test_property_full_round_trip(tree):
    collapsed = collapse_unaries(tree)
    leaves = [(leaf.word, leaf.pos_tag) for leaf in tree.leaves()]
    rebuilt = spans_to_tree(tree_to_spans(collapsed), leaves)
    assert expand_unaries(rebuilt) == tree
    (reparsed,) = parse_bracketed(serialize(tree))
    assert reparsed == tree
