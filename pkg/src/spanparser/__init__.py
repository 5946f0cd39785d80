"""Span-based neural constituency parsing toolkit."""

__version__ = "0.1.0"

from .trees import (  # noqa: F401
    EMPTY,
    Internal,
    LabeledSpan,
    Leaf,
    SpanSet,
    Tree,
    Treebank,
    collapse_unaries,
    expand_unaries,
    parse_bracketed,
    serialize,
    spans_to_tree,
    tree_to_spans,
)
