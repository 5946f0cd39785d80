"""Bracketed constituency trees and their labeled-span form.

Trees come in the usual nested shape: internal nodes carry a phrasal label,
leaves carry a token position, the word, and its POS tag. For chart scoring a
tree is flattened into a set of labeled spans over fencepost positions. So
that every span carries exactly one label, single-child chains of internal
nodes are first collapsed into composite labels joined with ``::``. The
reserved empty label (:data:`EMPTY`) marks spans introduced by binarization;
it is representable inside a :class:`SpanSet` but never serialized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

EMPTY = ""  # reserved non-constituent label, never serialized
UNARY_JOIN = "::"

_DECORATION_RE = re.compile(r"##.*$")


class TreebankError(ValueError):
    """Base class for malformed treebank input."""


class UnbalancedBrackets(TreebankError):
    pass


class EmptyNode(TreebankError):
    pass


class IllegalLabelCharacter(TreebankError):
    pass


class OverlappingSpans(TreebankError):
    pass


class MissingRootSpan(TreebankError):
    pass


class Tree:
    """Base class; a tree is either an :class:`Internal` node or a :class:`Leaf`."""

    __slots__ = ()

    def leaves(self) -> list["Leaf"]:
        raise NotImplementedError

    @property
    def start(self) -> int:
        raise NotImplementedError

    @property
    def end(self) -> int:
        raise NotImplementedError


class Internal(Tree):
    __slots__ = ("label", "children")

    def __init__(self, label: str, children: Iterable[Tree]):
        children = tuple(children)
        assert children, "internal node needs at least one child"
        self.label = label
        self.children = children

    def leaves(self) -> list["Leaf"]:
        return [leaf for child in self.children for leaf in child.leaves()]

    @property
    def start(self) -> int:
        return self.children[0].start

    @property
    def end(self) -> int:
        return self.children[-1].end

    def __eq__(self, other):
        return (
            isinstance(other, Internal)
            and self.label == other.label
            and self.children == other.children
        )

    def __hash__(self):
        return hash((self.label, self.children))

    def __repr__(self):
        return f"Internal({self.label!r}, {list(self.children)!r})"


class Leaf(Tree):
    __slots__ = ("position", "word", "pos_tag")

    def __init__(self, position: int, word: str, pos_tag: str):
        self.position = position
        self.word = word
        self.pos_tag = pos_tag

    def leaves(self) -> list["Leaf"]:
        return [self]

    @property
    def start(self) -> int:
        return self.position

    @property
    def end(self) -> int:
        return self.position + 1

    def __eq__(self, other):
        return (
            isinstance(other, Leaf)
            and self.position == other.position
            and self.word == other.word
            and self.pos_tag == other.pos_tag
        )

    def __hash__(self):
        return hash((self.position, self.word, self.pos_tag))

    def __repr__(self):
        return f"Leaf({self.position}, {self.word!r}, {self.pos_tag!r})"


class LabeledSpan(NamedTuple):
    start: int
    end: int
    label: str


@dataclass(frozen=True)
class SpanSet:
    """Multiset of labeled spans plus the token count they live over."""

    spans: tuple[LabeledSpan, ...]
    length: int

    def __iter__(self) -> Iterator[LabeledSpan]:
        return iter(self.spans)

    def __len__(self) -> int:
        return len(self.spans)

    def by_span(self) -> dict[tuple[int, int], str]:
        """Map (start, end) -> label, keeping only non-empty labels."""
        out: dict[tuple[int, int], str] = {}
        for s in self.spans:
            if s.label != EMPTY:
                out[(s.start, s.end)] = s.label
        return out


@dataclass
class Treebank:
    language: str
    entries: list[tuple[str, Tree]]

    def __post_init__(self):
        ids = [sid for sid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise TreebankError(f"duplicate sentence ids in treebank {self.language!r}")

    def trees(self) -> list[Tree]:
        return [t for _, t in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def _tokenize(text: str) -> list[tuple[str, int]]:
    """Split bracket text into ``(``, ``)``, and atom tokens with line numbers."""
    tokens: list[tuple[str, int]] = []
    line = 1
    atom_start = -1
    for i, ch in enumerate(text + " "):
        if ch in "()" or ch.isspace():
            if atom_start >= 0:
                tokens.append((text[atom_start:i], line))
                atom_start = -1
            if ch in "()":
                tokens.append((ch, line))
            if ch == "\n":
                line += 1
        elif atom_start < 0:
            atom_start = i
    return tokens


def _clean_label(raw: str, line: int, strip_decorations: bool) -> str:
    if UNARY_JOIN in raw:
        raise IllegalLabelCharacter(
            f"line {line}: label {raw!r} contains reserved separator {UNARY_JOIN!r}"
        )
    label = _DECORATION_RE.sub("", raw) if strip_decorations else raw
    if not label:
        raise IllegalLabelCharacter(f"line {line}: label {raw!r} is empty after cleanup")
    return label


def parse_bracketed(text: str, strip_decorations: bool = True) -> list[Tree]:
    """Read a sequence of bracketed trees from ``text``.

    Trees may be separated by newlines or any whitespace. Leaf positions are
    assigned left to right per tree. A top-level unlabeled wrapper
    ``( ... )`` is normalized to the label ``TOP``. SPMRL-style ``##...##``
    morphological decorations are stripped from labels and tags unless
    ``strip_decorations`` is false.
    """
    tokens = _tokenize(text)
    trees: list[Tree] = []
    pos = 0

    def parse_node(index: int, counter: list[int], depth: int) -> tuple[Tree, int]:
        tok, line = tokens[index]
        assert tok == "("
        index += 1
        if index >= len(tokens):
            raise UnbalancedBrackets(f"line {line}: unexpected end of input")
        tok, lline = tokens[index]
        if tok == "(":
            # Unlabeled node: legal only as the whole-tree wrapper.
            if depth > 0:
                raise EmptyNode(f"line {lline}: unlabeled node below the root")
            label = "TOP"
        elif tok == ")":
            raise EmptyNode(f"line {lline}: node with no label or children")
        else:
            label = _clean_label(tok, lline, strip_decorations)
            index += 1
        children: list[Tree] = []
        word: str | None = None
        while index < len(tokens) and tokens[index][0] != ")":
            tok, tline = tokens[index]
            if tok == "(":
                if word is not None:
                    raise EmptyNode(
                        f"line {tline}: node mixes a terminal word with subtrees"
                    )
                child, index = parse_node(index, counter, depth + 1)
                children.append(child)
            else:
                if children or word is not None:
                    raise EmptyNode(
                        f"line {tline}: more than one terminal under a preterminal"
                    )
                word = tok
                index += 1
        if index >= len(tokens):
            raise UnbalancedBrackets(f"line {line}: missing closing bracket")
        index += 1  # consume ")"
        if word is not None:
            leaf = Leaf(counter[0], word, label)
            counter[0] += 1
            return leaf, index
        if not children:
            raise EmptyNode(f"line {line}: node {label!r} has no children")
        return Internal(label, children), index

    while pos < len(tokens):
        tok, line = tokens[pos]
        if tok == ")":
            raise UnbalancedBrackets(f"line {line}: unmatched closing bracket")
        if tok != "(":
            raise UnbalancedBrackets(f"line {line}: expected '(' but found {tok!r}")
        counter = [0]
        tree, pos = parse_node(pos, counter, 0)
        if isinstance(tree, Leaf):
            raise EmptyNode(f"line {line}: a bare preterminal is not a tree")
        trees.append(tree)
    return trees


def serialize(tree: Tree) -> str:
    """Render a tree as a single-line bracket string."""
    if isinstance(tree, Leaf):
        return f"({tree.pos_tag} {tree.word})"
    if tree.label == EMPTY:
        raise ValueError("the empty label cannot be serialized")
    inner = " ".join(serialize(child) for child in tree.children)
    return f"({tree.label} {inner})"


def collapse_unaries(tree: Tree) -> Tree:
    """Merge single-child chains of internal nodes into ``::``-joined labels."""
    if isinstance(tree, Leaf):
        return tree
    labels = [tree.label]
    node = tree
    while len(node.children) == 1 and isinstance(node.children[0], Internal):
        node = node.children[0]
        labels.append(node.label)
    children = [collapse_unaries(child) for child in node.children]
    return Internal(UNARY_JOIN.join(labels), children)


def expand_unaries(tree: Tree) -> Tree:
    """Invert :func:`collapse_unaries` exactly."""
    if isinstance(tree, Leaf):
        return tree
    children = [expand_unaries(child) for child in tree.children]
    node: Tree | None = None
    for label in reversed(tree.label.split(UNARY_JOIN)):
        node = Internal(label, children)
        children = [node]
    assert node is not None
    return node


def tree_to_spans(tree: Tree) -> SpanSet:
    """One labeled span per internal node; POS preterminals are leaves and excluded.

    Call on a collapsed tree to get at most one span per (start, end).
    """
    spans: list[LabeledSpan] = []

    def visit(node: Tree) -> None:
        if isinstance(node, Leaf):
            return
        spans.append(LabeledSpan(node.start, node.end, node.label))
        for child in node.children:
            visit(child)

    visit(tree)
    return SpanSet(tuple(spans), len(tree.leaves()))


def _check_nested(spans: list[LabeledSpan]) -> None:
    for a in spans:
        for b in spans:
            if a.start < b.start < a.end < b.end:
                raise OverlappingSpans(f"spans {a} and {b} cross")


def spans_to_tree(spans: SpanSet, leaves: list[tuple[str, str]]) -> Tree:
    """Rebuild the collapsed tree from a nested span set.

    ``leaves`` supplies (word, pos_tag) pairs for positions 0..n-1. Spans
    labeled :data:`EMPTY` are dropped. The root span (0, n) must be present
    with a non-empty label.
    """
    n = len(leaves)
    real = [s for s in spans if s.label != EMPTY]
    for s in real:
        if not (0 <= s.start < s.end <= n):
            raise OverlappingSpans(f"span {s} out of bounds for length {n}")
    seen: set[tuple[int, int]] = set()
    for s in real:
        if (s.start, s.end) in seen:
            raise OverlappingSpans(f"two non-empty labels on span ({s.start}, {s.end})")
        seen.add((s.start, s.end))
    _check_nested(real)
    if (0, n) not in seen:
        raise MissingRootSpan(f"no labeled span covering (0, {n})")
    # Widest-first within each start position so a parent precedes its children.
    order = sorted(real, key=lambda s: (s.start, -s.end))

    def build(idx: int) -> tuple[Tree, int, int]:
        span = order[idx]
        idx += 1
        children: list[Tree] = []
        pos = span.start
        while pos < span.end:
            if idx < len(order) and order[idx].start == pos and order[idx].end <= span.end:
                child, idx, pos = build(idx)
                children.append(child)
            else:
                word, tag = leaves[pos]
                children.append(Leaf(pos, word, tag))
                pos += 1
        return Internal(span.label, children), idx, pos

    root, idx, _ = build(0)
    assert idx == len(order)
    return root


def load_treebank(path: str, language: str = "xx") -> Treebank:
    """Read a bracketed treebank file; sentence ids are 0-based line indices."""
    with open(path, encoding="utf-8") as fh:
        trees = parse_bracketed(fh.read())
    return Treebank(language, [(str(i), t) for i, t in enumerate(trees)])


def save_treebank(path: str, trees: Iterable[Tree]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tree in trees:
            fh.write(serialize(tree) + "\n")
