import re
import subprocess
import sys

import pytest

# Same ten sentences the parser uses for its overfitting checks.
TOY_TREEBANK = """\
(TOP (S (NP (DT the) (NN cat)) (VP (VBD sat))))
(TOP (S (NP (DT the) (NN dog)) (VP (VBD ran))))
(TOP (S (NP (DT a) (NN bird)) (VP (VBD flew) (ADVP (RB away)))))
(TOP (S (NP (PRP she)) (VP (VBZ sees) (NP (DT a) (NN fish)))))
(TOP (S (NP (PRP he)) (VP (VBZ likes) (NP (JJ green) (NNS apples)))))
(TOP (S (NP (DT the) (JJ old) (NN man)) (VP (VBD slept))))
(TOP (S (NP (NNS birds)) (VP (VBP sing))))
(TOP (S (NP (DT the) (NN cat)) (VP (VBD saw) (NP (DT the) (NN dog)))))
(TOP (S (NP (PRP they)) (VP (VBP run) (PP (IN to) (NP (DT the) (NN park))))))
(TOP (S (NP (DT a) (NN child)) (VP (VBZ reads) (NP (DT a) (NN book)))))
"""

LEAF_RE = re.compile(r"\(([^()\s]+) ([^()\s]+)\)")


def treebank_tokens(text):
    """Leaf words per line, without importing the parser package."""
    return [[m.group(2) for m in LEAF_RE.finditer(line)]
            for line in text.strip().split("\n")]


def run_primary_cli(args):
    """Invoke the consumer through its public command line."""
    return subprocess.run([sys.executable, "-m", "spanparser.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture()
def toy_sentences_tsv(tmp_path):
    path = tmp_path / "toy.tsv"
    lines = [f"{i}\t{' '.join(tokens)}"
             for i, tokens in enumerate(treebank_tokens(TOY_TREEBANK))]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture()
def toy_treebank_file(tmp_path):
    path = tmp_path / "toy.mrg"
    path.write_text(TOY_TREEBANK, encoding="utf-8")
    return str(path)
