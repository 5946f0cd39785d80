import os

import pytest

from spanparser.trees import parse_bracketed

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
FIXTURES = os.path.join(DATA_DIR, "fixtures.mrg")

# Ten hand-written sentences used by the overfitting checks.
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


@pytest.fixture(scope="session")
def fixtures_path():
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_lines():
    with open(FIXTURES, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


@pytest.fixture(scope="session")
def fixture_trees(fixture_lines):
    return parse_bracketed("\n".join(fixture_lines))


@pytest.fixture()
def toy_treebank_path(tmp_path):
    path = tmp_path / "toy.mrg"
    path.write_text(TOY_TREEBANK, encoding="utf-8")
    return str(path)
