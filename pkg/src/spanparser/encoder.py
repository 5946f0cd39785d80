"""Sentence encoder: embeddings, factored self-attention, boundary fenceposts.

A sentence of n words becomes n+2 token vectors (learned START/STOP sentinels
at the ends), runs through a stack of self-attention blocks, and is folded
into n+1 fencepost rows: fencepost k concatenates the forward half of token
k's output with the backward half of token k+1's output.

Token content comes from a learned word embedding (scratch mode), from
externally produced vectors passed through a learned projection
(static_vectors / context_vectors modes), or from their sum. Word order is
carried exclusively by the learned positional table, so zeroing that table
makes encoding order-blind. Attention is factored: each head computes
separate content-half and position-half query/key/value projections and adds
the two logit terms before a single softmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .vectors import ContextVectorRecord

UNK, START, STOP = 0, 1, 2
_SPECIALS = ["<unk>", "<start>", "<stop>"]


class EmptySentence(ValueError):
    pass


class MissingVectors(KeyError):
    def __init__(self, sentence_id: str):
        super().__init__(f"no external vectors for sentence {sentence_id!r}")
        self.sentence_id = sentence_id


@dataclass
class EncoderConfig:
    num_layers: int = 2
    d_model: int = 512
    num_heads: int = 8
    d_ff: int = 2048
    dropout: float = 0.1
    mode: str = "scratch"  # scratch | static_vectors | context_vectors
    d_ext: int | None = None
    max_len: int = 512
    lowercase: bool = False
    add_word_embeddings: bool = False  # in vector modes, also sum a learned embedding

    def __post_init__(self):
        if self.d_model % 2 != 0 or self.d_model <= 0:
            raise ValueError(f"d_model must be even and positive, got {self.d_model}")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.d_model % (2 * self.num_heads) != 0:
            raise ValueError(
                f"num_heads={self.num_heads} must divide d_model/2={self.d_model // 2}"
            )
        if self.mode not in ("scratch", "static_vectors", "context_vectors"):
            raise ValueError(f"unknown encoder mode {self.mode!r}")
        if self.mode != "scratch" and self.d_ext is None:
            raise ValueError(f"mode {self.mode!r} requires d_ext")

    @property
    def uses_external(self) -> bool:
        return self.mode != "scratch"


@dataclass
class Vocabulary:
    words: list[str]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {w: i + len(_SPECIALS) for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words) + len(_SPECIALS)

    def id(self, word: str, lowercase: bool = False) -> int:
        if lowercase:
            word = word.lower()
        return self.index.get(word, UNK)


def build_vocab(sentences, lowercase: bool = False) -> Vocabulary:
    seen = set()
    for words in sentences:
        for w in words:
            seen.add(w.lower() if lowercase else w)
    return Vocabulary(sorted(seen))


def toy_subword_tokenize(word: str) -> list[str]:
    """Greedy split into chunks of at most 4 characters; continuations get '##'."""
    assert word, "cannot tokenize an empty word"
    pieces = [word[i : i + 4] for i in range(0, len(word), 4)]
    return [pieces[0]] + ["##" + p for p in pieces[1:]]


def align_subwords(record: ContextVectorRecord, pick: str = "last") -> np.ndarray:
    """One row per word: the last (or first) subword vector of that word."""
    record.validate()
    ends = np.asarray(record.word_end_indices, dtype=np.int64)
    if pick == "last":
        idx = ends
    elif pick == "first":
        idx = np.concatenate([[0], ends[:-1] + 1])
    else:
        raise ValueError(f"pick must be 'first' or 'last', got {pick!r}")
    return record.subword_matrix[idx]


def align_last_subword(record: ContextVectorRecord) -> np.ndarray:
    return align_subwords(record, "last")


def project(external: Tensor, w_proj: Tensor) -> Tensor:
    """Right-multiply external vectors by the learned projection (no bias)."""
    return ad.matmul(external, w_proj)


def external_from_static(words, table: dict[str, np.ndarray], dim: int,
                         lowercase: bool = False) -> np.ndarray:
    """Stack static vectors for a sentence; unknown tokens map to zeros."""
    rows = np.zeros((len(words), dim))
    for i, w in enumerate(words):
        key = w.lower() if lowercase else w
        vec = table.get(key)
        if vec is not None:
            rows[i] = vec
    return rows


def init_encoder_params(config: EncoderConfig, vocab: Vocabulary,
                        rng: np.random.Generator) -> dict[str, Tensor]:
    """Deterministically initialize all encoder parameters, name -> Tensor."""
    d = config.d_model
    half = d // 2
    params: dict[str, Tensor] = {}

    def p(name, arr):
        params[name] = ad.parameter(arr)

    p("encoder.word_emb", rng.normal(0.0, 0.1, size=(len(vocab), d)))
    p("encoder.pos_emb", rng.normal(0.0, 0.1, size=(config.max_len, d)))
    if config.uses_external:
        p("encoder.proj", rng.normal(0.0, math.sqrt(1.0 / config.d_ext),
                                     size=(config.d_ext, d)))
    for i in range(config.num_layers):
        pre = f"encoder.layer{i}"
        for name in ("wq", "wk", "wv"):
            for part in ("c", "p"):
                p(f"{pre}.attn.{name}_{part}",
                  rng.normal(0.0, math.sqrt(1.0 / half), size=(half, half)))
        p(f"{pre}.attn.wo", rng.normal(0.0, math.sqrt(1.0 / d), size=(d, d)))
        p(f"{pre}.ln1.gain", np.ones(d))
        p(f"{pre}.ln1.bias", np.zeros(d))
        p(f"{pre}.ff.w1", rng.normal(0.0, math.sqrt(2.0 / d), size=(d, config.d_ff)))
        p(f"{pre}.ff.b1", np.zeros(config.d_ff))
        p(f"{pre}.ff.w2", rng.normal(0.0, math.sqrt(1.0 / config.d_ff),
                                     size=(config.d_ff, d)))
        p(f"{pre}.ff.b2", np.zeros(d))
        p(f"{pre}.ln2.gain", np.ones(d))
        p(f"{pre}.ln2.bias", np.zeros(d))
    return params


def _ln_affine(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    return ad.add(ad.mul(ad.layer_norm(x), gain), bias)


def _attention(x: Tensor, params: dict[str, Tensor], prefix: str,
               num_heads: int) -> Tensor:
    d = x.shape[-1]
    half = d // 2
    hw = half // num_heads  # per-head width within each half
    xc = ad.slice_last(x, 0, half)
    xp = ad.slice_last(x, half, d)
    qc = ad.matmul(xc, params[f"{prefix}.wq_c"])
    kc = ad.matmul(xc, params[f"{prefix}.wk_c"])
    vc = ad.matmul(xc, params[f"{prefix}.wv_c"])
    qp = ad.matmul(xp, params[f"{prefix}.wq_p"])
    kp = ad.matmul(xp, params[f"{prefix}.wk_p"])
    vp = ad.matmul(xp, params[f"{prefix}.wv_p"])
    inv = 1.0 / math.sqrt(2 * hw)
    heads = []
    for h in range(num_heads):
        s, e = h * hw, (h + 1) * hw
        logits = ad.scale(
            ad.add(
                ad.matmul(ad.slice_last(qc, s, e), ad.transpose(ad.slice_last(kc, s, e))),
                ad.matmul(ad.slice_last(qp, s, e), ad.transpose(ad.slice_last(kp, s, e))),
            ),
            inv,
        )
        probs = ad.softmax(logits)
        heads.append(ad.concat([
            ad.matmul(probs, ad.slice_last(vc, s, e)),
            ad.matmul(probs, ad.slice_last(vp, s, e)),
        ]))
    return ad.matmul(ad.concat(heads), params[f"{prefix}.wo"])


def encode(words: list[str], params: dict[str, Tensor], config: EncoderConfig,
           vocab: Vocabulary, external: np.ndarray | None = None,
           dropout_rng: np.random.Generator | None = None,
           sentence_id: str = "?") -> Tensor:
    """Encode one sentence into an (n+1, d_model) boundary representation."""
    n = len(words)
    if n == 0:
        raise EmptySentence("cannot encode an empty sentence")
    if n + 2 > config.max_len:
        raise ad.ShapeMismatch("pos_emb", n + 2, f"<= max_len {config.max_len}")
    d = config.d_model
    word_emb = params["encoder.word_emb"]

    if config.uses_external:
        if external is None:
            raise MissingVectors(sentence_id)
        ext = ad.tensor(external)
        if ext.shape != (n, config.d_ext):
            raise ad.ShapeMismatch("external", ext.shape, (n, config.d_ext))
        interior = project(ext, params["encoder.proj"])
        if config.add_word_embeddings:
            ids = [vocab.id(w, config.lowercase) for w in words]
            interior = ad.add(interior, ad.embedding_lookup(word_emb, ids))
        x = ad.vstack([
            ad.embedding_lookup(word_emb, [START]),
            interior,
            ad.embedding_lookup(word_emb, [STOP]),
        ])
    else:
        ids = [START] + [vocab.id(w, config.lowercase) for w in words] + [STOP]
        x = ad.embedding_lookup(word_emb, ids)

    x = ad.add(x, ad.embedding_lookup(params["encoder.pos_emb"], range(n + 2)))

    def drop(t: Tensor) -> Tensor:
        if dropout_rng is None or config.dropout <= 0.0:
            return t
        return ad.dropout(t, ad.make_dropout_mask(dropout_rng, t.shape, config.dropout))

    x = drop(x)
    for i in range(config.num_layers):
        pre = f"encoder.layer{i}"
        attn = drop(_attention(x, params, f"{pre}.attn", config.num_heads))
        x = _ln_affine(ad.add(x, attn), params[f"{pre}.ln1.gain"], params[f"{pre}.ln1.bias"])
        ff = ad.matmul(ad.relu(ad.add(ad.matmul(x, params[f"{pre}.ff.w1"]),
                                      params[f"{pre}.ff.b1"])),
                       params[f"{pre}.ff.w2"])
        ff = drop(ad.add(ff, params[f"{pre}.ff.b2"]))
        x = _ln_affine(ad.add(x, ff), params[f"{pre}.ln2.gain"], params[f"{pre}.ln2.bias"])

    half = d // 2
    fwd = ad.slice_last(ad.embedding_lookup(x, range(0, n + 1)), 0, half)
    bwd = ad.slice_last(ad.embedding_lookup(x, range(1, n + 2)), half, d)
    return ad.concat([fwd, bwd])
