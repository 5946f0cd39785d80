"""Encoder backends behind one small interface.

A backend encodes one pre-tokenized sentence into a matrix with one row per
subword piece (sentinel tokens excluded) plus the index of each word's final
piece. Two backends ship:

- ``hash:<d_ext>[:<seed>]`` -- fully offline and deterministic: greedy 4-char
  pieces get hash-seeded embeddings followed by fixed neighbor-mixing rounds,
  so a piece's vector depends on its sentence context. Useful for tests and
  for exercising consumers without model downloads.
- any other identifier is treated as a HuggingFace model name or local path
  and loaded with transformers (requires the ``hf`` extra). Word alignment
  comes from the fast tokenizer's word_ids mapping; the layer selector picks
  a hidden state (``last`` or an integer index, 0 = embedding layer).
"""

from __future__ import annotations

import hashlib

import numpy as np


class ModelLoadError(RuntimeError):
    pass


class WordHasNoPieces(ValueError):
    """A word vanished under subword tokenization."""

    def __init__(self, word: str):
        super().__init__(f"word {word!r} produced no subword pieces")
        self.word = word


class HashBackend:
    """Deterministic stand-in encoder: hashed piece embeddings + mixing."""

    ROUNDS = 3

    def __init__(self, d_ext: int, seed: int = 0):
        self.d_ext = d_ext
        self.seed = seed
        rng = np.random.default_rng([seed, 0xC0FFEE])
        scale = 1.0 / np.sqrt(d_ext)
        self.w_self = rng.normal(0.0, scale, size=(d_ext, d_ext))
        self.w_neigh = rng.normal(0.0, scale, size=(d_ext, d_ext))
        self.bias = rng.normal(0.0, 0.1, size=d_ext)

    def num_layers(self) -> int:
        return self.ROUNDS

    def tokenize_word(self, word: str) -> list[str]:
        pieces = [word[i : i + 4] for i in range(0, len(word), 4)]
        return [pieces[0]] + ["##" + p for p in pieces[1:]] if pieces else []

    def _piece_embedding(self, piece: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{piece}".encode("utf-8")).digest()
        rng = np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))
        return rng.normal(0.0, 1.0, size=self.d_ext)

    def encode_sentence(self, words: list[str],
                        layer: int | str = "last") -> tuple[np.ndarray, np.ndarray]:
        pieces: list[str] = []
        ends: list[int] = []
        for word in words:
            word_pieces = self.tokenize_word(word)
            if not word_pieces:
                raise WordHasNoPieces(word)
            pieces.extend(word_pieces)
            ends.append(len(pieces) - 1)
        x = np.stack([self._piece_embedding(p) for p in pieces])
        rounds = self.ROUNDS if layer == "last" else int(layer)
        if not 0 <= rounds <= self.ROUNDS:
            raise ValueError(f"hash backend has layers 0..{self.ROUNDS}, got {layer}")
        for _ in range(rounds):
            left = np.vstack([x[:1], x[:-1]])
            right = np.vstack([x[1:], x[-1:]])
            x = np.tanh(x @ self.w_self + ((left + right) / 2.0) @ self.w_neigh
                        + self.bias)
        return x, np.array(ends, dtype=np.int64)


class TransformersBackend:
    """Wraps an off-the-shelf pre-trained encoder via the transformers API."""

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ModelLoadError(f"transformers backend unavailable: {exc}") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id,
                                                   output_hidden_states=True)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.eval()
        self._torch = torch
        self.d_ext = int(self.model.config.hidden_size)

    def num_layers(self) -> int:
        return int(self.model.config.num_hidden_layers)

    def encode_sentence(self, words: list[str],
                        layer: int | str = "last") -> tuple[np.ndarray, np.ndarray]:
        enc = self.tokenizer([words], is_split_into_words=True,
                             return_tensors="pt")
        word_ids = enc.word_ids(0)
        positions = [k for k, w in enumerate(word_ids) if w is not None]
        if not positions:
            raise WordHasNoPieces(words[0])
        ends: list[int] = [-1] * len(words)
        for row, pos in enumerate(positions):
            ends[word_ids[pos]] = row
        for w, end in enumerate(ends):
            if end < 0:
                raise WordHasNoPieces(words[w])
        with self._torch.no_grad():
            out = self.model(**enc)
        states = out.hidden_states
        idx = len(states) - 1 if layer == "last" else int(layer)
        if not 0 <= idx < len(states):
            raise ValueError(f"layer {layer} out of range 0..{len(states) - 1}")
        hidden = states[idx][0].numpy().astype(np.float64)
        return hidden[positions], np.array(ends, dtype=np.int64)


def resolve_backend(model_id: str):
    """``hash:<d_ext>[:<seed>]`` or a transformers model id / local path."""
    if model_id.startswith("hash:"):
        parts = model_id.split(":")
        try:
            d_ext = int(parts[1])
            seed = int(parts[2]) if len(parts) > 2 else 0
        except (IndexError, ValueError) as exc:
            raise ModelLoadError(
                f"bad hash backend spec {model_id!r}, want hash:<d_ext>[:<seed>]"
            ) from exc
        return HashBackend(d_ext, seed)
    return TransformersBackend(model_id)
