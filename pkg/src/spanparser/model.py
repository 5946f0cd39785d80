"""Model assembly: one shared encoder plus one span-classifier head per language.

Checkpoints use the SPCK1 container; metadata carries the encoder
configuration, the word vocabulary, and each language's label inventory, so a
checkpoint is self-describing for parsing and ensembling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .decoder import cky_decode
from .encoder import EncoderConfig, Vocabulary, encode
from .scorer import LanguageHead, ScoreChart, score_chart
from .trees import Tree, expand_unaries


@dataclass
class Model:
    config: EncoderConfig
    d_hidden: int
    vocab: Vocabulary
    encoder_params: dict[str, Tensor]
    heads: dict[str, LanguageHead]

    def all_params(self) -> dict[str, Tensor]:
        params = dict(self.encoder_params)
        for head in self.heads.values():
            params.update(head.params())
        return params

    def param_count(self) -> int:
        return sum(t.data.size for t in self.all_params().values())

    def head_share(self, lang: str) -> float:
        """Fraction of total parameters belonging to one language's head."""
        return self.heads[lang].param_count / self.param_count()


def save_model(path: str, model: Model, extra_metadata: dict | None = None) -> None:
    cfg = model.config
    metadata = {
        "format": "spanparser-model",
        "encoder": {
            "num_layers": cfg.num_layers,
            "d_model": cfg.d_model,
            "num_heads": cfg.num_heads,
            "d_ff": cfg.d_ff,
            "dropout": cfg.dropout,
            "mode": cfg.mode,
            "d_ext": cfg.d_ext,
            "max_len": cfg.max_len,
            "lowercase": cfg.lowercase,
            "add_word_embeddings": cfg.add_word_embeddings,
        },
        "d_hidden": model.d_hidden,
        "vocab": model.vocab.words,
        "languages": sorted(model.heads),
        "labels": {code: head.labels for code, head in sorted(model.heads.items())},
        "head_params": {code: head.param_count
                        for code, head in sorted(model.heads.items())},
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    tensors = {name: t.data for name, t in sorted(model.all_params().items())}
    save_checkpoint(path, metadata, tensors)


def load_model(path: str) -> Model:
    metadata, tensors = load_checkpoint(path)
    if metadata.get("format") != "spanparser-model":
        raise CheckpointError(f"{path}: not a parser checkpoint")
    config = EncoderConfig(**metadata["encoder"])
    vocab = Vocabulary(metadata["vocab"])
    params = {name: ad.parameter(arr.astype(np.float64)) for name, arr in tensors.items()}
    encoder_params = {n: t for n, t in params.items() if n.startswith("encoder.")}
    heads = {}
    for code in metadata["languages"]:
        pre = f"head.{code}"
        heads[code] = LanguageHead(
            code,
            metadata["labels"][code],
            w1=params[f"{pre}.w1"],
            b1=params[f"{pre}.b1"],
            w2=params[f"{pre}.w2"],
            b2=params[f"{pre}.b2"],
        )
    return Model(config, metadata["d_hidden"], vocab, encoder_params, heads)


def chart_for(model: Model, lang: str, words: list[str],
              external: np.ndarray | None = None,
              dropout_rng: np.random.Generator | None = None,
              sentence_id: str = "?") -> ScoreChart:
    if lang not in model.heads:
        raise KeyError(f"checkpoint has no head for language {lang!r}")
    boundary = encode(words, model.encoder_params, model.config, model.vocab,
                      external=external, dropout_rng=dropout_rng,
                      sentence_id=sentence_id)
    return score_chart(boundary, model.heads[lang])


def parse_tokens(model: Model, lang: str, words: list[str],
                 external: np.ndarray | None = None, max_len: int = 300,
                 pos_tags: list[str] | None = None,
                 sentence_id: str = "?") -> Tree:
    """Parse one tokenized sentence into an expanded tree."""
    chart = chart_for(model, lang, words, external, sentence_id=sentence_id)
    leaves = list(zip(words, pos_tags)) if pos_tags else [(w, "XX") for w in words]
    return expand_unaries(cky_decode(chart, leaves, max_len=max_len))
