"""Export jobs: sentences file in, CTXV1 (or static text vectors) out.

The input is a TSV with one sentence per line: ``id<TAB>token token ...``.
For each sentence every word is subword-tokenized, the index of each word's
final piece is recorded, and the whole piece sequence is encoded in context;
the consumer applies its own word alignment rule to the shipped indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import (ModelLoadError, WordHasNoPieces,  # noqa: F401 (re-export)
                       resolve_backend)
from .ctxv import Record, write_ctxv1, write_static_text


class TokenizationMismatch(ValueError):
    def __init__(self, sentence_id: str, word: str):
        super().__init__(
            f"sentence {sentence_id!r}: word {word!r} produced no subword pieces"
        )
        self.sentence_id = sentence_id


class InputFormatError(ValueError):
    pass


@dataclass
class ExportJob:
    model_id: str
    input_path: str
    output_path: str
    layer: int | str = "last"


def read_sentences(path: str) -> list[tuple[str, list[str]]]:
    sentences = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise InputFormatError(f"{path}:{lineno}: expected id<TAB>tokens")
            sid, rest = line.split("\t", 1)
            tokens = rest.split()
            if not tokens:
                raise InputFormatError(f"{path}:{lineno}: sentence {sid!r} is empty")
            if sid in seen:
                raise InputFormatError(f"{path}:{lineno}: duplicate id {sid!r}")
            seen.add(sid)
            sentences.append((sid, tokens))
    return sentences


def _encode_sentence(backend, sid: str, words: list[str], layer) -> Record:
    try:
        matrix, word_ends = backend.encode_sentence(words, layer)
    except WordHasNoPieces as exc:
        raise TokenizationMismatch(sid, exc.word) from exc
    return Record(sid, matrix, np.asarray(word_ends, dtype=np.int64))


def export_context_vectors(job: ExportJob, backend=None) -> int:
    """Write one CTXV1 record per input sentence; returns the record count."""
    if backend is None:
        backend = resolve_backend(job.model_id)
    sentences = read_sentences(job.input_path)
    records = [_encode_sentence(backend, sid, words, job.layer)
               for sid, words in sentences]
    write_ctxv1(job.output_path, records, backend.d_ext)
    return len(records)


def export_static_vectors(job: ExportJob, backend=None) -> int:
    """One vector per unique token: its last-subword vector encoded alone."""
    if backend is None:
        backend = resolve_backend(job.model_id)
    sentences = read_sentences(job.input_path)
    tokens = sorted({w for _, words in sentences for w in words})
    vectors = {}
    for token in tokens:
        rec = _encode_sentence(backend, token, [token], job.layer)
        vectors[token] = rec.subword_matrix[int(rec.word_end_indices[-1])]
    write_static_text(job.output_path, vectors)
    return len(vectors)
