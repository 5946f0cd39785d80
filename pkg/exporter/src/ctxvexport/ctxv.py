"""Writers for the CTXV1 binary layout and the static text vector format.

CTXV1: magic ``CTXV1\\0``, u32 version (=1), u32 d_ext, u32 record count,
then per record: u16 id length, id bytes, u32 num_subwords, u32 num_words,
u32 word_end_indices[num_words], float32 subword_matrix[num_subwords x d_ext],
all little-endian. The consumer validates magic, counts, strictly increasing
word-end indices, and payload length, so everything written here must satisfy
those invariants up front.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CTXV1\x00"
VERSION = 1


@dataclass
class Record:
    sentence_id: str
    subword_matrix: np.ndarray  # (num_subwords, d_ext)
    word_end_indices: np.ndarray  # (num_words,)

    def check(self) -> None:
        ends = np.asarray(self.word_end_indices)
        n_sub = self.subword_matrix.shape[0]
        assert ends.size > 0, f"{self.sentence_id}: empty record"
        assert (np.diff(ends) > 0).all(), f"{self.sentence_id}: ends not increasing"
        assert 0 <= ends[0] and ends[-1] == n_sub - 1, \
            f"{self.sentence_id}: ends misaligned with matrix"


def write_ctxv1(path: str, records: list[Record], d_ext: int) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, d_ext, len(records)))
        for rec in records:
            rec.check()
            mat = np.ascontiguousarray(rec.subword_matrix, dtype="<f4")
            assert mat.shape[1] == d_ext
            ends = np.asarray(rec.word_end_indices, dtype="<u4")
            id_b = rec.sentence_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_b)))
            fh.write(id_b)
            fh.write(struct.pack("<II", mat.shape[0], ends.size))
            fh.write(ends.tobytes())
            fh.write(mat.tobytes())


def write_static_text(path: str, vectors: dict[str, np.ndarray]) -> None:
    """fastText-style text format with a leading ``COUNT DIM`` header."""
    dims = {v.size for v in vectors.values()}
    assert len(dims) == 1, f"inconsistent dims: {dims}"
    dim = dims.pop()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for token, vec in vectors.items():
            fh.write(token + " " + " ".join(f"{float(x):.6f}" for x in vec) + "\n")
