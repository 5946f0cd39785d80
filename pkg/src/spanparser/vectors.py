"""External word-vector ingestion: static text vectors and CTXV1 files.

Static vectors use the fastText text format: an optional ``COUNT DIM`` header
line, then one ``token v1 ... vD`` line per type. Contextual vectors use the
binary CTXV1 layout: magic ``CTXV1\\0``, u32 version, u32 d_ext, u32 record
count, then per record u16 id length, id bytes, u32 num_subwords, u32
num_words, u32 word_end_indices[num_words], float32 subword matrix, all
little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

CTXV1_MAGIC = b"CTXV1\x00"
CTXV1_VERSION = 1


class VectorFormatError(ValueError):
    pass


class AlignmentOutOfRange(ValueError):
    pass


class WordCountMismatch(ValueError):
    def __init__(self, sentence_id: str, got: int, expected: int):
        super().__init__(
            f"sentence {sentence_id!r}: record has {got} words, sentence has {expected}"
        )
        self.sentence_id = sentence_id


@dataclass
class ContextVectorRecord:
    """Per-sentence subword vectors plus word-final subword indices."""

    sentence_id: str
    subword_matrix: np.ndarray  # (num_subwords, d_ext)
    word_end_indices: np.ndarray  # (num_words,), strictly increasing

    def validate(self) -> None:
        ends = np.asarray(self.word_end_indices)
        num_subwords = self.subword_matrix.shape[0]
        if ends.size == 0:
            raise VectorFormatError(f"record {self.sentence_id!r}: no words")
        if (ends < 0).any() or (ends >= num_subwords).any():
            raise AlignmentOutOfRange(
                f"record {self.sentence_id!r}: word end index out of [0, {num_subwords})"
            )
        if (np.diff(ends) <= 0).any():
            raise VectorFormatError(
                f"record {self.sentence_id!r}: word_end_indices not strictly increasing"
            )
        if int(ends[-1]) != num_subwords - 1:
            raise VectorFormatError(
                f"record {self.sentence_id!r}: last word end {int(ends[-1])} != "
                f"num_subwords-1 ({num_subwords - 1})"
            )


def write_ctxv1(path: str, records: list[ContextVectorRecord], d_ext: int) -> None:
    with open(path, "wb") as fh:
        fh.write(CTXV1_MAGIC)
        fh.write(struct.pack("<III", CTXV1_VERSION, d_ext, len(records)))
        for rec in records:
            mat = np.ascontiguousarray(rec.subword_matrix, dtype="<f4")
            if mat.ndim != 2 or mat.shape[1] != d_ext:
                raise VectorFormatError(
                    f"record {rec.sentence_id!r}: matrix shape {mat.shape} != (*, {d_ext})"
                )
            ends = np.asarray(rec.word_end_indices, dtype="<u4")
            id_b = rec.sentence_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_b)))
            fh.write(id_b)
            fh.write(struct.pack("<II", mat.shape[0], ends.size))
            fh.write(ends.tobytes())
            fh.write(mat.tobytes())


def read_ctxv1(path: str) -> tuple[int, dict[str, ContextVectorRecord]]:
    """Read a CTXV1 file; returns (d_ext, records by sentence id) after validation."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CTXV1_MAGIC)] != CTXV1_MAGIC:
        raise VectorFormatError(f"{path}: bad magic, not a CTXV1 file")
    off = len(CTXV1_MAGIC)
    if off + 12 > len(blob):
        raise VectorFormatError(f"{path}: truncated header")
    version, d_ext, count = struct.unpack_from("<III", blob, off)
    off += 12
    if version != CTXV1_VERSION:
        raise VectorFormatError(f"{path}: unsupported version {version}")
    records: dict[str, ContextVectorRecord] = {}
    for _ in range(count):
        if off + 2 > len(blob):
            raise VectorFormatError(f"{path}: truncated record header")
        (id_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        sid = blob[off : off + id_len].decode("utf-8")
        off += id_len
        if off + 8 > len(blob):
            raise VectorFormatError(f"{path}: truncated record {sid!r}")
        num_subwords, num_words = struct.unpack_from("<II", blob, off)
        off += 8
        ends = np.frombuffer(blob, dtype="<u4", count=num_words, offset=off).astype(np.int64)
        off += 4 * num_words
        nfloats = num_subwords * d_ext
        if off + 4 * nfloats > len(blob):
            raise VectorFormatError(f"{path}: truncated payload in record {sid!r}")
        mat = (
            np.frombuffer(blob, dtype="<f4", count=nfloats, offset=off)
            .reshape(num_subwords, d_ext)
            .astype(np.float64)
        )
        off += 4 * nfloats
        rec = ContextVectorRecord(sid, mat, ends)
        rec.validate()
        if sid in records:
            raise VectorFormatError(f"{path}: duplicate sentence id {sid!r}")
        records[sid] = rec
    if off != len(blob):
        raise VectorFormatError(f"{path}: {len(blob) - off} trailing bytes")
    return d_ext, records


def validate_ctxv1(path: str) -> tuple[int, int]:
    """Full-file validation; returns (d_ext, record count)."""
    d_ext, records = read_ctxv1(path)
    return d_ext, len(records)


def load_static_vectors(path: str) -> tuple[int, dict[str, np.ndarray]]:
    """Read fastText-style text vectors; returns (dim, token -> vector)."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    continue
            token = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise VectorFormatError(f"{path}:{lineno}: bad float: {exc}") from exc
            if dim is None:
                dim = vec.size
            if vec.size != dim:
                raise VectorFormatError(
                    f"{path}:{lineno}: vector for {token!r} has {vec.size} dims, expected {dim}"
                )
            vectors[token] = vec
    if dim is None:
        raise VectorFormatError(f"{path}: no vectors found")
    return dim, vectors


def save_static_vectors(path: str, vectors: dict[str, np.ndarray], header: bool = True) -> None:
    dims = {v.size for v in vectors.values()}
    if len(dims) != 1:
        raise VectorFormatError(f"inconsistent vector dims: {sorted(dims)}")
    dim = dims.pop()
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(vectors)} {dim}\n")
        for token, vec in vectors.items():
            fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
