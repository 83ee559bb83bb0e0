"""Embedding ingestion, validation, and id-indexed storage.

A store holds embedded instructions: a stable unsigned 64-bit id, a short
domain label, a fixed-dimension float32 vector (unit L2 norm after
ingestion), and an optional text payload that is carried through but never
interpreted. Stores are immutable once constructed and safe to share across
threads.

Two interchange formats are supported:

* JSONL, one object per line:
  ``{"id": u64, "domain": str, "embedding": [f32...], "text": optional str}``
* A little-endian binary format: magic ``FDCA``, version u32 (= 1), dim u32,
  count u64, then per record ``id u64, domain-length u16, domain bytes,
  dim x f32``. Text is not carried by the binary format.

Binary round-trips are bit-exact; JSONL round-trips preserve embeddings to
within one float32 ULP (re-ingestion re-normalizes an already unit vector).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

MAGIC = b"FDCA"
FORMAT_VERSION = 1
NORM_TOLERANCE = 1e-5

_HEADER = struct.Struct("<4sII")
_COUNT = struct.Struct("<Q")
_REC_FIXED = struct.Struct("<QH")


@dataclass(frozen=True)
class InstructionRecord:
    """One embedded instruction."""

    id: int
    domain: str
    embedding: np.ndarray  # (dim,) float32, unit L2 norm
    text: str | None = None


class EmbeddingStore:
    """Immutable, id-indexed collection of embedded instructions.

    Records are kept sorted by id ascending. Vectors are stored as one
    float32 matrix; a float64 copy for exact similarity math is built lazily
    and cached.
    """

    def __init__(
        self,
        dim: int,
        ids: Sequence[int] | np.ndarray,
        domains: Sequence[str],
        vectors: np.ndarray,
        texts: Sequence[str | None] | None = None,
    ):
        if dim < 1:
            raise ValidationError(f"dimension must be >= 1, got {dim}")
        ids_arr = np.asarray(ids, dtype=np.uint64)
        vec = np.asarray(vectors, dtype=np.float32)
        if vec.ndim != 2 or vec.shape[1] != dim:
            raise ValidationError(
                f"vectors must have shape (n, {dim}), got {vec.shape}"
            )
        n = len(ids_arr)
        if vec.shape[0] != n or len(domains) != n:
            raise ValidationError("ids, domains, and vectors must have equal length")
        if texts is not None and len(texts) != n:
            raise ValidationError("texts length must match record count")

        order = np.argsort(ids_arr, kind="stable")
        ids_arr = ids_arr[order]
        if n > 1 and np.any(ids_arr[1:] == ids_arr[:-1]):
            dup = int(ids_arr[np.nonzero(ids_arr[1:] == ids_arr[:-1])[0][0]])
            raise ValidationError(f"duplicate id {dup}")
        vec = np.ascontiguousarray(vec[order])

        norms = np.linalg.norm(vec.astype(np.float64), axis=1)
        if n > 0 and np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ValidationError(
                f"record id {int(ids_arr[bad])} is not unit-norm "
                f"(norm {norms[bad]:.8f}); ingest paths normalize, constructors expect unit vectors"
            )

        self._dim = dim
        self._ids = ids_arr
        self._ids.flags.writeable = False
        self._vectors = vec
        self._vectors.flags.writeable = False
        self._domains = tuple(domains[i] for i in order)
        self._texts = (
            tuple(texts[i] for i in order) if texts is not None else tuple([None] * n)
        )
        self._pos = {int(r): i for i, r in enumerate(ids_arr)}
        index: dict[str, list[int]] = {}
        for i, d in enumerate(self._domains):
            index.setdefault(d, []).append(int(ids_arr[i]))
        self._domain_index = {d: np.asarray(v, dtype=np.uint64) for d, v in index.items()}
        self._matrix64: np.ndarray | None = None

    # ------------------------------------------------------------------ views

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def domains(self) -> tuple[str, ...]:
        return self._domains

    @property
    def texts(self) -> tuple[str | None, ...]:
        return self._texts

    @property
    def vectors(self) -> np.ndarray:
        """(n, dim) float32 matrix, rows in id order. Read-only."""
        return self._vectors

    @property
    def domain_index(self) -> dict[str, np.ndarray]:
        """Map from domain label to the sorted ids carrying that label."""
        return dict(self._domain_index)

    def matrix64(self) -> np.ndarray:
        """C-contiguous float64 copy of the vectors, cached."""
        if self._matrix64 is None:
            m = np.ascontiguousarray(self._vectors, dtype=np.float64)
            m.flags.writeable = False
            self._matrix64 = m
        return self._matrix64

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, record_id: int) -> bool:
        return int(record_id) in self._pos

    def __iter__(self) -> Iterator[InstructionRecord]:
        for i in range(len(self)):
            yield self.record_at(i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self._dim == other._dim
            and np.array_equal(self._ids, other._ids)
            and self._domains == other._domains
            and np.array_equal(self._vectors, other._vectors)
            and self._texts == other._texts
        )

    def __repr__(self) -> str:
        return f"EmbeddingStore(dim={self._dim}, records={len(self)})"

    # ---------------------------------------------------------------- lookups

    def index_of(self, record_id: int) -> int:
        try:
            return self._pos[int(record_id)]
        except KeyError:
            raise ValidationError(f"unknown record id {record_id}") from None

    def record_at(self, position: int) -> InstructionRecord:
        return InstructionRecord(
            id=int(self._ids[position]),
            domain=self._domains[position],
            embedding=self._vectors[position],
            text=self._texts[position],
        )

    def get(self, record_id: int) -> InstructionRecord:
        return self.record_at(self.index_of(record_id))

    def domain_of(self, record_id: int) -> str:
        return self._domains[self.index_of(record_id)]

    def vectors_for(self, record_ids: Sequence[int]) -> np.ndarray:
        """Float32 vectors for the given ids, in the given order."""
        pos = [self.index_of(r) for r in record_ids]
        return self._vectors[pos]

    # ---------------------------------------------------------------- subsets

    def subset_by_domain(self, domain: str) -> "EmbeddingStore":
        """Records whose domain equals the label; empty store if none."""
        ids = self._domain_index.get(domain)
        if ids is None:
            return EmbeddingStore(self._dim, [], [], np.empty((0, self._dim), np.float32), [])
        return self.subset_by_ids(ids)

    def subset_by_ids(self, record_ids: Sequence[int]) -> "EmbeddingStore":
        pos = [self.index_of(r) for r in record_ids]
        return EmbeddingStore(
            self._dim,
            self._ids[pos],
            [self._domains[i] for i in pos],
            self._vectors[pos],
            [self._texts[i] for i in pos],
        )


# ---------------------------------------------------------------------- JSONL


def _normalized_row(values: list[float], dim: int, line_no: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ValidationError(
            f"line {line_no}: embedding length {arr.shape[0] if arr.ndim == 1 else 'n/a'}"
            f" does not match dimension {dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"line {line_no}: embedding contains non-finite values")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValidationError(f"line {line_no}: zero-norm vector rejected")
    return (arr / norm).astype(np.float32)


def ingest_jsonl(path: str | Path, dim: int) -> EmbeddingStore:
    """Read a JSONL embedding file, validating and L2-normalizing every vector.

    Errors name the offending 1-based line: dimension mismatch, duplicate id,
    zero-norm vector, malformed line.
    """
    path = Path(path)
    ids: list[int] = []
    domains: list[str] = []
    rows: list[np.ndarray] = []
    texts: list[str | None] = []
    seen: set[int] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {line_no}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ValidationError(f"line {line_no}: record must be an object")
            try:
                rec_id = obj["id"]
                domain = obj["domain"]
                embedding = obj["embedding"]
            except KeyError as exc:
                raise ValidationError(f"line {line_no}: missing field {exc.args[0]!r}") from None
            if not isinstance(rec_id, int) or rec_id < 0 or rec_id >= 2**64:
                raise ValidationError(f"line {line_no}: id must be an unsigned 64-bit integer")
            if rec_id in seen:
                raise ValidationError(f"line {line_no}: duplicate id {rec_id}")
            if not isinstance(domain, str):
                raise ValidationError(f"line {line_no}: domain must be a string")
            if not isinstance(embedding, list):
                raise ValidationError(f"line {line_no}: embedding must be an array")
            text = obj.get("text")
            if text is not None and not isinstance(text, str):
                raise ValidationError(f"line {line_no}: text must be a string when present")
            seen.add(rec_id)
            ids.append(rec_id)
            domains.append(domain)
            rows.append(_normalized_row(embedding, dim, line_no))
            texts.append(text)
    matrix = np.stack(rows) if rows else np.empty((0, dim), np.float32)
    return EmbeddingStore(dim, ids, domains, matrix, texts)


def write_jsonl(store: EmbeddingStore, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in store:
            obj: dict = {
                "id": rec.id,
                "domain": rec.domain,
                "embedding": [float(x) for x in rec.embedding],
            }
            if rec.text is not None:
                obj["text"] = rec.text
            fh.write(json.dumps(obj) + "\n")


# --------------------------------------------------------------------- binary


def write_binary(store: EmbeddingStore, path: str | Path) -> None:
    """Write the binary format. Text payloads are dropped (format carries none)."""
    path = Path(path)
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, store.dim), _COUNT.pack(len(store))]
    vec_fmt = struct.Struct(f"<{store.dim}f")
    for i in range(len(store)):
        domain = store.domains[i].encode("utf-8")
        if len(domain) > 0xFFFF:
            raise ValidationError(f"domain label too long for record id {int(store.ids[i])}")
        parts.append(_REC_FIXED.pack(int(store.ids[i]), len(domain)))
        parts.append(domain)
        parts.append(vec_fmt.pack(*store.vectors[i].tolist()))
    path.write_bytes(b"".join(parts))


def ingest_binary(path: str | Path) -> EmbeddingStore:
    """Read a binary embedding file. Vectors are taken as stored (bit-exact)."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValidationError("truncated payload: missing header")
    magic, version, dim = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValidationError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported format version {version}")
    offset = _HEADER.size
    if len(data) < offset + _COUNT.size:
        raise ValidationError("truncated payload: missing record count")
    (count,) = _COUNT.unpack_from(data, offset)
    offset += _COUNT.size

    ids: list[int] = []
    domains: list[str] = []
    vec_fmt = struct.Struct(f"<{dim}f")
    matrix = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        if len(data) < offset + _REC_FIXED.size:
            raise ValidationError(f"truncated payload in record {i}")
        rec_id, dlen = _REC_FIXED.unpack_from(data, offset)
        offset += _REC_FIXED.size
        if len(data) < offset + dlen + vec_fmt.size:
            raise ValidationError(f"truncated payload in record {i}")
        domains.append(data[offset : offset + dlen].decode("utf-8"))
        offset += dlen
        matrix[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += vec_fmt.size
        ids.append(rec_id)
    if offset != len(data):
        raise ValidationError(f"trailing data after {count} records")
    return EmbeddingStore(dim, ids, domains, matrix)
