"""Embedding records, prompt sets, corpora, and on-disk formats.

Three file formats live here:

* **Record files** (``.jsonl``) — the canonical interchange format. One JSON
  object per line with fields ``kind`` ("image" | "text"), ``adapter_id``
  (string, or null for vanilla base-model records), ``prompt_id``, ``seed``
  (integer, or null for text records), ``vector`` (array of ``dim`` reals).
  For text records ``prompt_id`` carries the exact embedded text; it is the
  cache key used by the file-backed provider.

* **Binary sidecar** (``.crls``) — a compact little-endian container for
  desk-scale corpora: header (magic ``CRLS``, version, dim, count), a string
  table, then fixed-width records with float32 vectors. Loaded lazily via
  memory mapping so multi-gigabyte corpora never have to fit in RAM.

* **Index files** (``.ldxi``) — a versioned, checksummed container holding
  the corpus manifest, encoder tag, dimension, build report, and one
  signature per adapter. Round-trips are bit-exact.

Vectors are stored at float32 precision; all statistics downstream are
computed in float64. A built corpus or index is immutable; rebuilding
produces a new object.
"""
from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ChecksumError,
    DataError,
    DimensionMismatchError,
    DuplicateKeyError,
    FormatError,
    MissingBaseError,
)

DEFAULT_DIM = 512
DEFAULT_ENCODER_TAG = "clip-vit-b32-unnormalized"

SIDECAR_MAGIC = b"CRLS"
SIDECAR_VERSION = 1
INDEX_MAGIC = b"LDXI"
INDEX_VERSION = 1

# Sentinel for "no adapter" (vanilla base model) in the binary format.
_NO_STRING = 0xFFFFFFFF

RecordKey = tuple[str | None, str, int | None]


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass
class GenerationRecord:
    """One embedded generation (kind "image") or one cached text embedding."""

    kind: str
    adapter_id: str | None
    prompt_id: str
    seed: int | None
    vector: np.ndarray  # float32, shape (dim,)

    @property
    def key(self) -> RecordKey:
        return (self.adapter_id, self.prompt_id, self.seed)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GenerationRecord):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.adapter_id == other.adapter_id
            and self.prompt_id == other.prompt_id
            and self.seed == other.seed
            and np.array_equal(self.vector, other.vector)
        )


def _validate_record(
    kind: str,
    adapter_id: str | None,
    prompt_id: str,
    seed: int | None,
    vector: np.ndarray,
    dim: int,
    context: str,
) -> GenerationRecord:
    if kind not in ("image", "text"):
        raise DataError(f"{context}: unknown kind {kind!r}")
    if not isinstance(prompt_id, str) or not prompt_id:
        raise DataError(f"{context}: prompt_id must be a non-empty string")
    if kind == "image":
        if adapter_id is not None and (not isinstance(adapter_id, str) or not adapter_id):
            raise DataError(f"{context}: adapter_id must be null or a non-empty string")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise DataError(f"{context}: image record needs a non-negative integer seed")
    else:
        if adapter_id is not None:
            raise DataError(f"{context}: text record must have null adapter_id")
        if seed is not None:
            raise DataError(f"{context}: text record must have null seed")
    arr = np.asarray(vector)
    if arr.ndim != 1 or arr.shape[0] != dim:
        key = (adapter_id, prompt_id, seed)
        raise DimensionMismatchError(
            f"{context}: record {key!r} has vector length {arr.shape[0] if arr.ndim == 1 else arr.shape},"
            f" expected {dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{context}: record {(adapter_id, prompt_id, seed)!r} has non-finite component")
    f32 = arr.astype(np.float32)
    if not np.all(np.isfinite(f32)):
        raise DataError(
            f"{context}: record {(adapter_id, prompt_id, seed)!r} overflows float32 storage"
        )
    return GenerationRecord(kind, adapter_id, prompt_id, seed, f32)


def read_records(path: str | Path) -> Iterator[GenerationRecord]:
    """Stream records from a canonical ``.jsonl`` file.

    Dimension checks happen at ingestion (the file does not declare one);
    this parser only checks structure.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            context = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{context}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"{context}: record must be a JSON object")
            for fieldname in ("kind", "adapter_id", "prompt_id", "seed", "vector"):
                if fieldname not in obj:
                    raise DataError(f"{context}: missing required field {fieldname!r}")
            vec = obj["vector"]
            if not isinstance(vec, list):
                raise DataError(f"{context}: vector must be an array")
            arr = np.asarray(vec, dtype=np.float64)
            yield _validate_record(
                obj["kind"], obj["adapter_id"], obj["prompt_id"], obj["seed"],
                arr, arr.shape[0] if arr.ndim == 1 else -1, context,
            )


def _record_sort_key(rec: GenerationRecord):
    return (
        0 if rec.kind == "image" else 1,
        rec.adapter_id is not None,  # vanilla base records first
        rec.adapter_id or "",
        rec.prompt_id,
        -1 if rec.seed is None else rec.seed,
    )


def _record_to_json_line(rec: GenerationRecord) -> str:
    doc = {
        "kind": rec.kind,
        "adapter_id": rec.adapter_id,
        "prompt_id": rec.prompt_id,
        "seed": rec.seed,
        "vector": [float(x) for x in rec.vector],
    }
    return json.dumps(doc, separators=(",", ":"))


def write_records(records: Iterable[GenerationRecord], path: str | Path) -> int:
    """Write records in canonical order; returns the number written.

    Canonical order (kind, base-first, adapter_id, prompt_id, seed) makes the
    output independent of input ordering.
    """
    ordered = sorted(records, key=_record_sort_key)
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(_record_to_json_line(rec))
            fh.write("\n")
    return len(ordered)


# ---------------------------------------------------------------------------
# prompt sets
# ---------------------------------------------------------------------------


class PromptRole(str, Enum):
    INDEXING = "indexing"
    RETRIEVAL = "retrieval"


@dataclass(frozen=True)
class PromptEntry:
    prompt_id: str
    category: str
    subcategory: str
    text: str


_PROMPT_COLUMNS = ("prompt_id", "category", "subcategory", "text", "role")


@dataclass
class PromptSet:
    """A named, role-tagged collection of prompts."""

    role: PromptRole
    prompts: list[PromptEntry]
    set_id: str = ""

    def __post_init__(self) -> None:
        if not self.prompts:
            raise DataError(f"empty prompt set for role {self.role.value}")
        seen: set[str] = set()
        for entry in self.prompts:
            if entry.prompt_id in seen:
                raise DuplicateKeyError(f"duplicate prompt_id {entry.prompt_id!r}")
            seen.add(entry.prompt_id)
        if not self.set_id:
            digest = hashlib.sha256()
            digest.update(self.role.value.encode())
            for entry in self.prompts:
                digest.update(
                    f"\x1f{entry.prompt_id}\x1f{entry.category}\x1f{entry.subcategory}\x1f{entry.text}".encode()
                )
            self.set_id = digest.hexdigest()[:16]

    @property
    def size(self) -> int:
        return len(self.prompts)

    @property
    def category_count(self) -> int:
        return len({p.category for p in self.prompts})

    def prompt_ids(self) -> set[str]:
        return {p.prompt_id for p in self.prompts}

    def texts(self) -> set[str]:
        return {p.text for p in self.prompts}

    def check_disjoint(self, other: "PromptSet") -> None:
        """Verify no shared prompt_id or text with a set of the other role."""
        if other.role == self.role:
            return
        shared_ids = self.prompt_ids() & other.prompt_ids()
        if shared_ids:
            raise DataError(
                f"prompt sets overlap between roles: shared prompt_ids {sorted(shared_ids)[:5]}"
            )
        shared_texts = self.texts() & other.texts()
        if shared_texts:
            sample = sorted(shared_texts)[0]
            raise DataError(
                f"prompt sets overlap between roles: {len(shared_texts)} shared texts"
                f" (e.g. {sample!r})"
            )


def load_prompt_set(
    path: str | Path,
    role: PromptRole,
    disjoint_from: PromptSet | None = None,
) -> PromptSet:
    """Load a tab-delimited prompt file and tag it with `role`.

    Columns: prompt_id, category, subcategory, text, role (header required;
    the role column may be empty, otherwise each row must match the requested
    role). Pass `disjoint_from` to verify id/text disjointness against an
    already-loaded set of the other role.
    """
    path = Path(path)
    entries: list[PromptEntry] = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        cols = tuple(header.split("\t"))
        if cols != _PROMPT_COLUMNS:
            raise FormatError(
                f"{path.name}: expected header {'	'.join(_PROMPT_COLUMNS)!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(_PROMPT_COLUMNS):
                raise FormatError(f"{path.name}:{lineno}: expected {len(_PROMPT_COLUMNS)} columns")
            prompt_id, category, subcategory, text, row_role = parts
            if not prompt_id or not text:
                raise DataError(f"{path.name}:{lineno}: prompt_id and text must be non-empty")
            if row_role and row_role != role.value:
                raise DataError(
                    f"{path.name}:{lineno}: row role {row_role!r} does not match requested role"
                    f" {role.value!r}"
                )
            entries.append(PromptEntry(prompt_id, category, subcategory, text))
    prompt_set = PromptSet(role=role, prompts=entries)
    if disjoint_from is not None:
        prompt_set.check_disjoint(disjoint_from)
    return prompt_set


def save_prompt_set(prompt_set: PromptSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("\t".join(_PROMPT_COLUMNS) + "\n")
        for entry in prompt_set.prompts:
            for value in (entry.prompt_id, entry.category, entry.subcategory, entry.text):
                if "\t" in value or "\n" in value:
                    raise DataError(f"prompt field contains tab/newline: {value!r}")
            fh.write(
                "\t".join(
                    (entry.prompt_id, entry.category, entry.subcategory, entry.text,
                     prompt_set.role.value)
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------


@dataclass
class CorpusManifest:
    """Counts describing a validated corpus."""

    records: int = 0
    adapters: int = 0
    prompts: int = 0
    seeds: int = 0
    base_records: int = 0
    text_records: int = 0
    duplicates_dropped: int = 0

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "adapters": self.adapters,
            "prompts": self.prompts,
            "seeds": self.seeds,
            "base_records": self.base_records,
            "text_records": self.text_records,
            "duplicates_dropped": self.duplicates_dropped,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CorpusManifest":
        return cls(**{k: int(data.get(k, 0)) for k in cls().to_dict()})


class _MemoryBlock:
    """Image records of one adapter held as a stacked float32 matrix."""

    def __init__(self, dim: int):
        self._dim = dim
        self._keys: list[tuple[str, int]] = []
        self._index: dict[tuple[str, int], int] = {}
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._keys)

    def add(self, prompt_id: str, seed: int, vector: np.ndarray) -> bool:
        """Returns False when an identical record was already present."""
        key = (prompt_id, seed)
        row = self._index.get(key)
        if row is not None:
            if np.array_equal(self._rows[row], vector):
                return False
            raise DuplicateKeyError(
                f"conflicting duplicate for key (prompt_id={prompt_id!r}, seed={seed})"
            )
        self._index[key] = len(self._keys)
        self._keys.append(key)
        self._rows.append(vector)
        self._matrix = None
        return True

    def keys(self) -> list[tuple[str, int]]:
        return self._keys

    def key_to_row(self) -> dict[tuple[str, int], int]:
        return self._index

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack(self._rows).astype(np.float32, copy=False)
        return self._matrix

    def canonicalize(self) -> None:
        """Sort rows by (prompt_id, seed) so downstream statistics never
        depend on the order records arrived in."""
        order = sorted(range(len(self._keys)), key=lambda r: self._keys[r])
        self._keys = [self._keys[r] for r in order]
        self._rows = [self._rows[r] for r in order]
        self._index = {key: row for row, key in enumerate(self._keys)}
        self._matrix = None


class _SidecarBlock:
    """Image records of one adapter backed by a memory-mapped sidecar file."""

    def __init__(self, records: np.ndarray, rows: np.ndarray, strings: list[str]):
        self._records = records
        self._rows = rows
        self._strings = strings
        self._keys: list[tuple[str, int]] | None = None
        self._index: dict[tuple[str, int], int] | None = None

    def __len__(self) -> int:
        return int(self._rows.shape[0])

    def keys(self) -> list[tuple[str, int]]:
        if self._keys is None:
            prompts = self._records["prompt"][self._rows]
            seeds = self._records["seed"][self._rows]
            self._keys = [
                (self._strings[int(p)], int(s)) for p, s in zip(prompts, seeds)
            ]
        return self._keys

    def key_to_row(self) -> dict[tuple[str, int], int]:
        if self._index is None:
            index: dict[tuple[str, int], int] = {}
            for row, key in enumerate(self.keys()):
                if key in index:
                    raise DuplicateKeyError(
                        f"conflicting duplicate for key (prompt_id={key[0]!r}, seed={key[1]})"
                    )
                index[key] = row
            self._index = index
        return self._index

    def matrix(self) -> np.ndarray:
        return np.ascontiguousarray(self._records["vec"][self._rows])


class EmbeddingCorpus:
    """A validated, immutable collection of embedding records.

    Image records are grouped per adapter (``None`` is the vanilla base
    model); text records form a lookup keyed by the exact embedded text.
    """

    def __init__(
        self,
        dim: int,
        encoder_tag: str,
        image_blocks: dict[str | None, _MemoryBlock | _SidecarBlock],
        text_vectors: dict[str, np.ndarray],
        manifest: CorpusManifest,
    ):
        self.dim = dim
        self.encoder_tag = encoder_tag
        self._image = image_blocks
        self._text = text_vectors
        self.manifest = manifest

    def adapter_ids(self) -> list[str]:
        return sorted(k for k in self._image if k is not None)

    def has_adapter(self, adapter_id: str | None) -> bool:
        return adapter_id in self._image

    def has_base(self) -> bool:
        return None in self._image

    def image_block(self, adapter_id: str | None):
        try:
            return self._image[adapter_id]
        except KeyError:
            name = "BASE" if adapter_id is None else repr(adapter_id)
            raise DataError(f"no image records for adapter {name}") from None

    def text_vector(self, text: str) -> np.ndarray | None:
        return self._text.get(text)

    def text_items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(sorted(self._text.items()))

    def check_base_complete(self, adapter_id: str) -> None:
        """Every (prompt, seed) of the adapter must have a vanilla record."""
        if not self.has_base():
            raise MissingBaseError(
                f"adapter {adapter_id!r}: corpus holds no vanilla base records"
            )
        block = self.image_block(adapter_id)
        base = self.image_block(None)
        base_index = base.key_to_row()
        for key in block.keys():
            if key not in base_index:
                raise MissingBaseError(
                    f"adapter {adapter_id!r}: missing base record for"
                    f" (prompt_id={key[0]!r}, seed={key[1]})"
                )

    def iter_records(self) -> Iterator[GenerationRecord]:
        """All records in canonical order (base first, then adapters, then text)."""
        order: list[str | None] = []
        if None in self._image:
            order.append(None)
        order.extend(self.adapter_ids())
        for adapter_id in order:
            block = self._image[adapter_id]
            keys = block.keys()
            matrix = block.matrix()
            for (prompt_id, seed), row in sorted(
                zip(keys, range(len(keys))), key=lambda item: item[0]
            ):
                yield GenerationRecord("image", adapter_id, prompt_id, seed, matrix[row])
        for text, vector in self.text_items():
            yield GenerationRecord("text", None, text, None, vector)


class CorpusBuilder:
    """Single-writer accumulator; `build()` seals the corpus."""

    def __init__(self, dim: int, encoder_tag: str = DEFAULT_ENCODER_TAG):
        if dim < 1:
            raise DataError(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.encoder_tag = encoder_tag
        self._image: dict[str | None, _MemoryBlock] = {}
        self._text: dict[str, np.ndarray] = {}
        self._duplicates = 0

    def add_record(self, rec: GenerationRecord) -> None:
        rec = _validate_record(
            rec.kind, rec.adapter_id, rec.prompt_id, rec.seed, rec.vector, self.dim, "ingest"
        )
        if rec.kind == "image":
            block = self._image.get(rec.adapter_id)
            if block is None:
                block = self._image[rec.adapter_id] = _MemoryBlock(self.dim)
            assert rec.seed is not None
            if not block.add(rec.prompt_id, rec.seed, rec.vector):
                self._duplicates += 1
        else:
            existing = self._text.get(rec.prompt_id)
            if existing is not None:
                if np.array_equal(existing, rec.vector):
                    self._duplicates += 1
                    return
                raise DuplicateKeyError(
                    f"conflicting duplicate for text record {rec.prompt_id!r}"
                )
            self._text[rec.prompt_id] = rec.vector

    def add_image_block(
        self,
        adapter_id: str | None,
        prompt_ids: Sequence[str],
        seeds: Sequence[int],
        matrix: np.ndarray,
    ) -> None:
        """Bulk insert of aligned (prompt_id, seed) rows for one adapter."""
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"block for {adapter_id!r}: expected (n, {self.dim}) matrix, got {matrix.shape}"
            )
        if not (len(prompt_ids) == len(seeds) == matrix.shape[0]):
            raise DataError("prompt_ids, seeds, and matrix rows must align")
        if not np.all(np.isfinite(matrix)):
            raise DataError(f"block for {adapter_id!r}: non-finite component")
        f32 = matrix.astype(np.float32)
        block = self._image.get(adapter_id)
        if block is None:
            block = self._image[adapter_id] = _MemoryBlock(self.dim)
        for i, (prompt_id, seed) in enumerate(zip(prompt_ids, seeds)):
            if not block.add(prompt_id, int(seed), f32[i]):
                self._duplicates += 1

    def build(self) -> EmbeddingCorpus:
        for block in self._image.values():
            block.canonicalize()
        manifest = _manifest_from_blocks(self._image, self._text, self._duplicates)
        return EmbeddingCorpus(self.dim, self.encoder_tag, dict(self._image), dict(self._text), manifest)


def _manifest_from_blocks(
    image: Mapping[str | None, _MemoryBlock | _SidecarBlock],
    text: Mapping[str, np.ndarray],
    duplicates: int,
) -> CorpusManifest:
    prompts: set[str] = set()
    seeds: set[int] = set()
    records = 0
    for block in image.values():
        records += len(block)
        for prompt_id, seed in block.keys():
            prompts.add(prompt_id)
            seeds.add(seed)
    base = image.get(None)
    return CorpusManifest(
        records=records,
        adapters=sum(1 for k in image if k is not None),
        prompts=len(prompts),
        seeds=len(seeds),
        base_records=len(base) if base is not None else 0,
        text_records=len(text),
        duplicates_dropped=duplicates,
    )


def ingest_records(
    source: Iterable[GenerationRecord],
    expected_dim: int,
    encoder_tag: str = DEFAULT_ENCODER_TAG,
) -> EmbeddingCorpus:
    """Validate and deduplicate a record stream into a corpus.

    Identical duplicate records are dropped and counted; records that share a
    key but disagree on the vector raise `DuplicateKeyError` (first-wins
    would make the result depend on stream order).
    """
    builder = CorpusBuilder(expected_dim, encoder_tag)
    for rec in source:
        builder.add_record(rec)
    return builder.build()


def load_corpus(
    path: str | Path,
    expected_dim: int | None = None,
    encoder_tag: str = DEFAULT_ENCODER_TAG,
) -> EmbeddingCorpus:
    """Load a corpus from a record file or binary sidecar (sniffed by magic)."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == SIDECAR_MAGIC:
        return open_sidecar(path, expected_dim=expected_dim, encoder_tag=encoder_tag)
    records = read_records(path)
    if expected_dim is None:
        records = iter(records)
        try:
            first = next(records)
        except StopIteration:
            raise DataError(f"{path.name}: no records") from None
        expected_dim = int(first.vector.shape[0])

        def _chain() -> Iterator[GenerationRecord]:
            yield first
            yield from records

        return ingest_records(_chain(), expected_dim, encoder_tag)
    return ingest_records(records, expected_dim, encoder_tag)


# ---------------------------------------------------------------------------
# binary sidecar
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIQ")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [
            ("kind", "u1"),
            ("adapter", "<u4"),
            ("prompt", "<u4"),
            ("seed", "<i8"),
            ("vec", "<f4", (dim,)),
        ]
    )


class SidecarWriter:
    """Streaming writer for the binary record format.

    The string table must be known up front (every adapter_id, prompt_id, and
    cached text); the record count is patched into the header on close.
    """

    def __init__(self, path: str | Path, dim: int, strings: Sequence[str]):
        if len(set(strings)) != len(strings):
            raise DataError("sidecar string table contains duplicates")
        self.path = Path(path)
        self.dim = dim
        self._strings = list(strings)
        self._lookup = {s: i for i, s in enumerate(self._strings)}
        self._dtype = _record_dtype(dim)
        self._count = 0
        self._fh: IO[bytes] | None = self.path.open("wb")
        self._fh.write(_HEADER.pack(SIDECAR_MAGIC, SIDECAR_VERSION, dim, 0))
        self._fh.write(struct.pack("<I", len(self._strings)))
        for s in self._strings:
            raw = s.encode("utf-8")
            self._fh.write(struct.pack("<I", len(raw)))
            self._fh.write(raw)

    def _string_index(self, value: str) -> int:
        try:
            return self._lookup[value]
        except KeyError:
            raise DataError(f"string {value!r} not present in sidecar string table") from None

    def write_block(
        self,
        adapter_id: str | None,
        prompt_ids: Sequence[str],
        seeds: Sequence[int],
        matrix: np.ndarray,
    ) -> None:
        if self._fh is None:
            raise FormatError("sidecar writer already closed")
        matrix = np.asarray(matrix, dtype=np.float32)
        n = matrix.shape[0]
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"sidecar block: expected (n, {self.dim}), got {matrix.shape}"
            )
        out = np.empty(n, dtype=self._dtype)
        out["kind"] = 0
        out["adapter"] = _NO_STRING if adapter_id is None else self._string_index(adapter_id)
        out["prompt"] = [self._string_index(p) for p in prompt_ids]
        out["seed"] = np.asarray(seeds, dtype=np.int64)
        out["vec"] = matrix
        self._fh.write(out.tobytes())
        self._count += n

    def write_text(self, text: str, vector: np.ndarray) -> None:
        if self._fh is None:
            raise FormatError("sidecar writer already closed")
        out = np.zeros(1, dtype=self._dtype)
        out["kind"] = 1
        out["adapter"] = _NO_STRING
        out["prompt"] = self._string_index(text)
        out["seed"] = -1
        out["vec"] = np.asarray(vector, dtype=np.float32)
        self._fh.write(out.tobytes())
        self._count += 1

    def close(self) -> None:
        if self._fh is None:
            return
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(SIDECAR_MAGIC, SIDECAR_VERSION, self.dim, self._count))
        self._fh.close()
        self._fh = None

    def __enter__(self) -> "SidecarWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_sidecar(corpus: EmbeddingCorpus, path: str | Path) -> None:
    """Dump a corpus to the binary sidecar format in canonical order."""
    strings: list[str] = []
    seen: set[str] = set()

    def _collect(value: str) -> None:
        if value not in seen:
            seen.add(value)
            strings.append(value)

    order: list[str | None] = ([None] if corpus.has_base() else [])
    order.extend(corpus.adapter_ids())
    for adapter_id in order:
        if adapter_id is not None:
            _collect(adapter_id)
        for prompt_id, _ in corpus.image_block(adapter_id).keys():
            _collect(prompt_id)
    texts = [t for t, _ in corpus.text_items()]
    for t in texts:
        _collect(t)

    with SidecarWriter(path, corpus.dim, strings) as writer:
        for adapter_id in order:
            block = corpus.image_block(adapter_id)
            keys = block.keys()
            rows = sorted(range(len(keys)), key=lambda r: keys[r])
            writer.write_block(
                adapter_id,
                [keys[r][0] for r in rows],
                [keys[r][1] for r in rows],
                block.matrix()[rows],
            )
        for t in texts:
            vec = corpus.text_vector(t)
            assert vec is not None
            writer.write_text(t, vec)


def open_sidecar(
    path: str | Path,
    expected_dim: int | None = None,
    encoder_tag: str = DEFAULT_ENCODER_TAG,
) -> EmbeddingCorpus:
    """Open a binary sidecar as a lazily-loaded, memory-mapped corpus."""
    path = Path(path)
    size = path.stat().st_size
    with path.open("rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path.name}: truncated header")
        magic, version, dim, count = _HEADER.unpack(head)
        if magic != SIDECAR_MAGIC:
            raise FormatError(f"{path.name}: bad magic {magic!r}")
        if version != SIDECAR_VERSION:
            raise FormatError(f"{path.name}: unsupported sidecar version {version}")
        if expected_dim is not None and dim != expected_dim:
            raise DimensionMismatchError(
                f"{path.name}: sidecar dimension {dim} != expected {expected_dim}"
            )
        (n_strings,) = struct.unpack("<I", fh.read(4))
        strings: list[str] = []
        for _ in range(n_strings):
            (slen,) = struct.unpack("<I", fh.read(4))
            strings.append(fh.read(slen).decode("utf-8"))
        records_offset = fh.tell()
    dtype = _record_dtype(dim)
    expected_size = records_offset + count * dtype.itemsize
    if size != expected_size:
        raise FormatError(
            f"{path.name}: size {size} does not match header count {count}"
            f" (expected {expected_size})"
        )
    records = np.memmap(path, dtype=dtype, mode="r", offset=records_offset, shape=(count,))

    kinds = np.asarray(records["kind"])
    image_positions = np.flatnonzero(kinds == 0)
    adapters = np.asarray(records["adapter"])[image_positions]
    image_blocks: dict[str | None, _MemoryBlock | _SidecarBlock] = {}
    if image_positions.size:
        order = np.argsort(adapters, kind="stable")
        sorted_adapters = adapters[order]
        boundaries = np.flatnonzero(np.diff(sorted_adapters)) + 1
        starts = np.concatenate(([0], boundaries))
        ends = np.concatenate((boundaries, [sorted_adapters.size]))
        for start, end in zip(starts, ends):
            idx = int(sorted_adapters[start])
            adapter_id = None if idx == _NO_STRING else strings[idx]
            rows = image_positions[order[start:end]]
            image_blocks[adapter_id] = _SidecarBlock(records, rows, strings)

    text_vectors: dict[str, np.ndarray] = {}
    for pos in np.flatnonzero(kinds == 1):
        rec = records[pos]
        text = strings[int(rec["prompt"])]
        if text in text_vectors and not np.array_equal(text_vectors[text], rec["vec"]):
            raise DuplicateKeyError(f"conflicting duplicate for text record {text!r}")
        text_vectors[text] = np.array(rec["vec"])

    manifest = _manifest_from_blocks(image_blocks, text_vectors, 0)
    return EmbeddingCorpus(dim, encoder_tag, image_blocks, text_vectors, manifest)


# ---------------------------------------------------------------------------
# signatures and index
# ---------------------------------------------------------------------------


@dataclass
class LoraSignature:
    """Measured effect of one adapter: direction, strength, consistency."""

    adapter_id: str
    direction: np.ndarray  # float64, shape (dim,)
    strength: float
    consistency: float
    sample_count: int
    dim: int
    encoder_tag: str

    def validate(self) -> None:
        if self.direction.shape != (self.dim,):
            raise DimensionMismatchError(
                f"signature {self.adapter_id!r}: direction shape {self.direction.shape}"
                f" != ({self.dim},)"
            )
        if not np.all(np.isfinite(self.direction)):
            raise DataError(f"signature {self.adapter_id!r}: non-finite direction")
        if not (np.isfinite(self.strength) and self.strength >= 0.0):
            raise DataError(f"signature {self.adapter_id!r}: invalid strength {self.strength}")
        if not (-1.0 <= self.consistency <= 1.0):
            raise DataError(
                f"signature {self.adapter_id!r}: consistency {self.consistency} outside [-1, 1]"
            )
        norm = float(np.linalg.norm(self.direction))
        # Mean-of-vectors norm cannot exceed mean-of-norms; allow rounding slack.
        if norm > self.strength * (1.0 + 1e-9) + 1e-12:
            raise DataError(
                f"signature {self.adapter_id!r}: direction norm {norm} exceeds strength"
                f" {self.strength}"
            )
        if self.sample_count < 1:
            raise DataError(f"signature {self.adapter_id!r}: sample_count < 1")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LoraSignature):
            return NotImplemented
        return (
            self.adapter_id == other.adapter_id
            and np.array_equal(self.direction, other.direction)
            and self.strength == other.strength
            and self.consistency == other.consistency
            and self.sample_count == other.sample_count
            and self.dim == other.dim
            and self.encoder_tag == other.encoder_tag
        )


@dataclass
class BuildReportEntry:
    adapter_id: str
    sample_count: int
    strength: float
    consistency: float
    excluded_pairs: int


@dataclass
class BuildReport:
    """Per-adapter build statistics plus exclusions with reasons."""

    entries: list[BuildReportEntry] = field(default_factory=list)
    exclusions: list[tuple[str, str]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = ["adapter_id\tsample_count\tstrength\tconsistency\texcluded_pairs"]
        for e in self.entries:
            lines.append(
                f"{e.adapter_id}\t{e.sample_count}\t{e.strength!r}\t{e.consistency!r}"
                f"\t{e.excluded_pairs}"
            )
        if self.exclusions:
            lines.append("# excluded adapters:")
            for adapter_id, reason in self.exclusions:
                lines.append(f"# {adapter_id}\t{reason}")
        return "\n".join(lines) + "\n"


class CorpusIndex:
    """Immutable map of adapter signatures plus provenance.

    `index_id` is a content digest over dimension, encoder tag, and all
    signatures — it deliberately excludes `created_at` so rebuilding from
    identical inputs is recognizable as the same index.
    """

    def __init__(
        self,
        signatures: Mapping[str, LoraSignature],
        dim: int,
        encoder_tag: str,
        created_at: str,
        manifest: Mapping,
        scale_tag: float = 1.0,
        build_report: BuildReport | None = None,
    ):
        self.signatures = dict(sorted(signatures.items()))
        self.dim = dim
        self.encoder_tag = encoder_tag
        self.created_at = created_at
        self.manifest = dict(manifest)
        self.scale_tag = float(scale_tag)
        self.build_report = build_report
        self._validate()
        self.index_id = self._content_digest()
        self._direction_matrix: np.ndarray | None = None
        self._direction_norms: np.ndarray | None = None

    def _validate(self) -> None:
        if not self.signatures:
            raise DataError("index holds no signatures")
        for adapter_id, sig in self.signatures.items():
            if sig.adapter_id != adapter_id:
                raise DataError(f"signature key {adapter_id!r} != payload id {sig.adapter_id!r}")
            if sig.dim != self.dim:
                raise DimensionMismatchError(
                    f"index dim {self.dim} but signature {adapter_id!r} has dim {sig.dim}"
                )
            if sig.encoder_tag != self.encoder_tag:
                raise DataError(
                    f"index encoder_tag {self.encoder_tag!r} but signature {adapter_id!r}"
                    f" has {sig.encoder_tag!r}"
                )
            sig.validate()

    def _content_digest(self) -> str:
        digest = hashlib.sha256()
        digest.update(f"dim={self.dim};tag={self.encoder_tag};scale={self.scale_tag!r}".encode())
        for adapter_id, sig in self.signatures.items():
            digest.update(adapter_id.encode())
            digest.update(np.ascontiguousarray(sig.direction, dtype="<f8").tobytes())
            digest.update(struct.pack("<ddq", sig.strength, sig.consistency, sig.sample_count))
        return digest.hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.signatures)

    def adapter_ids(self) -> list[str]:
        return list(self.signatures)

    def get(self, adapter_id: str) -> LoraSignature | None:
        return self.signatures.get(adapter_id)

    def direction_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (n, dim) float64 directions and their norms, cached."""
        if self._direction_matrix is None:
            mat = np.vstack([sig.direction for sig in self.signatures.values()])
            self._direction_matrix = mat
            self._direction_norms = np.linalg.norm(mat, axis=1)
        assert self._direction_norms is not None
        return self._direction_matrix, self._direction_norms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorpusIndex):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.encoder_tag == other.encoder_tag
            and self.created_at == other.created_at
            and self.scale_tag == other.scale_tag
            and self.manifest == other.manifest
            and self.signatures == other.signatures
            and _report_to_dict(self.build_report) == _report_to_dict(other.build_report)
        )


def _report_to_dict(report: BuildReport | None) -> dict | None:
    if report is None:
        return None
    return {
        "entries": [
            {
                "adapter_id": e.adapter_id,
                "sample_count": e.sample_count,
                "strength": e.strength,
                "consistency": e.consistency,
                "excluded_pairs": e.excluded_pairs,
            }
            for e in report.entries
        ],
        "exclusions": [{"adapter_id": a, "reason": r} for a, r in report.exclusions],
    }


def _report_from_dict(data: Mapping | None) -> BuildReport | None:
    if data is None:
        return None
    return BuildReport(
        entries=[
            BuildReportEntry(
                adapter_id=e["adapter_id"],
                sample_count=int(e["sample_count"]),
                strength=float(e["strength"]),
                consistency=float(e["consistency"]),
                excluded_pairs=int(e["excluded_pairs"]),
            )
            for e in data["entries"]
        ],
        exclusions=[(e["adapter_id"], e["reason"]) for e in data["exclusions"]],
    )


def _encode_f64(vector: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(vector, dtype="<f8").tobytes()).decode("ascii")


def _decode_f64(payload: str, dim: int, context: str) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"))
    vector = np.frombuffer(raw, dtype="<f8")
    if vector.shape[0] != dim:
        raise FormatError(f"{context}: direction has {vector.shape[0]} components, expected {dim}")
    return vector.astype(np.float64)


def save_index(index: CorpusIndex, path: str | Path) -> None:
    """Serialize an index to a checksummed container file."""
    payload = {
        "format": "loradex-index",
        "dim": index.dim,
        "encoder_tag": index.encoder_tag,
        "created_at": index.created_at,
        "scale_tag": index.scale_tag,
        "manifest": index.manifest,
        "signatures": [
            {
                "adapter_id": sig.adapter_id,
                "strength": sig.strength,
                "consistency": sig.consistency,
                "sample_count": sig.sample_count,
                "direction": _encode_f64(sig.direction),
            }
            for sig in index.signatures.values()
        ],
        "build_report": _report_to_dict(index.build_report),
    }
    raw = json.dumps(payload, separators=(",", ":"), sort_keys=True).encode("utf-8")
    digest = hashlib.sha256(raw).digest()
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<IQ", INDEX_VERSION, len(raw)))
        fh.write(raw)
        fh.write(digest)


def load_index(path: str | Path) -> CorpusIndex:
    """Load and verify an index container; round-trip of `save_index` is exact."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4 + 12:
        raise ChecksumError(f"{path.name}: truncated container")
    if blob[:4] != INDEX_MAGIC:
        raise FormatError(f"{path.name}: bad magic {blob[:4]!r}")
    version, length = struct.unpack("<IQ", blob[4:16])
    if version != INDEX_VERSION:
        raise FormatError(f"{path.name}: unsupported index version {version}")
    end = 16 + length
    if len(blob) < end + 32:
        raise ChecksumError(f"{path.name}: truncated container")
    raw = blob[16:end]
    digest = blob[end:end + 32]
    if hashlib.sha256(raw).digest() != digest:
        raise ChecksumError(f"{path.name}: checksum mismatch")
    payload = json.loads(raw.decode("utf-8"))
    dim = int(payload["dim"])
    encoder_tag = payload["encoder_tag"]
    signatures = {}
    for item in payload["signatures"]:
        sig = LoraSignature(
            adapter_id=item["adapter_id"],
            direction=_decode_f64(item["direction"], dim, item["adapter_id"]),
            strength=float(item["strength"]),
            consistency=float(item["consistency"]),
            sample_count=int(item["sample_count"]),
            dim=dim,
            encoder_tag=encoder_tag,
        )
        signatures[sig.adapter_id] = sig
    return CorpusIndex(
        signatures=signatures,
        dim=dim,
        encoder_tag=encoder_tag,
        created_at=payload["created_at"],
        manifest=payload["manifest"],
        scale_tag=float(payload.get("scale_tag", 1.0)),
        build_report=_report_from_dict(payload.get("build_report")),
    )


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
