"""Dataset ingestion, validation, seeded splits and batch schedules.

All functions here are pure: given the same inputs and seed they return the
same value on every platform.  Randomness always goes through numpy's PCG64
generator (``np.random.default_rng``), and sub-seeds are derived from a master
seed with :func:`derive_seed` so that a single integer reproduces an entire
experiment byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

OZONE_COLUMNS = (
    "upo3", "vdht", "wdsp", "hmdt", "sbtp",
    "ibht", "dgpg", "ibtp", "vsty", "day",
)


class SchemaError(ValueError):
    """A file does not have the expected column structure."""


class RowValidationError(ValueError):
    """A data row violates a value-level invariant."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


def derive_seed(master: int, label: str) -> int:
    """Derive a 64-bit sub-seed from a master seed and a purpose label.

    Uses the first 8 bytes of SHA-256 over ``"{master}:{label}"``, so the
    derivation is stable across platforms and Python versions.
    """
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable table of numeric records.

    ``ids`` are the row identities in the originating table; subsets keep the
    original ids so that provenance (which rows a model has absorbed) stays
    meaningful across splits and batches.
    """

    columns: tuple[str, ...]
    values: np.ndarray            # shape (n_rows, n_columns), float64
    ids: np.ndarray = field(default=None)  # shape (n_rows,), int64

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ValueError("values shape does not match column count")
        if values.shape[0] == 0:
            raise ValueError("no data rows")
        ids = self.ids
        if ids is None:
            ids = np.arange(values.shape[0], dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (values.shape[0],):
            raise ValueError("ids shape does not match row count")
        values = values.copy()
        values.setflags(write=False)
        ids = ids.copy()
        ids.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_columns(cls, mapping: dict[str, np.ndarray], ids=None) -> "Dataset":
        cols = tuple(mapping)
        values = np.column_stack([np.asarray(mapping[c], dtype=float) for c in cols])
        return cls(cols, values, ids)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def has_column(self, name: str) -> bool:
        return name in self.columns

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise SchemaError(f"missing column: {name}") from None
        return self.values[:, j]

    def subset(self, row_ids) -> "Dataset":
        """Select rows by their original ids (order preserved)."""
        row_ids = np.asarray(row_ids, dtype=np.int64)
        pos_by_id = {int(i): p for p, i in enumerate(self.ids)}
        try:
            pos = np.array([pos_by_id[int(i)] for i in row_ids], dtype=np.int64)
        except KeyError as e:
            raise KeyError(f"row id {e.args[0]} not present in dataset") from None
        return Dataset(self.columns, self.values[pos], row_ids)

    def id_set(self) -> frozenset:
        return frozenset(int(i) for i in self.ids)


def _parse_cell(text: str, row: int, col: str) -> float:
    text = text.strip()
    if text == "":
        raise RowValidationError(row, f"missing value in column {col!r}")
    try:
        return float(text)
    except ValueError:
        raise RowValidationError(row, f"non-numeric value {text!r} in column {col!r}") from None


def validate_ozone(data: Dataset) -> None:
    """Check record-level invariants of an ozone table."""
    upo3 = data.column("upo3")
    day = data.column("day")
    for pos in range(data.n_rows):
        row = pos + 1
        v = upo3[pos]
        if v != np.floor(v):
            raise RowValidationError(row, f"upo3 must be an integer, got {v}")
        if v < 1:
            raise RowValidationError(row, f"upo3 must be >= 1, got {v}")
        d = day[pos]
        if d != np.floor(d) or not (1 <= d <= 366):
            raise RowValidationError(row, f"day must be an integer in [1, 366], got {d}")


def load_ozone_csv(path) -> Dataset:
    """Load and validate an ozone CSV file.

    The header must name the ten documented columns (any order, extra columns
    are carried along); every cell must be numeric, ``upo3`` a positive
    integer and ``day`` an integer in [1, 366].
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file") from None
        header = [h.strip() for h in header]
        for required in OZONE_COLUMNS:
            if required not in header:
                raise SchemaError(f"missing column: {required}")
        rows = []
        for row_num, row in enumerate(reader, start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise RowValidationError(row_num, f"expected {len(header)} cells, got {len(row)}")
            rows.append([_parse_cell(cell, row_num, col) for cell, col in zip(row, header)])
    if not rows:
        raise SchemaError("no data rows")
    data = Dataset(tuple(header), np.array(rows, dtype=float))
    validate_ozone(data)
    return data


@dataclass(frozen=True, eq=False)
class SplitAssignment:
    """An exchangeable partition of row ids into k portions."""

    k: int
    seed: int
    parts: tuple[np.ndarray, ...]

    def __post_init__(self):
        parts = tuple(np.asarray(p, dtype=np.int64) for p in self.parts)
        if len(parts) != self.k:
            raise ValueError("part count does not match k")
        all_ids = np.concatenate(parts)
        if len(np.unique(all_ids)) != len(all_ids):
            raise ValueError("parts are not disjoint")
        sizes = [len(p) for p in parts]
        if max(sizes) - min(sizes) > 1:
            raise ValueError("part sizes differ by more than 1")
        frozen = []
        for p in parts:
            q = p.copy()
            q.setflags(write=False)
            frozen.append(q)
        object.__setattr__(self, "parts", tuple(frozen))

    def all_ids(self) -> np.ndarray:
        return np.sort(np.concatenate(self.parts))

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "parts": [[int(i) for i in p] for p in self.parts],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitAssignment":
        return cls(int(obj["k"]), int(obj["seed"]),
                   tuple(np.array(p, dtype=np.int64) for p in obj["parts"]))


def _chunk_sizes(n: int, k: int) -> list[int]:
    base, rem = divmod(n, k)
    return [base + 1 if i < rem else base for i in range(k)]


def split_random(data: Dataset, k: int, seed: int) -> SplitAssignment:
    """Completely randomized split into k parts of near-equal size.

    After a seeded shuffle, parts take consecutive chunks; remainder rows go
    one-per-part to the lowest-indexed parts.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n = data.n_rows
    if k > n:
        raise ValueError(f"k={k} exceeds row count {n}")
    rng = np.random.default_rng(seed)
    order = data.ids[rng.permutation(n)]
    sizes = _chunk_sizes(n, k)
    parts, start = [], 0
    for s in sizes:
        parts.append(np.sort(order[start:start + s]))
        start += s
    return SplitAssignment(k, seed, tuple(parts))


def split_stratified(data: Dataset, k: int, seed: int, stratum: str) -> SplitAssignment:
    """Random split balanced within every level of a stratum column.

    Within each level the parts receive counts differing by at most one;
    remainder rows of a level go to the lowest-indexed parts.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not data.has_column(stratum):
        raise SchemaError(f"missing column: {stratum}")
    if k > data.n_rows:
        raise ValueError(f"k={k} exceeds row count {data.n_rows}")
    rng = np.random.default_rng(seed)
    col = data.column(stratum)
    buckets: list[list[int]] = [[] for _ in range(k)]
    for level in np.unique(col):
        level_ids = data.ids[col == level]
        order = level_ids[rng.permutation(len(level_ids))]
        sizes = _chunk_sizes(len(order), k)
        start = 0
        for i, s in enumerate(sizes):
            buckets[i].extend(int(x) for x in order[start:start + s])
            start += s
    parts = tuple(np.sort(np.array(b, dtype=np.int64)) for b in buckets)
    return SplitAssignment(k, seed, parts)


@dataclass(frozen=True, eq=False)
class BatchSchedule:
    """A seeded random ordering of one split part, cut into batches."""

    batch_size: int
    seed: int
    batches: tuple[np.ndarray, ...]

    def __post_init__(self):
        batches = tuple(np.asarray(b, dtype=np.int64) for b in self.batches)
        flat = np.concatenate(batches)
        if len(np.unique(flat)) != len(flat):
            raise ValueError("batches are not disjoint")
        for b in batches[:-1]:
            if len(b) != self.batch_size:
                raise ValueError("only the last batch may be short")
        frozen = []
        for b in batches:
            q = b.copy()
            q.setflags(write=False)
            frozen.append(q)
        object.__setattr__(self, "batches", tuple(frozen))

    def all_ids(self) -> np.ndarray:
        return np.concatenate(self.batches)

    def to_json(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "seed": self.seed,
            "batches": [[int(i) for i in b] for b in self.batches],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BatchSchedule":
        return cls(int(obj["batch_size"]), int(obj["seed"]),
                   tuple(np.array(b, dtype=np.int64) for b in obj["batches"]))


def batch_partition(part, batch_size: int, seed: int) -> BatchSchedule:
    """Partition one split part into randomly ordered batches.

    The same schedule object is meant to be reused across every method being
    compared, so that all see the identical case order.
    """
    part = np.asarray(part, dtype=np.int64)
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if batch_size > len(part):
        raise ValueError(f"batch_size {batch_size} exceeds part size {len(part)}")
    rng = np.random.default_rng(seed)
    order = part[rng.permutation(len(part))]
    batches = tuple(order[i:i + batch_size] for i in range(0, len(order), batch_size))
    return BatchSchedule(batch_size, seed, batches)


def save_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
