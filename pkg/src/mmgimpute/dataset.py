"""Data ingestion, missingness bookkeeping and pattern-indexed row selection."""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DroppedRowsWarning, InvalidArgumentError, ParseError, SchemaError
from .graph import MAX_VARIABLES
from .patterns import Pattern

MISSING_TOKENS = ("NA", "")
# every masked-out cell holds this exact value
MISSING = np.nan


@dataclass(frozen=True)
class ColumnSpec:
    """Column name and kind.

    ``kind`` is ``"continuous"``, ``"binary"`` or ``"count"``; count columns
    take values in ``0..max_count``.
    """

    name: str
    kind: str = "continuous"
    max_count: int | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "binary", "count"):
            raise InvalidArgumentError(f"unknown column kind {self.kind!r}")
        if self.kind == "count" and (self.max_count is None or self.max_count < 1):
            raise InvalidArgumentError("count columns need max_count >= 1")
        if self.kind == "binary":
            object.__setattr__(self, "max_count", 1)

    @property
    def is_discrete(self) -> bool:
        return self.kind != "continuous"

    def check(self, value: float) -> bool:
        if self.kind == "continuous":
            return bool(np.isfinite(value))
        return float(value).is_integer() and 0 <= value <= self.max_count


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An ``n x d`` value grid with an observation mask (True = observed).

    Masked cells always hold NaN. Arrays are read-only after construction.
    """

    columns: tuple[ColumnSpec, ...]
    values: np.ndarray
    mask: np.ndarray
    n_dropped: int = 0
    _bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise InvalidArgumentError("values and mask must be matching 2-d arrays")
        if values.shape[1] != len(self.columns):
            raise InvalidArgumentError("column count does not match values")
        if values.shape[1] > MAX_VARIABLES:
            raise InvalidArgumentError(f"at most {MAX_VARIABLES} columns are supported")
        if len({c.name for c in self.columns}) != len(self.columns):
            raise InvalidArgumentError("column names must be unique")
        if np.any(mask & ~np.isfinite(values)):
            raise InvalidArgumentError("observed cells must be finite")
        values[~mask] = MISSING
        values.setflags(write=False)
        mask.setflags(write=False)
        weights = np.left_shift(np.uint64(1), np.arange(values.shape[1], dtype=np.uint64))
        bits = (mask.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
        bits.setflags(write=False)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_bits", bits)

    @classmethod
    def from_arrays(
        cls,
        values,
        mask=None,
        columns: Sequence[ColumnSpec] | Sequence[str] | None = None,
    ) -> "DataMatrix":
        """Build from a value array; NaN marks missing when ``mask`` is None."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if mask is None:
            mask = ~np.isnan(values)
        d = values.shape[1]
        if columns is None:
            columns = [ColumnSpec(f"X{j + 1}") for j in range(d)]
        columns = [c if isinstance(c, ColumnSpec) else ColumnSpec(c) for c in columns]
        return cls(tuple(columns), values, mask)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidArgumentError(f"no column named {name!r}") from None

    def row_pattern(self, i: int) -> Pattern:
        return Pattern(self.d, int(self._bits[i]))

    def row_bits(self) -> np.ndarray:
        """Response pattern of every row as a uint64 bitmask."""
        return self._bits

    def subset(self, rows) -> "DataMatrix":
        rows = np.asarray(rows, dtype=int)
        return DataMatrix(self.columns, self.values[rows], self.mask[rows])

    def with_values(self, values, mask=None) -> "DataMatrix":
        return DataMatrix(self.columns, values, self.mask if mask is None else mask)

    def complete_rows(self) -> np.ndarray:
        return np.flatnonzero(self.mask.all(axis=1))

    def equals(self, other: "DataMatrix") -> bool:
        return (
            self.columns == other.columns
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class PatternTable:
    """Rows grouped by exact response pattern, ordered by pattern bits."""

    entries: dict

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key):
        if isinstance(key, str):
            key = Pattern.from_str(key)
        return self.entries[key]

    def patterns(self) -> list[Pattern]:
        return list(self.entries)

    def items(self):
        return self.entries.items()


def pattern_table(data: DataMatrix) -> PatternTable:
    bits = data.row_bits()
    if data.n == 0:
        return PatternTable({})
    uniq, inverse = np.unique(bits, return_inverse=True)
    entries = {}
    for k, b in enumerate(uniq):
        entries[Pattern(data.d, int(b))] = np.flatnonzero(inverse == k)
    return PatternTable(entries)


def rows_at_least(data: DataMatrix, required: Pattern) -> np.ndarray:
    """Rows observing every variable in ``required``."""
    if required.d != data.d:
        raise InvalidArgumentError(f"pattern length {required.d} != data width {data.d}")
    req = np.uint64(required.bits)
    return np.flatnonzero(data.row_bits() & req == req)


def rows_with_pattern(data: DataMatrix, r: Pattern) -> np.ndarray:
    return np.flatnonzero(data.row_bits() == np.uint64(r.bits))


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[ColumnSpec]:
    """Binary if every observed cell is 0 or 1, else continuous."""
    specs = []
    for j, name in enumerate(header):
        seen = {r[j].strip() for r in rows if j < len(r)} - set(MISSING_TOKENS)
        try:
            vals = {float(v) for v in seen}
        except ValueError:
            vals = None
        kind = "binary" if vals and vals <= {0.0, 1.0} else "continuous"
        specs.append(ColumnSpec(name, kind))
    return specs


def load_csv(path: str | os.PathLike, schema: Sequence[ColumnSpec] | None = None) -> DataMatrix:
    """Read a comma-separated file with a header row.

    ``NA`` (case-sensitive) and empty cells are missing. Rows with every cell
    missing are dropped with a :class:`DroppedRowsWarning`; the count is kept
    in ``DataMatrix.n_dropped``. When ``schema`` is None it is inferred with
    :func:`infer_schema`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("empty file, no header row") from None
        raw = [r for r in reader if r]
    if schema is None:
        schema = infer_schema(header, raw)
    names = [c.name for c in schema]
    if header != names:
        raise SchemaError(f"header {header} does not match schema {names}")
    d = len(schema)
    values = np.full((len(raw), d), MISSING)
    mask = np.zeros((len(raw), d), dtype=bool)
    for i, row in enumerate(raw):
        if len(row) != d:
            raise ParseError(f"expected {d} cells, got {len(row)}", row=i + 1)
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell in MISSING_TOKENS:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"unparseable cell {cell!r}", row=i + 1, column=names[j]) from None
            if not schema[j].check(v):
                raise ParseError(
                    f"value {cell!r} invalid for {schema[j].kind} column", row=i + 1, column=names[j]
                )
            values[i, j] = v
            mask[i, j] = True
    keep = mask.any(axis=1) if d else np.ones(len(raw), dtype=bool)
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"dropped {dropped} all-missing row(s) from {path}", DroppedRowsWarning, stacklevel=2)
    return DataMatrix(tuple(schema), values[keep], mask[keep], n_dropped=dropped)


def format_value(v: float, spec: ColumnSpec) -> str:
    if spec.is_discrete:
        return str(int(round(v)))
    return repr(float(v))


def write_csv(data: DataMatrix, path: str | os.PathLike) -> None:
    """Write with ``NA`` for missing cells; floats use round-trip ``repr``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for i in range(data.n):
            w.writerow(
                format_value(data.values[i, j], c) if data.mask[i, j] else "NA"
                for j, c in enumerate(data.columns)
            )
