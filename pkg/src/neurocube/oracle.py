"""Exact in-memory columnar aggregation engine.

The oracle is the ground truth: every training target comes from here, and
tests compare it against an independent naive row scan.  Evaluation is a
vectorized scan with per-attribute predicate masks; no cube is
materialized, because the oracle only needs to be correct and fast enough
offline, interactive latency is the model's job.

The binned store can be cached to disk: magic ``NCST``, version u32,
record count u64, then per column (schema order, geospatial contributing
an x column then a y column) little-endian u16 bin indices, then f64
measure values when the measure is an average.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from neurocube.schema import AttributeKind, AttributeSpec, Schema, SchemaError

CACHE_MAGIC = b"NCST"
CACHE_VERSION = 1

Range = tuple[int, int]
GeoRange = tuple[Range, Range]


class StoreFormatError(ValueError):
    """Raised for a corrupt or incompatible store cache file."""


@dataclass(frozen=True)
class SelectionState:
    """One half-open bin-index range per attribute; the unit of querying.

    1-D attributes carry ``(lo, hi)``; geospatial carry
    ``((x_lo, x_hi), (y_lo, y_hi))``.  "No selection" is the full range
    ``[0, m)``, so a state always constrains every attribute.
    """

    ranges: tuple[Range | GeoRange, ...]

    @classmethod
    def full(cls, schema: Schema) -> "SelectionState":
        """The default dashboard state: every attribute fully selected."""
        out = []
        for a in schema.attributes:
            if a.is_geospatial:
                out.append(((0, a.x_bins), (0, a.y_bins)))
            else:
                out.append((0, a.bins))
        return cls(tuple(out))

    @classmethod
    def of(cls, schema: Schema, **selections) -> "SelectionState":
        """Full state with the named attributes overridden, e.g.
        ``SelectionState.of(schema, hour=(0, 8))``."""
        state = cls.full(schema)
        for name, rng in selections.items():
            state = state.replace(schema.attribute_index(name), rng)
        state.validate(schema)
        return state

    def replace(self, index: int, rng) -> "SelectionState":
        ranges = list(self.ranges)
        ranges[index] = rng
        return SelectionState(tuple(ranges))

    def validate(self, schema: Schema) -> None:
        if len(self.ranges) != len(schema.attributes):
            raise ValueError(
                f"state has {len(self.ranges)} ranges for {len(schema.attributes)} attributes"
            )
        for spec, rng in zip(schema.attributes, self.ranges):
            if spec.is_geospatial:
                (xlo, xhi), (ylo, yhi) = rng
                _check_range(spec.name, xlo, xhi, spec.x_bins)
                _check_range(spec.name, ylo, yhi, spec.y_bins)
            else:
                lo, hi = rng
                _check_range(spec.name, lo, hi, spec.bins)

    def to_dict(self, schema: Schema) -> dict:
        out: dict = {}
        for spec, rng in zip(schema.attributes, self.ranges):
            if spec.is_geospatial:
                (xlo, xhi), (ylo, yhi) = rng
                out[spec.name] = {"x": {"lo": int(xlo), "hi": int(xhi)}, "y": {"lo": int(ylo), "hi": int(yhi)}}
            else:
                out[spec.name] = {"lo": int(rng[0]), "hi": int(rng[1])}
        return out

    @classmethod
    def from_dict(cls, schema: Schema, doc: dict) -> "SelectionState":
        """Parse the wire format; attributes absent from ``doc`` default to
        the full range.  Unknown names raise KeyError."""
        known = {a.name for a in schema.attributes}
        for name in doc:
            if name not in known:
                raise KeyError(f"unknown attribute {name!r}")
        ranges = []
        for spec in schema.attributes:
            sel = doc.get(spec.name)
            if sel is None:
                if spec.is_geospatial:
                    ranges.append(((0, spec.x_bins), (0, spec.y_bins)))
                else:
                    ranges.append((0, spec.bins))
            elif spec.is_geospatial:
                ranges.append(
                    (
                        (int(sel["x"]["lo"]), int(sel["x"]["hi"])),
                        (int(sel["y"]["lo"]), int(sel["y"]["hi"])),
                    )
                )
            else:
                ranges.append((int(sel["lo"]), int(sel["hi"])))
        state = cls(tuple(ranges))
        state.validate(schema)
        return state


def _check_range(name: str, lo, hi, m: int) -> None:
    if not (isinstance(lo, (int, np.integer)) and isinstance(hi, (int, np.integer))):
        raise ValueError(f"attribute {name!r}: range bounds must be integers, got ({lo!r}, {hi!r})")
    if not 0 <= lo < hi <= m:
        raise ValueError(f"attribute {name!r}: invalid range [{lo}, {hi}) for {m} bins")


@dataclass
class ColumnStore:
    """Dense per-attribute bin-index arrays, one entry per record.

    Geospatial attributes hold a pair (x_indices, y_indices).  Immutable
    after ingest by convention; group_by calls may run concurrently.
    """

    schema: Schema
    columns: list[np.ndarray | tuple[np.ndarray, np.ndarray]]
    measure_values: np.ndarray | None
    n_records: int

    def __post_init__(self):
        for spec, col in zip(self.schema.attributes, self.columns):
            arrs = col if spec.is_geospatial else (col,)
            caps = (spec.x_bins, spec.y_bins) if spec.is_geospatial else (spec.bins,)
            for arr, cap in zip(arrs, caps):
                if len(arr) != self.n_records:
                    raise ValueError(f"column {spec.name!r} has {len(arr)} entries for {self.n_records} records")
                if len(arr) and int(arr.max()) >= cap:
                    raise ValueError(f"column {spec.name!r} holds bin {int(arr.max())} >= cardinality {cap}")
        if self.measure_values is not None and len(self.measure_values) != self.n_records:
            raise ValueError("measure array length does not match record count")


def _parse_numeric(values: list[str]) -> np.ndarray:
    """Parse strings to f64, NaN where unparseable (NaN never binning in-domain)."""
    out = np.empty(len(values))
    for i, s in enumerate(values):
        try:
            out[i] = float(s)
        except ValueError:
            out[i] = np.nan
    return out


def _bin_numeric_column(vals: np.ndarray, lo: float, hi: float, m: int):
    """Vectorized twin of schema.bin_value's numeric rule."""
    valid = ~np.isnan(vals) & (vals >= lo) & (vals <= hi)
    scaled = np.zeros(len(vals))
    np.floor((vals - lo) / (hi - lo) * m, where=valid, out=scaled)
    idx = np.minimum(scaled.astype(np.int64), m - 1)
    idx[~valid] = 0
    return idx.astype(np.uint16), valid


def _bin_column(spec: AttributeSpec, raw_cols: list[list[str]]):
    """Returns (binned arrays, per-row validity mask) for one attribute."""
    if spec.is_geospatial:
        xv = _parse_numeric(raw_cols[0])
        yv = _parse_numeric(raw_cols[1])
        xi, xok = _bin_numeric_column(xv, spec.x_domain[0], spec.x_domain[1], spec.x_bins)
        yi, yok = _bin_numeric_column(yv, spec.y_domain[0], spec.y_domain[1], spec.y_bins)
        return (xi, yi), xok & yok
    if spec.kind is AttributeKind.CATEGORICAL:
        lut = {label: i for i, label in enumerate(spec.labels)}
        idx = np.array([lut.get(v, -1) for v in raw_cols[0]], dtype=np.int64)
        valid = idx >= 0
        idx[~valid] = 0
        return idx.astype(np.uint16), valid
    vals = _parse_numeric(raw_cols[0])
    return _bin_numeric_column(vals, spec.domain[0], spec.domain[1], spec.bins)


def ingest_csv(schema: Schema, path: str | Path) -> tuple[ColumnStore, int]:
    """Bin every parseable in-domain row of a CSV file.

    Returns the store and the number of rejected rows.  A row is rejected
    when any needed cell is unparseable or out of domain.  A missing header
    column is fatal.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        col_index: dict[str, int] = {h: i for i, h in enumerate(header)}

        needed: list[str] = []
        for spec in schema.attributes:
            needed.extend(spec.source_columns())
        if schema.measure.type == "average":
            needed.append(schema.measure.column)
        for name in needed:
            if name not in col_index:
                raise SchemaError(f"{path}: missing column {name!r}")

        raw: dict[str, list[str]] = {name: [] for name in needed}
        width = len(header)
        for row in reader:
            if len(row) != width:
                row = row + [""] * (width - len(row)) if len(row) < width else row
            for name in needed:
                raw[name].append(row[col_index[name]])

    n_rows = len(raw[needed[0]]) if needed else 0
    valid = np.ones(n_rows, dtype=bool)
    binned = []
    for spec in schema.attributes:
        cols = [raw[c] for c in spec.source_columns()]
        b, ok = _bin_column(spec, cols)
        binned.append(b)
        valid &= ok

    measure = None
    if schema.measure.type == "average":
        mv = _parse_numeric(raw[schema.measure.column])
        valid &= ~np.isnan(mv)
        measure = mv

    columns = []
    for spec, b in zip(schema.attributes, binned):
        if spec.is_geospatial:
            columns.append((b[0][valid], b[1][valid]))
        else:
            columns.append(b[valid])
    if measure is not None:
        measure = measure[valid].astype(np.float64)

    n_kept = int(valid.sum())
    store = ColumnStore(schema=schema, columns=columns, measure_values=measure, n_records=n_kept)
    return store, n_rows - n_kept


def from_arrays(schema: Schema, columns, measure_values=None) -> ColumnStore:
    """Build a store from already-binned index arrays (tests, synthetic data)."""
    cols = []
    n = None
    for spec, col in zip(schema.attributes, columns):
        if spec.is_geospatial:
            x, y = col
            cols.append((np.asarray(x, dtype=np.uint16), np.asarray(y, dtype=np.uint16)))
            n = len(cols[-1][0])
        else:
            cols.append(np.asarray(col, dtype=np.uint16))
            n = len(cols[-1])
    mv = None if measure_values is None else np.asarray(measure_values, dtype=np.float64)
    return ColumnStore(schema=schema, columns=cols, measure_values=mv, n_records=0 if n is None else n)


def _attr_mask(store: ColumnStore, i: int, rng) -> np.ndarray:
    spec = store.schema.attributes[i]
    if spec.is_geospatial:
        (xlo, xhi), (ylo, yhi) = rng
        x, y = store.columns[i]
        return (x >= xlo) & (x < xhi) & (y >= ylo) & (y < yhi)
    lo, hi = rng
    col = store.columns[i]
    return (col >= lo) & (col < hi)


def _state_mask(store: ColumnStore, state: SelectionState, skip: int | None = None) -> np.ndarray:
    mask = np.ones(store.n_records, dtype=bool)
    for i, rng in enumerate(state.ranges):
        if i == skip:
            continue
        mask &= _attr_mask(store, i, rng)
    return mask


def aggregate(store: ColumnStore, state: SelectionState) -> float:
    """Aggregate over the records matching every range of the state.

    Count measure: the number of matching records.  Average measure: the
    mean of the measure column over them, NaN when no record matches (the
    empty-aggregate signal).
    """
    state.validate(store.schema)
    mask = _state_mask(store, state)
    if store.schema.measure.type == "count":
        return float(mask.sum())
    n = int(mask.sum())
    if n == 0:
        return float("nan")
    return float(store.measure_values[mask].sum() / n)


def _cell_index(store: ColumnStore, i: int) -> tuple[np.ndarray, int]:
    """Flattened per-record group index for attribute i, plus group count.

    Geospatial cells are laid out y-outer: flat = y * x_bins + x.
    """
    spec = store.schema.attributes[i]
    if spec.is_geospatial:
        x, y = store.columns[i]
        return y.astype(np.int64) * spec.x_bins + x.astype(np.int64), spec.x_bins * spec.y_bins
    return store.columns[i].astype(np.int64), spec.bins


def group_by(store: ColumnStore, state: SelectionState, target: str) -> np.ndarray:
    """Vector of aggregates with the target attribute swept over its bins.

    Entry j equals ``aggregate`` of the state with the target's range
    replaced by the singleton ``[j, j+1)``; for a geospatial target the
    vector covers all cells in y-outer row-major order.  Average cells with
    no matching record are NaN.
    """
    state.validate(store.schema)
    ti = store.schema.attribute_index(target)
    mask = _state_mask(store, state, skip=ti)
    cells, n_groups = _cell_index(store, ti)
    sel = cells[mask]
    counts = np.bincount(sel, minlength=n_groups).astype(np.float64)
    if store.schema.measure.type == "count":
        return counts
    sums = np.bincount(sel, weights=store.measure_values[mask], minlength=n_groups)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


class EmptyAggregate:
    """Namespace for tests: helpers around the NaN empty-average signal."""

    @staticmethod
    def is_empty(value: float) -> bool:
        return isinstance(value, float) and value != value


def save_store(store: ColumnStore, path: str | Path) -> None:
    """Write the binned store in the binary cache format."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IQ", CACHE_VERSION, store.n_records))
        for spec, col in zip(store.schema.attributes, store.columns):
            arrs = col if spec.is_geospatial else (col,)
            for arr in arrs:
                fh.write(np.ascontiguousarray(arr, dtype="<u2").tobytes())
        if store.measure_values is not None:
            fh.write(np.ascontiguousarray(store.measure_values, dtype="<f8").tobytes())


def load_store(schema: Schema, path: str | Path) -> ColumnStore:
    """Read a cache written by save_store; the schema decides the layout."""
    blob = Path(path).read_bytes()
    if blob[:4] != CACHE_MAGIC:
        raise StoreFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, n = struct.unpack_from("<IQ", blob, 4)
    if version != CACHE_VERSION:
        raise StoreFormatError(f"{path}: unsupported cache version {version}")
    off = 16
    columns: list = []
    for spec in schema.attributes:
        n_arrays = 2 if spec.is_geospatial else 1
        arrs = []
        for _ in range(n_arrays):
            end = off + 2 * n
            if end > len(blob):
                raise StoreFormatError(f"{path}: truncated column data")
            arrs.append(np.frombuffer(blob[off:end], dtype="<u2").copy())
            off = end
        columns.append(tuple(arrs) if spec.is_geospatial else arrs[0])
    measure = None
    if schema.measure.type == "average":
        end = off + 8 * n
        if end > len(blob):
            raise StoreFormatError(f"{path}: truncated measure data")
        measure = np.frombuffer(blob[off:end], dtype="<f8").copy()
        off = end
    if off != len(blob):
        raise StoreFormatError(f"{path}: {len(blob) - off} trailing bytes")
    try:
        return ColumnStore(schema=schema, columns=columns, measure_values=measure, n_records=n)
    except ValueError as e:
        raise StoreFormatError(f"{path}: cache does not match schema: {e}") from e
