"""Application model: attribute names, kinds, and discretization.

A schema is loaded from a JSON file and is the single source of truth for
vector widths and network shapes everywhere else.  Attributes come in four
kinds; all of them discretize values into integer bins:

* ``categorical``       - an ordered list of labels, one bin per label.
* ``temporal-cyclic``   - numeric with a wrap-around interpretation (hour,
                          month, weekday).  Domain defaults to ``[0, bins]``
                          so integer-coded values map straight to bins.
* ``binned-continuous`` - numeric, uniformly binned over ``[min, max]``.
* ``geospatial-2d``     - two numeric axes binned independently; the only
                          kind whose encoding width (x_bins + y_bins)
                          differs from its cell count (x_bins * y_bins).

Schema file format (``schema_version`` 1)::

    {
      "schema_version": 1,
      "attributes": [
        {"name": "month", "kind": "temporal-cyclic", "bins": 12,
         "domain": [1, 13]},
        {"name": "a0", "kind": "binned-continuous", "bins": 10,
         "domain": [0.0, 1.0]},
        {"name": "carrier", "kind": "categorical",
         "labels": ["AA", "UA", "DL"]},
        {"name": "location", "kind": "geospatial-2d",
         "bins": {"x_bins": 20, "y_bins": 20},
         "domain": {"x": [-74.3, -73.6], "y": [40.5, 41.0]},
         "columns": {"x": "longitude", "y": "latitude"}}
      ],
      "measure": {"type": "count"}
    }

``measure`` is either ``{"type": "count"}`` or
``{"type": "average", "column": "<csv column>"}``.  The optional
``column``/``columns`` fields name the CSV source columns when they differ
from the attribute name (geospatial defaults to ``<name>_x``/``<name>_y``).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

SCHEMA_VERSION = 1

# Bin indices are stored as u16 in the column cache format.
MAX_BINS = 65535


class SchemaError(ValueError):
    """Raised when a schema file or spec violates an invariant."""


class OutOfDomainError(ValueError):
    """A raw value falls outside its attribute's declared domain.

    Ingestion catches this per row, counts the row as rejected, and skips it.
    """

    def __init__(self, attribute: str, value):
        super().__init__(f"value {value!r} out of domain for attribute {attribute!r}")
        self.attribute = attribute
        self.value = value


class AttributeKind(str, Enum):
    CATEGORICAL = "categorical"
    TEMPORAL_CYCLIC = "temporal-cyclic"
    BINNED_CONTINUOUS = "binned-continuous"
    GEOSPATIAL_2D = "geospatial-2d"


_NUMERIC_KINDS = (AttributeKind.TEMPORAL_CYCLIC, AttributeKind.BINNED_CONTINUOUS)


@dataclass(frozen=True)
class AttributeSpec:
    """One attribute of the application model.

    ``bins`` is the cardinality m for 1-D kinds.  Geospatial attributes use
    ``x_bins``/``y_bins`` instead and leave ``bins`` at 0.
    """

    name: str
    kind: AttributeKind
    bins: int = 0
    x_bins: int = 0
    y_bins: int = 0
    domain: tuple[float, float] | None = None
    x_domain: tuple[float, float] | None = None
    y_domain: tuple[float, float] | None = None
    labels: tuple[str, ...] | None = None
    # CSV source columns; default to the attribute name (1-D) or
    # <name>_x / <name>_y (geospatial).
    column: str | None = None
    x_column: str | None = None
    y_column: str | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if self.kind is AttributeKind.GEOSPATIAL_2D:
            for axis, n in (("x_bins", self.x_bins), ("y_bins", self.y_bins)):
                if not 1 <= n <= MAX_BINS:
                    raise SchemaError(f"attribute {self.name!r}: {axis} must be in [1, {MAX_BINS}], got {n}")
            for axis, dom in (("x", self.x_domain), ("y", self.y_domain)):
                _check_domain(self.name, f"{axis}_domain", dom)
        elif self.kind is AttributeKind.CATEGORICAL:
            if not self.labels:
                raise SchemaError(f"attribute {self.name!r}: categorical requires labels")
            if len(set(self.labels)) != len(self.labels):
                dup = next(l for l in self.labels if self.labels.count(l) > 1)
                raise SchemaError(f"attribute {self.name!r}: duplicate label {dup!r}")
            if self.bins and self.bins != len(self.labels):
                raise SchemaError(
                    f"attribute {self.name!r}: bins={self.bins} disagrees with {len(self.labels)} labels"
                )
            object.__setattr__(self, "bins", len(self.labels))
        else:
            if not 1 <= self.bins <= MAX_BINS:
                raise SchemaError(f"attribute {self.name!r}: bins must be in [1, {MAX_BINS}], got {self.bins}")
            if self.domain is None and self.kind is AttributeKind.TEMPORAL_CYCLIC:
                # Integer-coded cyclic values: bin index == floor(value).
                object.__setattr__(self, "domain", (0.0, float(self.bins)))
            _check_domain(self.name, "domain", self.domain)

    @property
    def is_geospatial(self) -> bool:
        return self.kind is AttributeKind.GEOSPATIAL_2D

    @property
    def width(self) -> int:
        return encoding_width(self)

    @property
    def group_size(self) -> int:
        """Number of entries a group-by over this attribute produces."""
        if self.is_geospatial:
            return self.x_bins * self.y_bins
        return self.bins

    def source_columns(self) -> tuple[str, ...]:
        if self.is_geospatial:
            return (self.x_column or f"{self.name}_x", self.y_column or f"{self.name}_y")
        return (self.column or self.name,)

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind.value}
        if self.is_geospatial:
            d["bins"] = {"x_bins": self.x_bins, "y_bins": self.y_bins}
            d["domain"] = {"x": list(self.x_domain), "y": list(self.y_domain)}
            if self.x_column or self.y_column:
                d["columns"] = {"x": self.x_column, "y": self.y_column}
        elif self.kind is AttributeKind.CATEGORICAL:
            d["labels"] = list(self.labels)
            if self.column:
                d["column"] = self.column
        else:
            d["bins"] = self.bins
            d["domain"] = list(self.domain)
            if self.column:
                d["column"] = self.column
        return d


def _check_domain(name: str, field_name: str, dom) -> None:
    if dom is None:
        raise SchemaError(f"attribute {name!r}: missing {field_name}")
    lo, hi = dom
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise SchemaError(f"attribute {name!r}: malformed {field_name} {dom!r}, need min < max")


def encoding_width(spec: AttributeSpec) -> int:
    """Width of the attribute's segment in the many-hot input vector."""
    if spec.is_geospatial:
        return spec.x_bins + spec.y_bins
    return spec.bins


@dataclass(frozen=True)
class Measure:
    type: str  # "count" | "average"
    column: str | None = None

    def __post_init__(self):
        if self.type not in ("count", "average"):
            raise SchemaError(f"unknown measure type {self.type!r}")
        if self.type == "average" and not self.column:
            raise SchemaError("average measure requires a column")

    def to_dict(self) -> dict:
        if self.type == "count":
            return {"type": "count"}
        return {"type": "average", "column": self.column}


@dataclass(frozen=True)
class Schema:
    """Ordered attributes plus the aggregation measure.

    Immutable after construction; safe to share across threads.
    """

    attributes: tuple[AttributeSpec, ...]
    measure: Measure = field(default_factory=lambda: Measure("count"))

    def __post_init__(self):
        if not self.attributes:
            raise SchemaError("schema needs at least one attribute")
        seen: set[str] = set()
        for a in self.attributes:
            if a.name in seen:
                raise SchemaError(f"duplicate attribute name {a.name!r}")
            seen.add(a.name)

    @property
    def input_width(self) -> int:
        return sum(encoding_width(a) for a in self.attributes)

    def attribute(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(f"unknown attribute {name!r}")

    def attribute_index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise KeyError(f"unknown attribute {name!r}")

    def segments(self) -> list[tuple[int, int]]:
        """Per-attribute (offset, width) slices of the input vector."""
        out, off = [], 0
        for a in self.attributes:
            w = encoding_width(a)
            out.append((off, w))
            off += w
        return out

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "attributes": [a.to_dict() for a in self.attributes],
            "measure": self.measure.to_dict(),
        }

    @property
    def fingerprint(self) -> str:
        """sha256 of the canonical schema JSON; identical schema, identical widths."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_attribute(raw: dict) -> AttributeSpec:
    name = raw.get("name")
    if not name or not isinstance(name, str):
        raise SchemaError(f"attribute entry {raw!r} is missing a name")
    kind_s = raw.get("kind")
    try:
        kind = AttributeKind(kind_s)
    except ValueError:
        raise SchemaError(f"attribute {name!r}: unknown kind {kind_s!r}") from None

    if kind is AttributeKind.GEOSPATIAL_2D:
        bins = raw.get("bins")
        if not isinstance(bins, dict) or "x_bins" not in bins or "y_bins" not in bins:
            raise SchemaError(f"attribute {name!r}: geospatial bins must be {{x_bins, y_bins}}")
        dom = raw.get("domain")
        if not isinstance(dom, dict) or "x" not in dom or "y" not in dom:
            raise SchemaError(f"attribute {name!r}: geospatial domain must be {{x: [..], y: [..]}}")
        cols = raw.get("columns") or {}
        return AttributeSpec(
            name=name,
            kind=kind,
            x_bins=int(bins["x_bins"]),
            y_bins=int(bins["y_bins"]),
            x_domain=tuple(float(v) for v in dom["x"]),
            y_domain=tuple(float(v) for v in dom["y"]),
            x_column=cols.get("x"),
            y_column=cols.get("y"),
        )
    if kind is AttributeKind.CATEGORICAL:
        labels = raw.get("labels")
        if not isinstance(labels, list) or not labels:
            raise SchemaError(f"attribute {name!r}: categorical requires a labels list")
        return AttributeSpec(
            name=name, kind=kind, labels=tuple(str(l) for l in labels), column=raw.get("column")
        )
    bins = raw.get("bins")
    if not isinstance(bins, int):
        raise SchemaError(f"attribute {name!r}: bins must be an integer, got {bins!r}")
    dom = raw.get("domain")
    domain = tuple(float(v) for v in dom) if dom is not None else None
    return AttributeSpec(name=name, kind=kind, bins=bins, domain=domain, column=raw.get("column"))


def schema_from_dict(doc: dict) -> Schema:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    attrs_raw = doc.get("attributes")
    if not isinstance(attrs_raw, list) or not attrs_raw:
        raise SchemaError("schema requires a non-empty attributes list")
    attributes = tuple(_parse_attribute(a) for a in attrs_raw)
    m_raw = doc.get("measure", {"type": "count"})
    measure = Measure(type=m_raw.get("type", "count"), column=m_raw.get("column"))
    return Schema(attributes=attributes, measure=measure)


def load_schema(path: str | Path) -> Schema:
    """Load and validate a schema file.  Raises SchemaError with the
    offending attribute named on any invariant violation."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"schema file {path}: parse failure: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"schema file {path}: top level must be an object")
    return schema_from_dict(doc)


def _bin_numeric(name: str, value: float, lo: float, hi: float, m: int) -> int:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise OutOfDomainError(name, value) from None
    if math.isnan(v) or v < lo or v > hi:
        raise OutOfDomainError(name, value)
    idx = int(math.floor((v - lo) / (hi - lo) * m))
    # v == hi lands on m; round-off can do the same for v just below hi.
    return min(idx, m - 1)


def bin_value(spec: AttributeSpec, raw):
    """Map a raw column value to its bin index.

    1-D kinds take a scalar (numeric value or categorical label) and return
    an int in [0, bins).  Geospatial takes an (x, y) pair and returns a pair
    of indices.  Numeric binning is uniform-width over the domain, with the
    domain max clamped into the last bin.  Raises OutOfDomainError for
    values outside the declared domain or labels outside the list.
    """
    if spec.is_geospatial:
        x, y = raw
        return (
            _bin_numeric(spec.name, x, spec.x_domain[0], spec.x_domain[1], spec.x_bins),
            _bin_numeric(spec.name, y, spec.y_domain[0], spec.y_domain[1], spec.y_bins),
        )
    if spec.kind is AttributeKind.CATEGORICAL:
        try:
            return spec.labels.index(raw)
        except ValueError:
            raise OutOfDomainError(spec.name, raw) from None
    return _bin_numeric(spec.name, raw, spec.domain[0], spec.domain[1], spec.bins)
