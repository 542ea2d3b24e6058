"""Synthetic correlated datasets for development, benchmarks and tests.

The flagship generator mimics a scatterplot-matrix workload: five
numeric columns drawn from a two-cluster Gaussian mixture with strong
cross-column correlation, so range-query counts carry real structure a
model can learn (multi-modal marginals, off-diagonal dependence) while
staying cheap to produce at any row count.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from neurocube.oracle import ColumnStore, from_arrays
from neurocube.schema import AttributeKind, AttributeSpec, Measure, Schema

SPLOM_NAMES = ("a", "b", "c", "d", "e")
SPLOM_DOMAIN = (-4.0, 4.0)

# Two clusters with opposite correlation signs to make every pairwise
# panel (and hence every conditional count) informative.
_CLUSTER_MEANS = np.array(
    [
        [-1.2, -0.8, 1.0, -0.5, 0.9],
        [1.1, 0.9, -0.7, 0.8, -1.0],
    ]
)
_CLUSTER_WEIGHTS = np.array([0.55, 0.45])
_FACTOR_LOADINGS = np.array(
    [
        [0.9, 0.7, -0.6, 0.5, -0.8],
        [-0.3, 0.5, 0.6, -0.7, 0.2],
    ]
)
_NOISE_SCALE = 0.55


def splom_columns(n_rows: int, seed: int = 0) -> np.ndarray:
    """Raw float columns, shape (n_rows, 5), clipped to the schema domain."""
    rng = np.random.default_rng(seed)
    which = rng.choice(len(_CLUSTER_WEIGHTS), size=n_rows, p=_CLUSTER_WEIGHTS)
    factors = rng.standard_normal((n_rows, 2))
    values = (
        _CLUSTER_MEANS[which]
        + factors @ _FACTOR_LOADINGS
        + _NOISE_SCALE * rng.standard_normal((n_rows, 5))
    )
    lo, hi = SPLOM_DOMAIN
    return np.clip(values, lo, hi - 1e-9)


def splom_schema(bins: int = 10) -> Schema:
    attrs = tuple(
        AttributeSpec(
            name=name,
            kind=AttributeKind.BINNED_CONTINUOUS,
            bins=bins,
            domain=SPLOM_DOMAIN,
        )
        for name in SPLOM_NAMES
    )
    return Schema(attributes=attrs, measure=Measure(type="count"))


def splom_store(n_rows: int, bins: int = 10, seed: int = 0) -> tuple[Schema, ColumnStore]:
    """Schema plus an already-binned store of ``n_rows`` synthetic records."""
    schema = splom_schema(bins)
    values = splom_columns(n_rows, seed)
    lo, hi = SPLOM_DOMAIN
    binned = np.floor((values - lo) / (hi - lo) * bins).astype(np.uint16)
    np.clip(binned, 0, bins - 1, out=binned)
    return schema, from_arrays(schema, [binned[:, i] for i in range(len(SPLOM_NAMES))])


def write_splom_csv(path: str | Path, n_rows: int, seed: int = 0) -> None:
    """Raw (unbinned) synthetic rows as CSV, for exercising ingestion."""
    values = splom_columns(n_rows, seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPLOM_NAMES)
        for row in values:
            writer.writerow([f"{v:.6f}" for v in row])
