"""Shared schemas, stores and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from neurocube.oracle import ColumnStore, SelectionState, from_arrays
from neurocube.schema import AttributeKind, AttributeSpec, Measure, Schema


def make_schema(*specs, measure: Measure | None = None) -> Schema:
    return Schema(attributes=tuple(specs), measure=measure or Measure("count"))


def temporal(name: str, bins: int) -> AttributeSpec:
    return AttributeSpec(name=name, kind=AttributeKind.TEMPORAL_CYCLIC, bins=bins)


def continuous(name: str, bins: int, domain=(0.0, 1.0)) -> AttributeSpec:
    return AttributeSpec(
        name=name, kind=AttributeKind.BINNED_CONTINUOUS, bins=bins, domain=domain
    )


def categorical(name: str, labels: tuple[str, ...]) -> AttributeSpec:
    return AttributeSpec(name=name, kind=AttributeKind.CATEGORICAL, labels=labels)


def geospatial(name: str, x_bins: int, y_bins: int) -> AttributeSpec:
    return AttributeSpec(
        name=name,
        kind=AttributeKind.GEOSPATIAL_2D,
        x_bins=x_bins,
        y_bins=y_bins,
        x_domain=(-180.0, 180.0),
        y_domain=(-90.0, 90.0),
    )


@pytest.fixture
def checkin_schema() -> Schema:
    """Check-in style schema: month(12), dayofweek(7), hour(24), geo(20x20)."""
    return make_schema(
        temporal("month", 12),
        temporal("dayofweek", 7),
        temporal("hour", 24),
        geospatial("location", 20, 20),
    )


@pytest.fixture
def small_schema() -> Schema:
    """Two tiny 1-D attributes; cheap enough for exhaustive checks."""
    return make_schema(temporal("hour", 4), categorical("kind", ("a", "b", "c")))


@pytest.fixture
def hour_store() -> tuple[Schema, ColumnStore]:
    """Single 10-bin hour attribute over four records at bins [3, 3, 7, 9]."""
    schema = make_schema(temporal("hour", 10))
    return schema, from_arrays(schema, [np.array([3, 3, 7, 9])])


def random_store(
    schema: Schema, n_rows: int, seed: int = 0, measure_values: np.ndarray | None = None
) -> ColumnStore:
    """Uniformly random bin indices for every attribute of the schema."""
    rng = np.random.default_rng(seed)
    cols = []
    for spec in schema.attributes:
        if spec.is_geospatial:
            cols.append(
                (
                    rng.integers(0, spec.x_bins, n_rows).astype(np.uint16),
                    rng.integers(0, spec.y_bins, n_rows).astype(np.uint16),
                )
            )
        else:
            cols.append(rng.integers(0, spec.bins, n_rows).astype(np.uint16))
    return from_arrays(schema, cols, measure_values=measure_values)


def random_states(schema: Schema, n: int, seed: int = 0) -> list[SelectionState]:
    from neurocube.datagen import sample_state

    rng = np.random.default_rng(seed)
    return [sample_state(schema, rng) for _ in range(n)]


def encoded_random_queries(schema: Schema, n: int, seed: int = 0) -> np.ndarray:
    from neurocube.encoding import encode_states

    return encode_states(schema, random_states(schema, n, seed))


def finite_difference_worst_error(
    model, X: np.ndarray, y: np.ndarray, eps: float = 1e-6, per_param: int = 6, seed: int = 0
) -> float:
    """Worst relative disagreement between backprop and central differences,
    sampling ``per_param`` entries of every parameter tensor."""
    from neurocube.nn import train_step_loss
    from neurocube.nn.model import batch_loss, forward

    rng = np.random.default_rng(seed)
    _, grads = train_step_loss(model, X, y)
    worst = 0.0
    for p, g in zip(model.parameters(), grads):
        flat, gflat = p.ravel(), g.ravel()
        idxs = rng.choice(flat.size, size=min(per_param, flat.size), replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            up = batch_loss(model, forward(model, X), X, y)[0]
            flat[i] = orig - eps
            down = batch_loss(model, forward(model, X), X, y)[0]
            flat[i] = orig
            fd = (up - down) / (2.0 * eps)
            worst = max(worst, abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1.0))
    return worst
