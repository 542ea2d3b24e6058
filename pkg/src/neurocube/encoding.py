"""Many-hot encoding of selection states.

A query vector concatenates one binary segment per attribute: bit j of a
1-D segment is 1 iff bin j is selected; a geospatial segment is the x-axis
vector followed by the y-axis vector, each a contiguous run of 1s.
Vectors are float64 0.0/1.0 so they can feed dense layers directly.
"""

from __future__ import annotations

import numpy as np

from neurocube.oracle import SelectionState
from neurocube.schema import AttributeSpec, Schema


class MalformedQueryError(ValueError):
    """A vector that is not a valid many-hot query (wrong values, empty or
    non-contiguous runs)."""


def encode_state(schema: Schema, state: SelectionState) -> np.ndarray:
    """Encode one state into a (input_width,) 0/1 vector."""
    state.validate(schema)
    q = np.zeros(schema.input_width)
    off = 0
    for spec, rng in zip(schema.attributes, state.ranges):
        if spec.is_geospatial:
            (xlo, xhi), (ylo, yhi) = rng
            q[off + xlo : off + xhi] = 1.0
            q[off + spec.x_bins + ylo : off + spec.x_bins + yhi] = 1.0
            off += spec.x_bins + spec.y_bins
        else:
            lo, hi = rng
            q[off + lo : off + hi] = 1.0
            off += spec.bins
    return q


def encode_states(schema: Schema, states: list[SelectionState]) -> np.ndarray:
    """Encode a batch of states into an (n, input_width) matrix."""
    out = np.zeros((len(states), schema.input_width))
    for i, s in enumerate(states):
        out[i] = encode_state(schema, s)
    return out


def _run_bounds(name: str, segment: np.ndarray) -> tuple[int, int]:
    ones = np.flatnonzero(segment == 1.0)
    if len(ones) == 0:
        raise MalformedQueryError(f"attribute {name!r}: empty selection run")
    lo, hi = int(ones[0]), int(ones[-1]) + 1
    if hi - lo != len(ones):
        raise MalformedQueryError(f"attribute {name!r}: non-contiguous selection run")
    return lo, hi


def decode_query(schema: Schema, q: np.ndarray) -> SelectionState:
    """Inverse of encode_state; raises MalformedQueryError on anything that
    is not a valid many-hot vector."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (schema.input_width,):
        raise MalformedQueryError(f"query width {q.shape} does not match schema width {schema.input_width}")
    if not np.all((q == 0.0) | (q == 1.0)):
        raise MalformedQueryError("query entries must be exactly 0 or 1")
    ranges = []
    off = 0
    for spec in schema.attributes:
        if spec.is_geospatial:
            xr = _run_bounds(spec.name, q[off : off + spec.x_bins])
            yr = _run_bounds(spec.name, q[off + spec.x_bins : off + spec.x_bins + spec.y_bins])
            ranges.append((xr, yr))
            off += spec.x_bins + spec.y_bins
        else:
            ranges.append(_run_bounds(spec.name, q[off : off + spec.bins]))
            off += spec.bins
    return SelectionState(tuple(ranges))


def enumerate_ranges(spec: AttributeSpec) -> list[tuple[int, int]]:
    """All m(m+1)/2 contiguous half-open ranges of a 1-D attribute,
    ordered by (length, lo).  Geospatial attributes are rejected: the
    rectangle count is quartic in the grid size."""
    if spec.is_geospatial:
        raise ValueError(f"attribute {spec.name!r}: range enumeration is for 1-D attributes")
    m = spec.bins
    return [(lo, lo + length) for length in range(1, m + 1) for lo in range(0, m - length + 1)]


def group_by_queries(schema: Schema, state: SelectionState, target: str) -> np.ndarray:
    """Query matrix for a group-by over ``target`` within ``state``.

    Row j is the state's encoding with the target segment replaced by the
    j-th singleton; geospatial targets get one row per cell, y-outer, the
    same order the oracle's group_by uses.  Built by tiling the base
    encoding, which keeps dashboard expansion off the per-query path.
    """
    base = encode_state(schema, state)
    ti = schema.attribute_index(target)
    spec = schema.attributes[ti]
    off = schema.segments()[ti][0]
    rows = spec.group_size
    queries = np.tile(base, (rows, 1))
    queries[:, off : off + spec.width] = 0.0
    if spec.is_geospatial:
        cells = np.arange(rows)
        xs = cells % spec.x_bins
        ys = cells // spec.x_bins
        queries[cells, off + xs] = 1.0
        queries[cells, off + spec.x_bins + ys] = 1.0
    else:
        queries[np.arange(rows), off + np.arange(rows)] = 1.0
    return queries
