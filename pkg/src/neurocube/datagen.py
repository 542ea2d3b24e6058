"""Training-set generation: the user model.

Random UI states stand in for user interaction.  Each state expands into
one group-by query per attribute bin (the full refresh a dashboard would
issue), with targets answered by the exact oracle.  Mini-batches are built
from whole states so that low-cardinality attributes are not drowned out
by high-cardinality ones.

Set file format: magic ``NCTS``, version u32, fingerprint length u16 +
utf-8 fingerprint, seed u64, strategy u8, n_states u32, n_samples u64,
query width u32; then per sample: state id u32, query bitset
(little-endian bit order, ceil(width / 8) bytes), target f64, empty flag
u8.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from neurocube.encoding import encode_state, group_by_queries
from neurocube.oracle import ColumnStore, SelectionState, group_by
from neurocube.schema import Schema

SET_MAGIC = b"NCTS"
SET_VERSION = 1


class SetFormatError(ValueError):
    """Raised for a corrupt or incompatible training-set file."""


class RangeStrategy(IntEnum):
    """How a random range over m bins is drawn.

    ENDPOINTS draws a uniform lower bound and then a uniform upper bound,
    which favors short ranges.  LENGTH_FIRST draws a uniform length and
    then a uniform position, which favors long ranges and better matches
    how people brush dashboards, so it is the default everywhere.
    """

    ENDPOINTS = 1
    LENGTH_FIRST = 2


def sample_range_endpoints(m: int, rng: np.random.Generator) -> tuple[int, int]:
    """lo uniform over [0, m), then hi uniform over (lo, m]."""
    lo = int(rng.integers(0, m))
    hi = int(rng.integers(lo + 1, m + 1))
    return lo, hi


def sample_range_length_first(m: int, rng: np.random.Generator) -> tuple[int, int]:
    """Length uniform over [1, m], then lo uniform over [0, m - length]."""
    length = int(rng.integers(1, m + 1))
    lo = int(rng.integers(0, m - length + 1))
    return lo, lo + length


_SAMPLERS = {
    RangeStrategy.ENDPOINTS: sample_range_endpoints,
    RangeStrategy.LENGTH_FIRST: sample_range_length_first,
}


def sample_state(
    schema: Schema,
    rng: np.random.Generator,
    strategy: RangeStrategy = RangeStrategy.LENGTH_FIRST,
) -> SelectionState:
    """One independent random range per attribute (two per geospatial axis,
    x drawn before y)."""
    draw = _SAMPLERS[RangeStrategy(strategy)]
    ranges = []
    for spec in schema.attributes:
        if spec.is_geospatial:
            ranges.append((draw(spec.x_bins, rng), draw(spec.y_bins, rng)))
        else:
            ranges.append(draw(spec.bins, rng))
    return SelectionState(tuple(ranges))


@dataclass(frozen=True)
class TrainingSample:
    query: np.ndarray
    target: float
    state_id: int
    empty: bool


@dataclass
class TrainingSet:
    """Samples grouped by state, stored densely.

    ``queries`` is uint8 0/1 of shape (n_samples, width); rows of one state
    are contiguous and ``state_offsets[s] : state_offsets[s + 1]`` slices
    them out.  Within a state, samples follow schema attribute order, one
    block of group_size rows per attribute, so the source attribute of any
    sample is recoverable from its offset.
    """

    schema_fingerprint: str
    seed: int
    strategy: RangeStrategy
    n_states: int
    queries: np.ndarray
    targets: np.ndarray
    empty_flags: np.ndarray
    state_ids: np.ndarray
    state_offsets: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.state_offsets is None:
            # state_ids are contiguous and ascending by construction
            counts = np.bincount(self.state_ids, minlength=self.n_states)
            self.state_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def n_samples(self) -> int:
        return len(self.targets)

    @property
    def width(self) -> int:
        return self.queries.shape[1]

    def state_slice(self, state_id: int) -> slice:
        return slice(int(self.state_offsets[state_id]), int(self.state_offsets[state_id + 1]))

    def attribute_ids(self, schema: Schema) -> np.ndarray:
        """Per-sample index of the attribute whose group-by produced it."""
        per_state = np.concatenate(
            [np.full(a.group_size, i, dtype=np.int32) for i, a in enumerate(schema.attributes)]
        )
        out = np.empty(self.n_samples, dtype=np.int32)
        for s in range(self.n_states):
            sl = self.state_slice(s)
            if sl.stop - sl.start != len(per_state):
                raise ValueError(f"state {s} holds {sl.stop - sl.start} samples, schema expects {len(per_state)}")
            out[sl] = per_state
        return out


def expand_state(
    store: ColumnStore, schema: Schema, state: SelectionState, state_id: int
) -> list[TrainingSample]:
    """All group-by query/answer pairs of one state, in attribute order.

    Empty average cells become target 0 with the empty flag set; they are
    kept so the model learns near-zero answers for empty regions.
    """
    samples: list[TrainingSample] = []
    for spec in schema.attributes:
        queries = group_by_queries(schema, state, spec.name)
        answers = group_by(store, state, spec.name)
        empties = np.isnan(answers)
        answers = np.where(empties, 0.0, answers)
        for q, t, e in zip(queries, answers, empties):
            samples.append(TrainingSample(query=q, target=float(t), state_id=state_id, empty=bool(e)))
    return samples


def _expand_arrays(store, schema, state):
    """Array form of expand_state, used by the bulk generator."""
    qs, ts, es = [], [], []
    for spec in schema.attributes:
        queries = group_by_queries(schema, state, spec.name)
        answers = group_by(store, state, spec.name)
        empties = np.isnan(answers)
        qs.append(queries.astype(np.uint8))
        ts.append(np.where(empties, 0.0, answers))
        es.append(empties)
    return np.concatenate(qs), np.concatenate(ts), np.concatenate(es)


def generate(
    store: ColumnStore,
    schema: Schema,
    n_states: int,
    strategy: RangeStrategy = RangeStrategy.LENGTH_FIRST,
    seed: int = 0,
) -> TrainingSet:
    """Sample and expand ``n_states`` states against the oracle.

    State 0 is always the all-full default view, the query every dashboard
    issues first; the remaining states are random.  Fully determined by
    (seed, schema, store).
    """
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    rng = np.random.default_rng(seed)
    states = [SelectionState.full(schema)]
    for _ in range(n_states - 1):
        states.append(sample_state(schema, rng, strategy))

    all_q, all_t, all_e, all_ids = [], [], [], []
    for sid, state in enumerate(states):
        q, t, e = _expand_arrays(store, schema, state)
        all_q.append(q)
        all_t.append(t)
        all_e.append(e)
        all_ids.append(np.full(len(t), sid, dtype=np.uint32))
    return TrainingSet(
        schema_fingerprint=schema.fingerprint,
        seed=seed,
        strategy=RangeStrategy(strategy),
        n_states=n_states,
        queries=np.concatenate(all_q),
        targets=np.concatenate(all_t),
        empty_flags=np.concatenate(all_e),
        state_ids=np.concatenate(all_ids),
    )


def generate_split(
    store: ColumnStore,
    schema: Schema,
    n_states: int,
    strategy: RangeStrategy = RangeStrategy.LENGTH_FIRST,
    seed: int = 0,
    test_fraction: float = 0.1,
) -> tuple[TrainingSet, TrainingSet]:
    """Training set plus a held-out test set drawn the same way from an
    independent seed, sized ``test_fraction`` of the training states."""
    train = generate(store, schema, n_states, strategy, seed)
    n_test = max(1, round(n_states * test_fraction))
    test = generate(store, schema, n_test, strategy, seed + 0x9E3779B9)
    return train, test


@dataclass
class Batch:
    queries: np.ndarray  # (n, width) float64 0/1
    targets: np.ndarray  # (n,) float64, raw units
    empty_flags: np.ndarray
    state_ids: np.ndarray


def make_batches(
    ts: TrainingSet, states_per_batch: int, rng: np.random.Generator
):
    """One epoch of state-based mini-batches.

    States are shuffled and partitioned into groups of ``states_per_batch``
    (the last group may be short); each batch carries every sample of its
    states, so each epoch visits every sample exactly once.
    """
    if states_per_batch < 1:
        raise ValueError("states_per_batch must be >= 1")
    order = rng.permutation(ts.n_states)
    for start in range(0, ts.n_states, states_per_batch):
        group = order[start : start + states_per_batch]
        idx = np.concatenate([np.arange(ts.state_offsets[s], ts.state_offsets[s + 1]) for s in group])
        yield Batch(
            queries=ts.queries[idx].astype(np.float64),
            targets=ts.targets[idx],
            empty_flags=ts.empty_flags[idx],
            state_ids=ts.state_ids[idx],
        )


def save_set(ts: TrainingSet, path: str | Path) -> None:
    fp = ts.schema_fingerprint.encode("utf-8")
    n, width = ts.queries.shape
    packed = np.packbits(ts.queries, axis=1, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(SET_MAGIC)
        fh.write(struct.pack("<IH", SET_VERSION, len(fp)))
        fh.write(fp)
        fh.write(struct.pack("<QBIQI", ts.seed, int(ts.strategy), ts.n_states, n, width))
        flags = ts.empty_flags.astype(np.uint8)
        for i in range(n):
            fh.write(struct.pack("<I", int(ts.state_ids[i])))
            fh.write(packed[i].tobytes())
            fh.write(struct.pack("<dB", float(ts.targets[i]), int(flags[i])))


def load_set(path: str | Path) -> TrainingSet:
    blob = Path(path).read_bytes()
    if blob[:4] != SET_MAGIC:
        raise SetFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, fp_len = struct.unpack_from("<IH", blob, 4)
    if version != SET_VERSION:
        raise SetFormatError(f"{path}: unsupported version {version}")
    off = 10
    fingerprint = blob[off : off + fp_len].decode("utf-8")
    off += fp_len
    seed, strategy, n_states, n, width = struct.unpack_from("<QBIQI", blob, off)
    off += struct.calcsize("<QBIQI")
    n_bytes = (width + 7) // 8
    record = 4 + n_bytes + 8 + 1
    if len(blob) - off != n * record:
        raise SetFormatError(f"{path}: expected {n} records of {record} bytes, found {len(blob) - off} bytes")
    state_ids = np.empty(n, dtype=np.uint32)
    packed = np.empty((n, n_bytes), dtype=np.uint8)
    targets = np.empty(n)
    flags = np.empty(n, dtype=bool)
    for i in range(n):
        state_ids[i] = struct.unpack_from("<I", blob, off)[0]
        off += 4
        packed[i] = np.frombuffer(blob[off : off + n_bytes], dtype=np.uint8)
        off += n_bytes
        t, e = struct.unpack_from("<dB", blob, off)
        off += 9
        targets[i] = t
        flags[i] = bool(e)
    queries = np.unpackbits(packed, axis=1, count=width, bitorder="little")
    return TrainingSet(
        schema_fingerprint=fingerprint,
        seed=seed,
        strategy=RangeStrategy(strategy),
        n_states=n_states,
        queries=queries,
        targets=targets,
        empty_flags=flags,
        state_ids=state_ids,
    )
