"""Selection states, CSV ingestion, and exact aggregation.

``naive_aggregate``/``naive_group_by`` are an intentionally different
implementation (plain per-row Python scan) used as an independent
reference for the vectorized engine.
"""

import math

import numpy as np
import pytest

from neurocube.oracle import (
    EmptyAggregate,
    SelectionState,
    StoreFormatError,
    aggregate,
    from_arrays,
    group_by,
    ingest_csv,
    load_store,
    save_store,
)
from neurocube.schema import Measure

from conftest import (
    categorical,
    continuous,
    geospatial,
    make_schema,
    random_states,
    random_store,
    temporal,
)


def _row_ranges(schema, state):
    return list(zip(schema.attributes, state.ranges))


def _row_matches(schema, state, row) -> bool:
    for (spec, rng), value in zip(_row_ranges(schema, state), row):
        if spec.is_geospatial:
            (xlo, xhi), (ylo, yhi) = rng
            x, y = value
            if not (xlo <= x < xhi and ylo <= y < yhi):
                return False
        else:
            lo, hi = rng
            if not lo <= value < hi:
                return False
    return True


def _store_rows(store):
    rows = []
    for i in range(store.n_records):
        row = []
        for spec, col in zip(store.schema.attributes, store.columns):
            row.append((int(col[0][i]), int(col[1][i])) if spec.is_geospatial else int(col[i]))
        rows.append(row)
    return rows


def naive_aggregate(store, state) -> float:
    schema = store.schema
    hits = [i for i, row in enumerate(_store_rows(store)) if _row_matches(schema, state, row)]
    if schema.measure.type == "count":
        return float(len(hits))
    if not hits:
        return float("nan")
    return float(np.mean([store.measure_values[i] for i in hits]))


def naive_group_by(store, state, target) -> list[float]:
    schema = store.schema
    spec = schema.attribute(target)
    idx = schema.attribute_index(target)
    out = []
    if spec.is_geospatial:
        for y in range(spec.y_bins):
            for x in range(spec.x_bins):
                cell = state.replace(idx, ((x, x + 1), (y, y + 1)))
                out.append(naive_aggregate(store, cell))
    else:
        for j in range(spec.bins):
            out.append(naive_aggregate(store, state.replace(idx, (j, j + 1))))
    return out


class TestSelectionState:
    def test_full_state_covers_every_attribute(self, checkin_schema):
        state = SelectionState.full(checkin_schema)
        assert state.ranges[0] == (0, 12)
        assert state.ranges[3] == ((0, 20), (0, 20))

    def test_of_overrides_named_attributes(self, checkin_schema):
        state = SelectionState.of(checkin_schema, hour=(0, 8))
        assert state.ranges[2] == (0, 8)
        assert state.ranges[1] == (0, 7)

    def test_invalid_ranges_rejected(self, checkin_schema):
        for bad in ((3, 3), (5, 2), (-1, 4), (20, 25)):
            with pytest.raises(ValueError, match="hour"):
                SelectionState.of(checkin_schema, hour=bad)

    def test_wire_round_trip(self, checkin_schema):
        state = SelectionState.of(checkin_schema, hour=(2, 9), location=((1, 5), (0, 3)))
        doc = state.to_dict(checkin_schema)
        assert doc["hour"] == {"lo": 2, "hi": 9}
        assert doc["location"] == {"x": {"lo": 1, "hi": 5}, "y": {"lo": 0, "hi": 3}}
        assert SelectionState.from_dict(checkin_schema, doc) == state

    def test_wire_missing_attributes_default_to_full(self, checkin_schema):
        state = SelectionState.from_dict(checkin_schema, {"hour": {"lo": 0, "hi": 4}})
        assert state.ranges[0] == (0, 12)
        assert state.ranges[2] == (0, 4)

    def test_wire_unknown_attribute_rejected(self, checkin_schema):
        with pytest.raises(KeyError, match="weekday"):
            SelectionState.from_dict(checkin_schema, {"weekday": {"lo": 0, "hi": 1}})


class TestIngestion:
    def _write(self, tmp_path, text):
        p = tmp_path / "data.csv"
        p.write_text(text)
        return p

    def test_clean_rows_all_kept(self, tmp_path):
        schema = make_schema(temporal("hour", 24), categorical("kind", ("a", "b")))
        path = self._write(tmp_path, "hour,kind\n0,a\n5,b\n23,a\n12,b\n")
        store, rejected = ingest_csv(schema, path)
        assert store.n_records == 4
        assert rejected == 0
        assert store.columns[0].tolist() == [0, 5, 23, 12]

    def test_out_of_domain_row_rejected(self, tmp_path):
        schema = make_schema(temporal("hour", 24), categorical("kind", ("a", "b")))
        path = self._write(tmp_path, "hour,kind\n0,a\n99,b\n23,a\n12,b\n")
        store, rejected = ingest_csv(schema, path)
        assert store.n_records == 3
        assert rejected == 1

    def test_unparseable_cell_rejected(self, tmp_path):
        schema = make_schema(continuous("v", 4, domain=(0.0, 1.0)))
        path = self._write(tmp_path, "v\n0.5\nnot-a-number\n0.9\n")
        store, rejected = ingest_csv(schema, path)
        assert store.n_records == 2
        assert rejected == 1

    def test_header_only_gives_empty_store(self, tmp_path):
        schema = make_schema(temporal("hour", 24))
        path = self._write(tmp_path, "hour\n")
        store, rejected = ingest_csv(schema, path)
        assert store.n_records == 0
        assert rejected == 0

    def test_missing_column_is_fatal(self, tmp_path):
        schema = make_schema(temporal("hour", 24), temporal("minute", 60))
        path = self._write(tmp_path, "hour\n3\n")
        with pytest.raises(ValueError, match="minute"):
            ingest_csv(schema, path)

    def test_geospatial_columns(self, tmp_path):
        schema = make_schema(geospatial("loc", 4, 4))
        path = self._write(tmp_path, "loc_x,loc_y\n-180,-90\n179.9,89.9\n")
        store, rejected = ingest_csv(schema, path)
        assert rejected == 0
        x, y = store.columns[0]
        assert x.tolist() == [0, 3]
        assert y.tolist() == [0, 3]

    def test_average_measure_column_captured(self, tmp_path):
        schema = make_schema(
            temporal("hour", 4), measure=Measure(type="average", column="delay")
        )
        path = self._write(tmp_path, "hour,delay\n1,10\n1,20\n3,7\n")
        store, rejected = ingest_csv(schema, path)
        assert rejected == 0
        assert store.measure_values.tolist() == [10.0, 20.0, 7.0]


class TestAggregation:
    def test_half_open_range_count(self, hour_store):
        schema, store = hour_store
        assert aggregate(store, SelectionState.of(schema, hour=(0, 8))) == 3.0

    def test_full_state_counts_everything(self, hour_store):
        schema, store = hour_store
        assert aggregate(store, SelectionState.full(schema)) == 4.0

    def test_empty_average_signals(self):
        schema = make_schema(temporal("hour", 10), measure=Measure(type="average", column="v"))
        store = from_arrays(schema, [np.array([3, 7])], measure_values=np.array([5.0, 9.0]))
        value = aggregate(store, SelectionState.of(schema, hour=(0, 2)))
        assert EmptyAggregate.is_empty(value)
        assert math.isnan(value)

    def test_average_measure_mean(self):
        schema = make_schema(temporal("hour", 10), measure=Measure(type="average", column="v"))
        store = from_arrays(schema, [np.array([3, 3, 7])], measure_values=np.array([4.0, 6.0, 100.0]))
        assert aggregate(store, SelectionState.of(schema, hour=(3, 4))) == 5.0

    def test_group_by_hand_counts(self, hour_store):
        schema, store = hour_store
        vec = group_by(store, SelectionState.full(schema), "hour")
        expect = [0, 0, 0, 2, 0, 0, 0, 1, 0, 1]
        assert vec.tolist() == expect

    def test_group_by_partition_identity(self, hour_store):
        # The sweep drops the target's own selection, so the entries
        # partition the aggregate of the state with the target deselected.
        schema, store = hour_store
        state = SelectionState.of(schema, hour=(2, 9))
        idx = schema.attribute_index("hour")
        base = state.replace(idx, (0, 10))
        assert group_by(store, state, "hour").sum() == aggregate(store, base)

    def test_group_by_ignores_targets_own_selection(self, hour_store):
        schema, store = hour_store
        narrowed = SelectionState.of(schema, hour=(0, 2))
        full = SelectionState.full(schema)
        assert group_by(store, narrowed, "hour").tolist() == group_by(store, full, "hour").tolist()

    def test_geo_group_by_one_record_per_cell(self):
        schema = make_schema(geospatial("loc", 2, 2))
        store = from_arrays(
            schema, [(np.array([0, 1, 0, 1]), np.array([0, 0, 1, 1]))]
        )
        vec = group_by(store, SelectionState.full(schema), "loc")
        assert vec.tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_geo_group_by_row_major_order(self):
        schema = make_schema(geospatial("loc", 3, 2))
        # one record in cell (x=2, y=0) and two in (x=0, y=1)
        store = from_arrays(schema, [(np.array([2, 0, 0]), np.array([0, 1, 1]))])
        vec = group_by(store, SelectionState.full(schema), "loc")
        assert vec.tolist() == [0.0, 0.0, 1.0, 2.0, 0.0, 0.0]

    def test_matches_naive_scan_on_random_data(self, checkin_schema):
        store = random_store(checkin_schema, 300, seed=5)
        for state in random_states(checkin_schema, 12, seed=6):
            assert aggregate(store, state) == naive_aggregate(store, state)
            for spec in checkin_schema.attributes:
                got = group_by(store, state, spec.name)
                assert got.tolist() == naive_group_by(store, state, spec.name)

    def test_matches_naive_scan_average_measure(self):
        schema = make_schema(
            temporal("hour", 6),
            categorical("kind", ("a", "b", "c")),
            measure=Measure(type="average", column="v"),
        )
        rng = np.random.default_rng(1)
        store = random_store(schema, 100, seed=2, measure_values=rng.integers(0, 50, 100).astype(float))
        for state in random_states(schema, 10, seed=3):
            a, b = aggregate(store, state), naive_aggregate(store, state)
            assert (math.isnan(a) and math.isnan(b)) or a == b
            got = group_by(store, state, "hour")
            want = naive_group_by(store, state, "hour")
            for g, w in zip(got, want):
                assert (math.isnan(g) and math.isnan(w)) or g == w


class TestStoreCache:
    def test_round_trip(self, tmp_path, checkin_schema):
        store = random_store(checkin_schema, 500, seed=9)
        path = tmp_path / "cache.ncst"
        save_store(store, path)
        again = load_store(checkin_schema, path)
        for spec, a, b in zip(checkin_schema.attributes, store.columns, again.columns):
            if spec.is_geospatial:
                assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            else:
                assert np.array_equal(a, b)

    def test_round_trip_with_measure(self, tmp_path):
        schema = make_schema(temporal("hour", 8), measure=Measure(type="average", column="v"))
        store = from_arrays(schema, [np.array([1, 2, 3])], measure_values=np.array([0.5, 1.5, -2.0]))
        path = tmp_path / "cache.ncst"
        save_store(store, path)
        again = load_store(schema, path)
        assert again.measure_values.tolist() == [0.5, 1.5, -2.0]

    def test_bad_magic_rejected(self, tmp_path, checkin_schema):
        path = tmp_path / "cache.ncst"
        path.write_bytes(b"nope" + b"\x00" * 64)
        with pytest.raises(StoreFormatError):
            load_store(checkin_schema, path)

    def test_truncated_file_rejected(self, tmp_path, checkin_schema):
        store = random_store(checkin_schema, 100, seed=0)
        path = tmp_path / "cache.ncst"
        save_store(store, path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(StoreFormatError):
            load_store(checkin_schema, path)
