"""Schema construction, validation, widths, binning and serialization."""

import json

import pytest

from neurocube.schema import (
    AttributeKind,
    AttributeSpec,
    Measure,
    OutOfDomainError,
    Schema,
    SchemaError,
    bin_value,
    encoding_width,
    load_schema,
    schema_from_dict,
)

from conftest import categorical, continuous, geospatial, make_schema, temporal


class TestAttributeSpec:
    def test_kinds_have_expected_widths(self):
        assert encoding_width(temporal("hour", 24)) == 24
        assert encoding_width(categorical("kind", ("a", "b"))) == 2
        assert encoding_width(continuous("value", 10)) == 10
        assert encoding_width(geospatial("place", 20, 20)) == 40

    def test_checkin_style_total_width(self, checkin_schema):
        assert checkin_schema.input_width == 12 + 7 + 24 + 40

    def test_cardinality_one_categorical_is_valid(self):
        schema = make_schema(categorical("only", ("x",)))
        assert schema.input_width == 1

    def test_duplicate_name_rejected(self):
        with pytest.raises(SchemaError, match="hour"):
            make_schema(temporal("hour", 24), temporal("hour", 12))

    def test_zero_bins_rejected(self):
        with pytest.raises(SchemaError, match="bins"):
            temporal("hour", 0)

    def test_bin_cap_rejected(self):
        with pytest.raises(SchemaError):
            temporal("hour", 70_000)

    def test_duplicate_labels_rejected(self):
        with pytest.raises(SchemaError, match="label"):
            categorical("kind", ("a", "a"))

    def test_continuous_requires_increasing_domain(self):
        with pytest.raises(SchemaError):
            continuous("v", 4, domain=(1.0, 1.0))

    def test_group_size_geo_is_cell_count(self):
        assert geospatial("g", 20, 20).group_size == 400
        assert temporal("hour", 24).group_size == 24


class TestBinning:
    def test_interior_value(self):
        spec = continuous("v", 5, domain=(0.0, 10.0))
        assert bin_value(spec, 7.3) == 3

    def test_domain_max_clamps_to_last_bin(self):
        spec = continuous("v", 5, domain=(0.0, 10.0))
        assert bin_value(spec, 10.0) == 4

    def test_domain_min_is_bin_zero(self):
        spec = continuous("v", 5, domain=(0.0, 10.0))
        assert bin_value(spec, 0.0) == 0

    def test_out_of_domain_rejected(self):
        spec = continuous("v", 5, domain=(0.0, 10.0))
        for bad in (-0.1, 10.1, float("nan")):
            with pytest.raises(OutOfDomainError):
                bin_value(spec, bad)

    def test_unknown_label_rejected(self):
        spec = categorical("kind", ("a", "b"))
        with pytest.raises(OutOfDomainError):
            bin_value(spec, "z")

    def test_labels_bin_in_order(self):
        spec = categorical("kind", ("a", "b", "c"))
        assert [bin_value(spec, v) for v in ("a", "b", "c")] == [0, 1, 2]

    def test_temporal_integer_codes(self):
        spec = temporal("hour", 24)
        assert bin_value(spec, 0) == 0
        assert bin_value(spec, 23) == 23
        assert bin_value(spec, 24) == 23  # domain max clamps into the last bin
        with pytest.raises(OutOfDomainError):
            bin_value(spec, 24.5)

    def test_geospatial_pair_binning(self):
        spec = geospatial("place", 20, 20)
        assert bin_value(spec, (-180.0, -90.0)) == (0, 0)
        assert bin_value(spec, (180.0, 90.0)) == (19, 19)


class TestSchemaDocument:
    def test_round_trip_preserves_fingerprint(self, checkin_schema):
        doc = checkin_schema.to_dict()
        again = schema_from_dict(json.loads(json.dumps(doc)))
        assert again == checkin_schema
        assert again.fingerprint == checkin_schema.fingerprint

    def test_fingerprint_changes_with_bins(self):
        a = make_schema(temporal("hour", 24))
        b = make_schema(temporal("hour", 12))
        assert a.fingerprint != b.fingerprint

    def test_load_schema_file(self, tmp_path, checkin_schema):
        p = tmp_path / "schema.json"
        p.write_text(json.dumps(checkin_schema.to_dict()))
        assert load_schema(p) == checkin_schema

    def test_malformed_document_names_attribute(self):
        doc = {
            "schema_version": 1,
            "attributes": [{"name": "hour", "kind": "temporal_cyclic"}],
            "measure": {"type": "count"},
        }
        with pytest.raises(SchemaError, match="hour"):
            schema_from_dict(doc)

    def test_unknown_kind_rejected(self):
        doc = {
            "schema_version": 1,
            "attributes": [{"name": "x", "kind": "sideways", "bins": 3}],
            "measure": {"type": "count"},
        }
        with pytest.raises(SchemaError):
            schema_from_dict(doc)

    def test_average_measure_requires_column(self):
        with pytest.raises(SchemaError):
            Measure(type="average")

    def test_segments_tile_the_input(self, checkin_schema):
        segs = checkin_schema.segments()
        assert segs[0] == (0, 12)
        assert segs[-1] == (43, 40)
        total = sum(w for _, w in segs)
        assert total == checkin_schema.input_width

    def test_attribute_lookup(self, checkin_schema):
        assert checkin_schema.attribute("hour").bins == 24
        assert checkin_schema.attribute_index("location") == 3
        with pytest.raises(KeyError):
            checkin_schema.attribute("nope")
