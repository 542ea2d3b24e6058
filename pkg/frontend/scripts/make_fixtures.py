"""Regenerate fixtures/agreement.json.

The fixture freezes a small served schema, one float32 portable model
export, and 1000 random selection states together with the float64
reference predictions the server would produce for their *total* query.
The TypeScript model tests replay the same states through the portable
evaluator and must agree to 1e-4 relative.

Run from the repository root:  python3 frontend/scripts/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from neurocube.datagen import sample_state
from neurocube.encoding import encode_states
from neurocube.nn import ModelConfig, TowerConfig, build, export_portable, predict
from neurocube.schema import AttributeKind, AttributeSpec, Measure, Schema

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "agreement.json"
N_STATES = 1000


def fixture_schema() -> Schema:
    return Schema(
        attributes=(
            AttributeSpec(name="hour", kind=AttributeKind.TEMPORAL_CYCLIC, bins=6),
            AttributeSpec(
                name="kind", kind=AttributeKind.CATEGORICAL, labels=("a", "b", "c")
            ),
            AttributeSpec(
                name="loc",
                kind=AttributeKind.GEOSPATIAL_2D,
                x_bins=4,
                y_bins=4,
                x_domain=(-180.0, 180.0),
                y_domain=(-90.0, 90.0),
            ),
        ),
        measure=Measure("count"),
    )


def main() -> None:
    schema = fixture_schema()
    config = ModelConfig(
        towers=(
            TowerConfig(name="hour", widths=(8, 2, 8)),
            TowerConfig(name="kind", widths=(4, 2, 4)),
            TowerConfig(name="loc", widths=(8, 2, 8)),
        ),
        regressor=(12, 6),
    )
    model = build(config, schema, seed=0)
    model.target_scale = 7.5

    rng = np.random.default_rng(42)
    states = [sample_state(schema, rng) for _ in range(N_STATES)]
    expected = predict(model, encode_states(schema, states))

    schema_doc = schema.to_dict()
    schema_doc["fingerprint"] = schema.fingerprint
    doc = {
        "schema": schema_doc,
        "model": json.loads(export_portable(model, f32=True)),
        "states": [s.to_dict(schema) for s in states],
        "expected": [float(v) for v in expected],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, separators=(",", ":")))
    print(f"wrote {OUT} ({OUT.stat().st_size / 1024:.0f} KB, {N_STATES} states)")


if __name__ == "__main__":
    main()
