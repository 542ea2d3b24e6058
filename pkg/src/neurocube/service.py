"""Read-only HTTP service exposing a trained model to the dashboard.

Endpoints (all JSON):
  GET  /health        liveness + fingerprint + feature flags
  GET  /schema        schema document with fingerprint
  POST /query         {state, with_oracle?} -> per-attribute group-by
                      predictions (plus ground truth when an oracle
                      store is attached)
  POST /latent        {attribute, context?} -> one 2-D point per
                      contiguous range of a 1-D attribute
  GET  /model         the portable model export, byte-identical to the
                      exported file

The prediction/latent cores are plain functions over (model, schema,
state) so they can be exercised without HTTP.  Handlers never mutate
the model or store, so concurrent requests are safe, and every response
is sanitised: non-finite values go out as null, never NaN/Infinity.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from neurocube import oracle as oracle_mod
from neurocube.encoding import encode_state, enumerate_ranges, group_by_queries
from neurocube.nn import Model, export_portable, forward
from neurocube.oracle import ColumnStore, SelectionState
from neurocube.schema import Schema

log = logging.getLogger("neurocube.service")


class UnsupportedAttributeError(ValueError):
    """Latent view requested for an attribute without a 1-D layout."""


class SchemaMismatchError(ValueError):
    """Request state/fingerprint does not fit the served schema."""


def _clean(value: float) -> float | None:
    v = float(value)
    return v if np.isfinite(v) else None


def _clean_list(values) -> list[float | None]:
    return [_clean(v) for v in values]


@dataclass
class AttributeGroupBy:
    name: str
    predictions: list[float]       # display values (counts clamped at 0)
    predictions_raw: list[float]   # unclamped model output
    oracle: list[float] | None = None


@dataclass
class DashboardResponse:
    total: float
    total_raw: float
    attributes: list[AttributeGroupBy]
    oracle_total: float | None
    latency_ms: float

    def to_dict(self, fingerprint: str) -> dict:
        doc = {
            "schema_fingerprint": fingerprint,
            "total": _clean(self.total),
            "total_raw": _clean(self.total_raw),
            "attributes": [
                {
                    "name": a.name,
                    "predictions": _clean_list(a.predictions),
                    "predictions_raw": _clean_list(a.predictions_raw),
                    **({"oracle": _clean_list(a.oracle)} if a.oracle is not None else {}),
                }
                for a in self.attributes
            ],
            "latency_ms": self.latency_ms,
        }
        if self.oracle_total is not None or any(a.oracle is not None for a in self.attributes):
            doc["oracle_total"] = _clean(self.oracle_total) if self.oracle_total is not None else None
        return doc


def _display(values: np.ndarray, schema: Schema) -> np.ndarray:
    """Counts cannot be negative; clamp for display only."""
    return np.maximum(values, 0.0) if schema.measure.type == "count" else values


def predict_dashboard(
    model: Model,
    schema: Schema,
    state: SelectionState,
    with_oracle: bool = False,
    store: ColumnStore | None = None,
) -> DashboardResponse:
    """Group-by predictions for every attribute in one forward pass.

    The query batch is the total query followed by each attribute's
    group-by expansion, in schema order — the same expansion rule the
    training-set generator uses.
    """
    state.validate(schema)
    if with_oracle and store is None:
        raise ValueError("oracle comparison requested but no store is attached")
    t0 = time.perf_counter()

    blocks = [encode_state(schema, state)[None, :]]
    sizes = []
    for spec in schema.attributes:
        q = group_by_queries(schema, state, spec.name)
        sizes.append(q.shape[0])
        blocks.append(q)
    batch = np.concatenate(blocks, axis=0)
    scale = 1.0 if model.target_scale is None else model.target_scale
    raw = forward(model, batch).predictions * scale
    display = _display(raw, schema)

    attributes = []
    offset = 1
    for spec, size in zip(schema.attributes, sizes):
        attributes.append(
            AttributeGroupBy(
                name=spec.name,
                predictions=display[offset : offset + size].tolist(),
                predictions_raw=raw[offset : offset + size].tolist(),
            )
        )
        offset += size

    oracle_total = None
    if with_oracle:
        oracle_total = oracle_mod.aggregate(store, state)
        for spec, attr in zip(schema.attributes, attributes):
            attr.oracle = oracle_mod.group_by(store, state, spec.name).tolist()

    return DashboardResponse(
        total=float(display[0]),
        total_raw=float(raw[0]),
        attributes=attributes,
        oracle_total=oracle_total,
        latency_ms=(time.perf_counter() - t0) * 1e3,
    )


@dataclass
class LatentPoint:
    lo: int
    hi: int
    x: float
    y: float
    value: float       # display aggregate (counts clamped at 0)
    value_raw: float
    length: int

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "x": _clean(self.x),
            "y": _clean(self.y),
            "value": _clean(self.value),
            "value_raw": _clean(self.value_raw),
            "length": self.length,
        }


def latent_space(
    model: Model, schema: Schema, attribute: str, context: SelectionState | None = None
) -> list[LatentPoint]:
    """One point per contiguous range of the attribute: its tower's 2-D
    projection plus the model's aggregate for that range substituted
    into the context state (other attributes as currently selected).
    """
    spec = schema.attribute(attribute)
    if spec.is_geospatial:
        raise UnsupportedAttributeError(f"attribute {attribute!r} has no 1-D range layout")
    if context is None:
        context = SelectionState.full(schema)
    context.validate(schema)
    index = schema.attribute_index(attribute)

    ranges = enumerate_ranges(spec)
    states = [context.replace(index, r) for r in ranges]
    batch = np.stack([encode_state(schema, s) for s in states])
    result = forward(model, batch)
    scale = 1.0 if model.target_scale is None else model.target_scale
    raw = result.predictions * scale
    display = _display(raw, schema)
    xy = result.projections[index]

    return [
        LatentPoint(
            lo=lo,
            hi=hi,
            x=float(xy[i, 0]),
            y=float(xy[i, 1]),
            value=float(display[i]),
            value_raw=float(raw[i]),
            length=hi - lo,
        )
        for i, (lo, hi) in enumerate(ranges)
    ]


def _parse_state(schema: Schema, doc: dict | None) -> SelectionState:
    try:
        return SelectionState.from_dict(schema, doc or {})
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatchError(str(exc)) from None


def create_app(model: Model, schema: Schema, store: ColumnStore | None = None):
    """FastAPI application over a fixed (model, schema, optional store)."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.middleware.cors import CORSMiddleware

    if model.schema_fingerprint != schema.fingerprint:
        raise SchemaMismatchError(
            f"model was trained against fingerprint {model.schema_fingerprint[:12]}…, "
            f"schema has {schema.fingerprint[:12]}…"
        )
    if store is not None and store.schema.fingerprint != schema.fingerprint:
        raise SchemaMismatchError("store schema does not match the served schema")

    portable = export_portable(model)  # frozen at startup; /model serves these bytes
    schema_doc = schema.to_dict()
    schema_doc["fingerprint"] = schema.fingerprint

    app = FastAPI(title="neurocube", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "schema_fingerprint": schema.fingerprint,
            "oracle": store is not None,
        }

    @app.get("/schema")
    def get_schema() -> dict:
        return schema_doc

    @app.get("/model")
    def get_model() -> Response:
        return Response(content=portable, media_type="application/json")

    @app.post("/query")
    def query(body: dict) -> dict:
        fp = body.get("schema_fingerprint")
        if fp is not None and fp != schema.fingerprint:
            raise HTTPException(status_code=409, detail="schema fingerprint mismatch")
        try:
            state = _parse_state(schema, body.get("state"))
            response = predict_dashboard(
                model, schema, state, with_oracle=bool(body.get("with_oracle")), store=store
            )
        except SchemaMismatchError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return response.to_dict(schema.fingerprint)

    @app.post("/latent")
    def latent(body: dict) -> dict:
        name = body.get("attribute")
        if not isinstance(name, str):
            raise HTTPException(status_code=400, detail="missing attribute name")
        try:
            context = _parse_state(schema, body.get("context"))
            points = latent_space(model, schema, name, context)
        except SchemaMismatchError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except UnsupportedAttributeError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {
            "attribute": name,
            "bins": schema.attribute(name).bins,
            "points": [p.to_dict() for p in points],
        }

    return app


def serve(
    model: Model,
    schema: Schema,
    store: ColumnStore | None = None,
    host: str = "127.0.0.1",
    port: int = 8000,
) -> None:
    """Run the service until interrupted."""
    import uvicorn

    app = create_app(model, schema, store=store)
    level = os.environ.get("NEUROCUBE_LOG", "info").lower()
    uvicorn.run(app, host=host, port=port, log_level=level)
