"""Model serialization.

Native checkpoint (lossless, f64): magic ``NCMD``, version u32,
fingerprint length u16 + utf-8 fingerprint, config JSON length u32 +
bytes, target scale f64 (NaN when unresolved), metadata JSON length u32 +
bytes, layer count u32, then per layer: rows u32, cols u32, activation
u8 (0 relu, 1 sigmoid, 2 identity), row-major f64 weights, f64 biases.

Portable export: a JSON document the browser evaluator consumes directly.
Numbers default to full f64 precision so an honest re-implementation of
the forward pass reproduces server predictions far inside the 1e-4
agreement budget; pass ``f32=True`` to trade that margin for file size.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from neurocube.nn.layers import ACTIVATIONS, DenseLayer, Stack
from neurocube.nn.model import AttributeTower, Model, ModelConfig

CHECKPOINT_MAGIC = b"NCMD"
CHECKPOINT_VERSION = 1
PORTABLE_FORMAT = "neurocube-portable"
PORTABLE_VERSION = 1

_ACT_CODE = {a: i for i, a in enumerate(ACTIVATIONS)}


class ModelFormatError(ValueError):
    """Raised for corrupt or incompatible model files."""


def save_model(model: Model, path: str | Path) -> None:
    fp = model.schema_fingerprint.encode("utf-8")
    cfg = json.dumps(model.config.to_dict()).encode("utf-8")
    meta = json.dumps(model.meta).encode("utf-8")
    scale = float("nan") if model.target_scale is None else float(model.target_scale)
    layers = model.layers()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IH", CHECKPOINT_VERSION, len(fp)))
        fh.write(fp)
        fh.write(struct.pack("<I", len(cfg)))
        fh.write(cfg)
        fh.write(struct.pack("<d", scale))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            fh.write(struct.pack("<IIB", layer.n_out, layer.n_in, _ACT_CODE[layer.activation]))
            fh.write(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())


def load_model(path: str | Path, expect_fingerprint: str | None = None) -> Model:
    blob = Path(path).read_bytes()
    try:
        return _parse_checkpoint(blob, path, expect_fingerprint)
    except ModelFormatError:
        raise
    except (struct.error, ValueError, KeyError, IndexError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"{path}: corrupt checkpoint: {e}") from e


def _parse_checkpoint(blob: bytes, path, expect_fingerprint: str | None) -> Model:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, fp_len = struct.unpack_from("<IH", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ModelFormatError(f"{path}: unsupported checkpoint version {version}")
    off = 10
    fingerprint = blob[off : off + fp_len].decode("utf-8")
    off += fp_len
    if expect_fingerprint is not None and fingerprint != expect_fingerprint:
        raise ModelFormatError(
            f"{path}: checkpoint was trained against a different schema "
            f"({fingerprint[:12]}.. != {expect_fingerprint[:12]}..)"
        )
    (cfg_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    config = ModelConfig.from_dict(json.loads(blob[off : off + cfg_len]))
    off += cfg_len
    (scale,) = struct.unpack_from("<d", blob, off)
    off += 8
    (meta_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    meta = json.loads(blob[off : off + meta_len])
    off += meta_len
    (n_layers,) = struct.unpack_from("<I", blob, off)
    off += 4

    layers: list[DenseLayer] = []
    for _ in range(n_layers):
        rows, cols, act_code = struct.unpack_from("<IIB", blob, off)
        off += 9
        if act_code >= len(ACTIVATIONS):
            raise ModelFormatError(f"{path}: unknown activation code {act_code}")
        end = off + 8 * rows * cols
        W = np.frombuffer(blob[off:end], dtype="<f8").reshape(rows, cols).copy()
        off = end
        end = off + 8 * rows
        b = np.frombuffer(blob[off:end], dtype="<f8").copy()
        off = end
        layers.append(DenseLayer(W=W, b=b, activation=ACTIVATIONS[act_code]))
    if off != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - off} trailing bytes")

    model = _assemble(config, layers, fingerprint)
    model.target_scale = None if np.isnan(scale) else scale
    model.meta = meta
    return model


def _assemble(config: ModelConfig, layers: list[DenseLayer], fingerprint: str) -> Model:
    """Rebuild the tower/regressor structure around a flat layer list."""
    towers = []
    pos = 0
    for tcfg in config.towers:
        tcfg.validate()
        n_total = len(tcfg.widths) + 1
        emb = tcfg.resolved_embedding_index()
        proj = tcfg._projection_index()
        chunk = layers[pos : pos + n_total]
        if len(chunk) != n_total:
            raise ModelFormatError(f"tower {tcfg.name!r}: layer list exhausted")
        towers.append(
            AttributeTower(
                encoder_front=Stack(chunk[: emb + 1]),
                encoder_back=Stack(chunk[emb + 1 : proj + 1]),
                decoder=Stack(chunk[proj + 1 :]),
            )
        )
        pos += n_total
    regressor = Stack(layers[pos:])
    if regressor.layers and regressor.n_out != 1:
        raise ModelFormatError("regressor output width must be 1")
    return Model(
        config=config,
        towers=towers,
        regressor=regressor,
        schema_fingerprint=fingerprint,
    )


def _layer_doc(layer: DenseLayer, cast) -> dict:
    return {
        "rows": layer.n_out,
        "cols": layer.n_in,
        "activation": layer.activation,
        "w": [cast(v) for v in layer.W.ravel()],
        "b": [cast(v) for v in layer.b],
    }


def export_portable(model: Model, path: str | Path | None = None, f32: bool = False) -> bytes:
    """Serialize to the portable JSON weight format; returns the exact
    bytes (and writes them to ``path`` when given), so servers can hand
    out a byte-identical copy."""
    cast = (lambda v: float(np.float32(v))) if f32 else float
    doc = {
        "format": PORTABLE_FORMAT,
        "version": PORTABLE_VERSION,
        "schema_fingerprint": model.schema_fingerprint,
        "target_scale": 1.0 if model.target_scale is None else float(model.target_scale),
        "attributes": [
            {
                "name": tcfg.name,
                "layers": [_layer_doc(l, cast) for l in tower.layers()],
                "embedding_index": len(tower.encoder_front.layers) - 1,
            }
            for tcfg, tower in zip(model.config.towers, model.towers)
        ],
        "regressor": [_layer_doc(l, cast) for l in model.regressor.layers],
    }
    blob = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    if path is not None:
        Path(path).write_bytes(blob)
    return blob


def import_portable(data: bytes | str | dict) -> Model:
    """Reader for the portable format, used to cross-check exports.

    The returned model predicts but keeps no lambda/optimizer settings
    beyond defaults; it is an inference artifact.
    """
    if isinstance(data, (bytes, str)):
        doc = json.loads(data)
    else:
        doc = data
    if doc.get("format") != PORTABLE_FORMAT:
        raise ModelFormatError(f"not a portable model document: format={doc.get('format')!r}")

    def read_layers(entries) -> list[DenseLayer]:
        out = []
        for e in entries:
            W = np.array(e["w"], dtype=np.float64).reshape(e["rows"], e["cols"])
            b = np.array(e["b"], dtype=np.float64)
            out.append(DenseLayer(W=W, b=b, activation=e["activation"]))
        return out

    towers, tower_cfgs = [], []
    for attr in doc["attributes"]:
        layers = read_layers(attr["layers"])
        emb = int(attr["embedding_index"])
        proj = next(i for i, l in enumerate(layers) if l.n_out == 2 and l.activation == "identity")
        towers.append(
            AttributeTower(
                encoder_front=Stack(layers[: emb + 1]),
                encoder_back=Stack(layers[emb + 1 : proj + 1]),
                decoder=Stack(layers[proj + 1 :]),
            )
        )
        tower_cfgs.append(
            # widths excludes the input/output echo of the segment width
            dict(name=attr["name"], widths=tuple(l.n_out for l in layers[:-1]))
        )
    from neurocube.nn.model import TowerConfig  # local to avoid cycle at import time

    config = ModelConfig(
        towers=tuple(TowerConfig(**t) for t in tower_cfgs),
        regressor=tuple(l.n_out for l in read_layers(doc["regressor"])[:-1]),
        target_scale=doc.get("target_scale"),
    )
    model = Model(
        config=config,
        towers=towers,
        regressor=Stack(read_layers(doc["regressor"])),
        schema_fingerprint=doc["schema_fingerprint"],
        target_scale=float(doc.get("target_scale", 1.0)),
    )
    return model
