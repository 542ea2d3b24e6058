"""The multi-tower network.

Each attribute owns a tower: an encoder front from the many-hot segment
down to the attribute embedding, an encoder back from the embedding to a
2-wide projection (identity output, so latent layouts are unbounded), and
a decoder from the projection back to the segment (sigmoid output, as
cross-entropy demands).  The regressor consumes the concatenated
embeddings and emits a single value through an identity output layer.

Tower widths are configured as the list of hidden widths between the
segment width at both ends, e.g. ``[16, 8, 2, 8, 16]`` for a 16-bin
attribute means 16 -> 16 -> 8 -> 2 -> 8 -> 16 -> 16 with the embedding
tapped at the 8.  The list must contain exactly one 2 and mirror around
it; the embedding index defaults to the entry just before the 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from neurocube.nn.layers import IDENTITY, RELU, SIGMOID, DenseLayer, Stack, init_layer
from neurocube.nn.losses import BCE_EPS, loss_ae, loss_pred
from neurocube.schema import Schema, encoding_width


class ConfigError(ValueError):
    """Raised when a model configuration is inconsistent with itself or a schema."""


@dataclass(frozen=True)
class TowerConfig:
    name: str
    widths: tuple[int, ...]
    embedding_index: int | None = None

    def resolved_embedding_index(self) -> int:
        proj = self._projection_index()
        return proj - 1 if self.embedding_index is None else self.embedding_index

    def _projection_index(self) -> int:
        hits = [i for i, w in enumerate(self.widths) if w == 2]
        if len(hits) != 1:
            raise ConfigError(
                f"tower {self.name!r}: widths {list(self.widths)} must contain exactly one 2-wide projection layer"
            )
        return hits[0]

    def validate(self) -> None:
        widths = self.widths
        if not widths or any(w < 1 for w in widths):
            raise ConfigError(f"tower {self.name!r}: widths must be positive")
        proj = self._projection_index()
        if list(widths) != list(reversed(widths)):
            raise ConfigError(f"tower {self.name!r}: decoder must mirror encoder widths, got {list(widths)}")
        emb = self.resolved_embedding_index()
        if not 0 <= emb < proj:
            raise ConfigError(f"tower {self.name!r}: embedding index {emb} must precede the projection layer")
        if widths[emb] <= 2:
            raise ConfigError(f"tower {self.name!r}: embedding width {widths[emb]} must exceed 2")

    @property
    def embedding_width(self) -> int:
        return self.widths[self.resolved_embedding_index()]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus loss weights and optimizer settings.

    ``target_scale`` of None means "resolve from the training targets"
    (mean of the nonzero absolute targets) when training starts.
    """

    towers: tuple[TowerConfig, ...]
    regressor: tuple[int, ...]
    lambda1: float = 1.0
    lambda2: float = 0.0
    lambda3: float = 1.0
    lr_adam: float = 1e-3
    lr_sgd: float = 1e-4
    target_scale: float | None = None

    def validate_for(self, schema: Schema) -> None:
        names = [t.name for t in self.towers]
        expected = [a.name for a in schema.attributes]
        if names != expected:
            raise ConfigError(f"config towers {names} do not match schema attributes {expected}")
        for t in self.towers:
            t.validate()
        if any(w < 1 for w in self.regressor):
            raise ConfigError("regressor widths must be positive")

    def to_dict(self) -> dict:
        return {
            "towers": [
                {"name": t.name, "widths": list(t.widths), "embedding_index": t.embedding_index}
                for t in self.towers
            ],
            "regressor": list(self.regressor),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "lr_adam": self.lr_adam,
            "lr_sgd": self.lr_sgd,
            "target_scale": self.target_scale,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        try:
            towers = tuple(
                TowerConfig(
                    name=t["name"],
                    widths=tuple(int(w) for w in t["widths"]),
                    embedding_index=t.get("embedding_index"),
                )
                for t in doc["towers"]
            )
            return cls(
                towers=towers,
                regressor=tuple(int(w) for w in doc["regressor"]),
                lambda1=float(doc.get("lambda1", 1.0)),
                lambda2=float(doc.get("lambda2", 0.0)),
                lambda3=float(doc.get("lambda3", 1.0)),
                lr_adam=float(doc.get("lr_adam", 1e-3)),
                lr_sgd=float(doc.get("lr_sgd", 1e-4)),
                target_scale=doc.get("target_scale"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed model config: {e}") from e

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class AttributeTower:
    def __init__(self, encoder_front: Stack, encoder_back: Stack, decoder: Stack):
        self.encoder_front = encoder_front
        self.encoder_back = encoder_back
        self.decoder = decoder

    @property
    def input_width(self) -> int:
        return self.encoder_front.n_in

    @property
    def embedding_width(self) -> int:
        return self.encoder_front.n_out

    def layers(self) -> list[DenseLayer]:
        return self.encoder_front.layers + self.encoder_back.layers + self.decoder.layers


def _tower_plan(width: int, cfg: TowerConfig):
    """(n_in, n_out, activation) triples for one tower, in forward order,
    plus the embedding and projection layer indices."""
    cfg.validate()
    proj = cfg._projection_index()
    emb = cfg.resolved_embedding_index()
    seq = [width, *cfg.widths, width]
    plan = []
    for i, (a, b) in enumerate(zip(seq[:-1], seq[1:])):
        # seq position i+1 is cfg.widths position i (except the final width)
        if i == proj:
            act = IDENTITY  # 2-wide projection, unbounded latent layout
        elif i == len(seq) - 2:
            act = SIGMOID  # decoder output, (0, 1) for cross-entropy
        else:
            act = RELU
        plan.append((a, b, act))
    return plan, emb, proj


def _build_tower(width: int, cfg: TowerConfig, make_layer) -> AttributeTower:
    plan, emb, proj = _tower_plan(width, cfg)
    layers = [make_layer(a, b, act) for a, b, act in plan]
    return AttributeTower(
        encoder_front=Stack(layers[: emb + 1]),
        encoder_back=Stack(layers[emb + 1 : proj + 1]),
        decoder=Stack(layers[proj + 1 :]),
    )


def _build_regressor(concat_width: int, widths: tuple[int, ...], make_layer) -> Stack:
    seq = [concat_width, *widths, 1]
    layers = []
    for i, (a, b) in enumerate(zip(seq[:-1], seq[1:])):
        act = IDENTITY if i == len(seq) - 2 else RELU
        layers.append(make_layer(a, b, act))
    return Stack(layers)


@dataclass
class Model:
    """A built network plus everything needed to reuse it.

    Immutable during inference (forward is pure); training mutates the
    weight arrays of a single exclusively-owned instance.
    """

    config: ModelConfig
    towers: list[AttributeTower]
    regressor: Stack
    schema_fingerprint: str
    target_scale: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def input_width(self) -> int:
        return sum(t.input_width for t in self.towers)

    def segments(self) -> list[tuple[int, int]]:
        out, off = [], 0
        for t in self.towers:
            out.append((off, t.input_width))
            off += t.input_width
        return out

    def layers(self) -> list[DenseLayer]:
        out = []
        for t in self.towers:
            out.extend(t.layers())
        out.extend(self.regressor.layers)
        return out

    def parameters(self) -> list[np.ndarray]:
        """Flat [W, b, W, b, ...] list over layers; arrays are live views."""
        params = []
        for layer in self.layers():
            params.append(layer.W)
            params.append(layer.b)
        return params

    def parameter_count(self) -> int:
        return sum(l.W.size + l.b.size for l in self.layers())

    def clone_weights(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def restore_weights(self, snapshot: list[np.ndarray]) -> None:
        for p, s in zip(self.parameters(), snapshot):
            p[...] = s


def expected_parameter_count(config: ModelConfig, schema: Schema) -> int:
    """Closed-form sum of (n_in * n_out + n_out) over all configured layers."""
    total = 0
    concat = 0
    for spec, tcfg in zip(schema.attributes, config.towers):
        seq = [encoding_width(spec), *tcfg.widths, encoding_width(spec)]
        total += sum(a * b + b for a, b in zip(seq[:-1], seq[1:]))
        concat += tcfg.embedding_width
    seq = [concat, *config.regressor, 1]
    total += sum(a * b + b for a, b in zip(seq[:-1], seq[1:]))
    return total


def build(config: ModelConfig, schema: Schema, seed: int = 0) -> Model:
    """Initialize a model for a schema; deterministic for a given seed."""
    config.validate_for(schema)
    rng = np.random.default_rng(seed)

    def make_layer(a: int, b: int, act: str) -> DenseLayer:
        return init_layer(a, b, act, rng)

    towers = [
        _build_tower(encoding_width(spec), tcfg, make_layer)
        for spec, tcfg in zip(schema.attributes, config.towers)
    ]
    regressor = _build_regressor(sum(t.embedding_width for t in towers), config.regressor, make_layer)
    return Model(
        config=config,
        towers=towers,
        regressor=regressor,
        schema_fingerprint=schema.fingerprint,
        target_scale=config.target_scale,
        meta={"seed": seed, "epochs_trained": 0},
    )


@dataclass
class ForwardResult:
    predictions: np.ndarray  # (n,), network units (scaled target space)
    embeddings: list[np.ndarray]  # per attribute, (n, d_i)
    projections: list[np.ndarray]  # per attribute, (n, 2)
    reconstructions: list[np.ndarray]  # per attribute, (n, width_i)


def _check_batch(model: Model, queries: np.ndarray) -> np.ndarray:
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != model.input_width:
        raise ValueError(f"query batch shape {q.shape} does not match input width {model.input_width}")
    return q


def forward(model: Model, queries: np.ndarray) -> ForwardResult:
    """Pure batched forward pass; safe for concurrent callers."""
    q = _check_batch(model, queries)
    embeddings, projections, reconstructions = [], [], []
    for tower, (off, w) in zip(model.towers, model.segments()):
        emb = tower.encoder_front.forward(q[:, off : off + w])
        proj = tower.encoder_back.forward(emb)
        embeddings.append(emb)
        projections.append(proj)
        reconstructions.append(tower.decoder.forward(proj))
    pred = model.regressor.forward(np.concatenate(embeddings, axis=1))[:, 0]
    return ForwardResult(pred, embeddings, projections, reconstructions)


def predict(model: Model, queries: np.ndarray) -> np.ndarray:
    """Predictions rescaled back to raw target units."""
    scale = 1.0 if model.target_scale is None else model.target_scale
    return forward(model, queries).predictions * scale


def forward_cache(model: Model, queries: np.ndarray):
    q = _check_batch(model, queries)
    embeddings, projections, reconstructions, tower_caches = [], [], [], []
    for tower, (off, w) in zip(model.towers, model.segments()):
        emb, c_front = tower.encoder_front.forward_cache(q[:, off : off + w])
        proj, c_back = tower.encoder_back.forward_cache(emb)
        rec, c_dec = tower.decoder.forward_cache(proj)
        embeddings.append(emb)
        projections.append(proj)
        reconstructions.append(rec)
        tower_caches.append((c_front, c_back, c_dec))
    concat = np.concatenate(embeddings, axis=1)
    reg_out, c_reg = model.regressor.forward_cache(concat)
    result = ForwardResult(reg_out[:, 0], embeddings, projections, reconstructions)
    return result, (tower_caches, c_reg)


def batch_loss(
    model: Model, result: ForwardResult, queries: np.ndarray, targets: np.ndarray
) -> tuple[float, float, float]:
    """(total, L_pred, L_ae), each a mean over the batch.

    ``targets`` are expected in network units (already scaled).
    """
    cfg = model.config
    l_pred = float(np.mean(loss_pred(result.predictions, targets, cfg.lambda1, cfg.lambda2)))
    ae = np.zeros(len(targets))
    for rec, (off, w) in zip(result.reconstructions, model.segments()):
        ae += loss_ae(rec, queries[:, off : off + w])
    l_ae = float(np.mean(ae))
    return l_pred + cfg.lambda3 * l_ae, l_pred, l_ae


def backward(
    model: Model, caches, result: ForwardResult, queries: np.ndarray, targets: np.ndarray
) -> list[np.ndarray]:
    """Gradient of the mean batch loss w.r.t. every parameter.

    Returns a flat [gW, gb, ...] list aligned with model.parameters().
    """
    cfg = model.config
    tower_caches, c_reg = caches
    n = len(targets)
    e = result.predictions - targets
    dpred = (cfg.lambda1 * np.sign(e) + 2.0 * cfg.lambda2 * e) / n
    d_concat, reg_grads = model.regressor.backward(c_reg, dpred[:, None])

    tower_grads = []
    emb_off = 0
    for tower, (off, w), (c_front, c_back, c_dec), rec in zip(
        model.towers, model.segments(), tower_caches, result.reconstructions
    ):
        d_emb = d_concat[:, emb_off : emb_off + tower.embedding_width].copy()
        emb_off += tower.embedding_width
        if cfg.lambda3 != 0.0:
            r = queries[:, off : off + w]
            rec_c = np.clip(rec, BCE_EPS, 1.0 - BCE_EPS)
            drec = (cfg.lambda3 / n) * ((1.0 - r) / (1.0 - rec_c) - r / rec_c)
            dproj, dec_grads = tower.decoder.backward(c_dec, drec)
            d_emb_ae, back_grads = tower.encoder_back.backward(c_back, dproj)
            d_emb += d_emb_ae
        else:
            dec_grads = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in tower.decoder.layers]
            back_grads = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in tower.encoder_back.layers]
        _, front_grads = tower.encoder_front.backward(c_front, d_emb)
        tower_grads.append(front_grads + back_grads + dec_grads)

    flat: list[np.ndarray] = []
    for grads in tower_grads:
        for gW, gb in grads:
            flat.extend((gW, gb))
    for gW, gb in reg_grads:
        flat.extend((gW, gb))
    return flat


def train_step_loss(model: Model, queries: np.ndarray, targets: np.ndarray):
    """Forward + loss + gradients in one call; returns (losses, grads)."""
    result, caches = forward_cache(model, queries)
    losses = batch_loss(model, result, queries, targets)
    grads = backward(model, caches, result, queries, targets)
    return losses, grads
