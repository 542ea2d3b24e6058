"""Training loop: state-based mini-batches, Adam then gradient descent,
periodic RAE evaluation on held-out data, best-checkpoint tracking.

The accuracy metric is Relative Absolute Error,
``RAE = sum|pred - truth| / sum|truth - mean(truth)| * 100%``:
0% is a perfect predictor, 100% is as good as always answering the
test-set mean.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from neurocube.datagen import TrainingSet, make_batches
from neurocube.nn import (
    AdamState,
    Model,
    adam_step,
    batch_loss,
    forward,
    save_model,
    sgd_step,
    train_step_loss,
)
from neurocube.schema import Schema

log = logging.getLogger("neurocube.training")


class DegenerateMetricError(ValueError):
    """The test targets are constant, so the RAE denominator is zero."""


class TrainingDiverged(RuntimeError):
    """Mean epoch loss went non-finite."""


@dataclass(frozen=True)
class TrainPlan:
    epochs: int
    adam_epochs: int = 15
    states_per_batch: int = 8
    seed: int = 0
    eval_every: int = 10
    keep_best: bool = True
    checkpoint_path: str | None = None

    def __post_init__(self):
        if not 0 <= self.adam_epochs <= max(self.epochs, 0):
            # adam_epochs beyond the horizon is harmless but almost surely a typo
            if self.adam_epochs < 0 or self.epochs < 0:
                raise ValueError("epochs and adam_epochs must be non-negative")


@dataclass
class EvalReport:
    epoch: int
    rae: float
    per_attribute: dict[str, float | None]
    loss_pred: float
    loss_ae: float
    seconds: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "rae": self.rae,
            "per_attribute": self.per_attribute,
            "loss_pred": self.loss_pred,
            "loss_ae": self.loss_ae,
            "seconds": self.seconds,
        }


def _scaled_targets(model: Model, targets: np.ndarray) -> np.ndarray:
    scale = model.target_scale
    return targets if scale in (None, 1.0) else targets / scale


def resolve_target_scale(model: Model, ts: TrainingSet) -> float:
    """Mean absolute nonzero training target; 1.0 for an all-zero set."""
    nz = np.abs(ts.targets[ts.targets != 0.0])
    return float(nz.mean()) if len(nz) else 1.0


def evaluate_rae(
    model: Model, test_set: TrainingSet, schema: Schema | None = None, epoch: int = 0
) -> EvalReport:
    """RAE over the full held-out set, in raw target units.

    The per-attribute breakdown attributes each sample to the group-by
    that produced it; entries with a constant-target subset are None.
    """
    if test_set.n_samples == 0:
        raise ValueError("test set is empty")
    t0 = time.perf_counter()
    queries = test_set.queries.astype(np.float64)
    targets = test_set.targets
    result = forward(model, queries)
    scale = 1.0 if model.target_scale is None else model.target_scale
    preds = result.predictions * scale

    denom = float(np.abs(targets - targets.mean()).sum())
    if denom == 0.0:
        raise DegenerateMetricError("constant test targets, RAE undefined")
    rae = float(np.abs(preds - targets).sum() / denom * 100.0)

    per_attribute: dict[str, float | None] = {}
    if schema is not None:
        try:
            attr_ids = test_set.attribute_ids(schema)
        except ValueError:
            # Not a group-by-shaped set; the breakdown is undefined.
            attr_ids = None
    if schema is not None and attr_ids is not None:
        for i, spec in enumerate(schema.attributes):
            sel = attr_ids == i
            d = float(np.abs(targets[sel] - targets[sel].mean()).sum())
            per_attribute[spec.name] = (
                None if d == 0.0 else float(np.abs(preds[sel] - targets[sel]).sum() / d * 100.0)
            )

    l_total, l_pred, l_ae = batch_loss(model, result, queries, _scaled_targets(model, targets))
    return EvalReport(
        epoch=epoch,
        rae=rae,
        per_attribute=per_attribute,
        loss_pred=l_pred,
        loss_ae=l_ae,
        seconds=time.perf_counter() - t0,
    )


def train(
    model: Model,
    training_set: TrainingSet,
    test_set: TrainingSet,
    plan: TrainPlan,
    schema: Schema | None = None,
    log_path: str | None = None,
) -> tuple[Model, list[EvalReport]]:
    """Run the plan; returns the best-RAE weights and all eval reports.

    Adam drives the first ``adam_epochs`` epochs, plain gradient descent
    the rest.  Deterministic for fixed (seed, plan, sets) when run
    single-threaded.
    """
    for name, ts in (("training", training_set), ("test", test_set)):
        if ts.schema_fingerprint != model.schema_fingerprint:
            raise ValueError(f"{name} set was generated against a different schema")

    if model.target_scale is None:
        model.target_scale = resolve_target_scale(model, training_set)
        log.info("resolved target scale to %.6g", model.target_scale)

    rng = np.random.default_rng(plan.seed)
    adam = AdamState.for_params(model.parameters())
    reports: list[EvalReport] = []
    best_rae = np.inf
    best_weights = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    t_start = time.perf_counter()

    def run_eval(epoch: int) -> None:
        nonlocal best_rae, best_weights
        report = evaluate_rae(model, test_set, schema=schema, epoch=epoch)
        report.seconds = time.perf_counter() - t_start
        reports.append(report)
        log.info("epoch %d: RAE %.3f%% (pred %.5g, ae %.5g)", epoch, report.rae, report.loss_pred, report.loss_ae)
        if log_fh:
            log_fh.write(json.dumps(report.to_dict()) + "\n")
            log_fh.flush()
        if plan.keep_best and report.rae < best_rae:
            best_rae = report.rae
            best_weights = model.clone_weights()
            if plan.checkpoint_path:
                save_model(model, plan.checkpoint_path)

    try:
        if plan.epochs == 0:
            run_eval(0)
        for epoch in range(plan.epochs):
            use_adam = epoch < plan.adam_epochs
            epoch_losses = []
            for batch in make_batches(training_set, plan.states_per_batch, rng):
                targets = _scaled_targets(model, batch.targets)
                (l_total, _, _), grads = train_step_loss(model, batch.queries, targets)
                epoch_losses.append(l_total)
                if use_adam:
                    adam_step(model.parameters(), grads, adam, model.config.lr_adam)
                else:
                    sgd_step(model.parameters(), grads, model.config.lr_sgd)
            mean_loss = float(np.mean(epoch_losses))
            if not np.isfinite(mean_loss):
                raise TrainingDiverged(
                    f"mean loss {mean_loss} at epoch {epoch} "
                    f"(optimizer={'adam' if use_adam else 'sgd'}, "
                    f"lr={model.config.lr_adam if use_adam else model.config.lr_sgd})"
                )
            model.meta["epochs_trained"] = model.meta.get("epochs_trained", 0) + 1
            if (epoch + 1) % plan.eval_every == 0 or epoch + 1 == plan.epochs:
                run_eval(epoch + 1)
    finally:
        if log_fh:
            log_fh.close()

    if plan.keep_best and best_weights is not None:
        model.restore_weights(best_weights)
    return model, reports


def suggest_lambdas(model: Model, training_set: TrainingSet, n_sample: int = 1024, seed: int = 0):
    """Loss-weight heuristic from estimated magnitudes on a data sample.

    The L1 weight anchors at 1; the squared-term weight is chosen so its
    contribution sits one to two orders of magnitude above the
    reconstruction term, and the reconstruction weight two orders below
    that, each rounded to a power of ten.  A starting point, not a tuner.
    """
    rng = np.random.default_rng(seed)
    idx = rng.choice(training_set.n_samples, size=min(n_sample, training_set.n_samples), replace=False)
    queries = training_set.queries[idx].astype(np.float64)
    targets = _scaled_targets(model, training_set.targets[idx])
    result = forward(model, queries)
    e = result.predictions - targets
    l1 = float(np.mean(np.abs(e)))
    l2 = float(np.mean(e * e))
    ae = batch_loss(model, result, queries, targets)[2]

    lambda1 = 1.0
    if l2 <= 0 or ae <= 0:
        return lambda1, 0.0, 1.0
    # geometric middle of the 1-2 order window, then snap to a power of ten
    lambda2 = 10.0 ** round(np.log10(30.0 * lambda1 * ae / l2))
    lambda3 = 10.0 ** round(np.log10(lambda2 * l2 / (100.0 * ae)))
    return lambda1, lambda2, lambda3
