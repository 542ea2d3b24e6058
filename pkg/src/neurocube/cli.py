"""Command-line pipeline: CSV -> store -> training sets -> model -> service.

    neurocube synth     write a synthetic correlated dataset (schema + store)
    neurocube ingest    bin a CSV into a store cache
    neurocube generate  sample selection states into training/test sets
    neurocube train     fit a model (optionally several seeds for stability)
    neurocube eval      RAE report for a model on a test set
    neurocube export    portable JSON model for in-browser inference
    neurocube serve     HTTP service for the dashboard
    neurocube ablate    accuracy sweeps over model size / states / bins / rows

Every subcommand documents its flags under ``--help``.  Set NEUROCUBE_LOG
to debug/info/warning/error to control verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from neurocube import synth, training
from neurocube.datagen import RangeStrategy, generate, generate_split, load_set, save_set
from neurocube.nn import (
    ModelConfig,
    TowerConfig,
    build,
    export_portable,
    load_model,
    save_model,
)
from neurocube.oracle import ingest_csv, load_store, save_store
from neurocube.schema import Schema, load_schema
from neurocube.training import TrainPlan, train

log = logging.getLogger("neurocube.cli")

_STRATEGIES = {
    "endpoints": RangeStrategy.ENDPOINTS,
    "length-first": RangeStrategy.LENGTH_FIRST,
}

# Hidden-width tiers for the default architecture, chosen by segment width.
_TOWER_TIERS = (
    (32, (16, 8, 2, 8, 16)),
    (128, (64, 16, 2, 16, 64)),
    (65535, (128, 20, 2, 20, 128)),
)


def default_config(schema: Schema, **overrides) -> ModelConfig:
    """A reasonable architecture for a schema: tower widths picked by
    input width, modest shared regressor.  Loss weights and rates come
    from the config defaults unless overridden."""
    towers = []
    for spec in schema.attributes:
        w = spec.width
        widths = next(t for cap, t in _TOWER_TIERS if w <= cap)
        towers.append(TowerConfig(name=spec.name, widths=widths))
    cfg = ModelConfig(towers=tuple(towers), regressor=(64, 32, 8))
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _print_table(headers: list[str], rows: list[list[str]]) -> None:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    print(fmt.format(*headers))
    print(fmt.format(*("-" * w for w in widths)))
    for row in rows:
        print(fmt.format(*row))


def _fmt_rae(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.2f}%"


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    schema, store = synth.splom_store(args.rows, bins=args.bins, seed=args.seed)
    Path(args.schema_out).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")
    save_store(store, args.store_out)
    if args.csv_out:
        synth.write_splom_csv(args.csv_out, args.rows, seed=args.seed)
    print(f"wrote {store.n_records} records, schema fingerprint {schema.fingerprint[:12]}")
    return 0


def cmd_ingest(args) -> int:
    schema = load_schema(args.schema)
    store, rejected = ingest_csv(schema, args.csv)
    save_store(store, args.out)
    print(f"ingested {store.n_records} records ({rejected} rejected) -> {args.out}")
    return 0


def cmd_generate(args) -> int:
    schema = load_schema(args.schema)
    store = load_store(schema, args.store)
    strategy = _STRATEGIES[args.strategy]
    if args.test_out:
        train_set, test_set = generate_split(
            store, schema, args.states, strategy, args.seed, args.test_fraction
        )
        save_set(test_set, args.test_out)
        print(f"test: {test_set.n_states} states, {test_set.n_samples} samples -> {args.test_out}")
    else:
        train_set = generate(store, schema, args.states, strategy, args.seed)
    save_set(train_set, args.out)
    print(f"train: {train_set.n_states} states, {train_set.n_samples} samples -> {args.out}")
    return 0


def _load_config(args, schema: Schema) -> ModelConfig:
    cfg = ModelConfig.from_json(args.config) if args.config else default_config(schema)
    overrides = {}
    for name in ("lambda1", "lambda2", "lambda3", "lr_adam", "lr_sgd", "target_scale"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    cfg.validate_for(schema)
    return cfg


def cmd_train(args) -> int:
    schema = load_schema(args.schema)
    train_set = load_set(args.train)
    test_set = load_set(args.test)
    cfg = _load_config(args, schema)
    plan = TrainPlan(
        epochs=args.epochs,
        adam_epochs=args.adam_epochs,
        states_per_batch=args.states_per_batch,
        seed=args.seed,
        eval_every=args.eval_every,
    )

    runs = []
    for rep in range(args.repeat):
        seed = args.seed + rep
        model = build(cfg, schema, seed=seed)
        plan_r = dataclasses.replace(plan, seed=seed)
        log_path = args.log if args.repeat == 1 else (f"{args.log}.{rep}" if args.log else None)
        model, reports = train(model, train_set, test_set, plan_r, schema=schema, log_path=log_path)
        best = min(r.rae for r in reports)
        runs.append((seed, model, best))
        print(f"seed {seed}: best RAE {best:.3f}%")

    if args.repeat > 1:
        raes = np.array([r[2] for r in runs])
        print(f"over {args.repeat} seeds: mean {raes.mean():.3f}%  std {raes.std():.3f}%  "
              f"min {raes.min():.3f}%  max {raes.max():.3f}%")
    best_seed, best_model, best_rae = min(runs, key=lambda r: r[2])
    if args.out:
        save_model(best_model, args.out)
        print(f"saved best model (seed {best_seed}, RAE {best_rae:.3f}%) -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    schema = load_schema(args.schema)
    model = load_model(args.model, expect_fingerprint=schema.fingerprint)
    test_set = load_set(args.test)
    report = training.evaluate_rae(model, test_set, schema=schema)
    print(f"RAE {report.rae:.3f}%  (pred loss {report.loss_pred:.5g}, recon loss {report.loss_ae:.5g})")
    _print_table(
        ["attribute", "RAE"],
        [[name, _fmt_rae(v)] for name, v in report.per_attribute.items()],
    )
    return 0


def cmd_export(args) -> int:
    model = load_model(args.model)
    data = export_portable(model, args.out, f32=args.f32)
    print(f"wrote {len(data)} bytes -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    from neurocube.service import serve

    schema = load_schema(args.schema)
    model = load_model(args.model, expect_fingerprint=schema.fingerprint)
    store = load_store(schema, args.store) if args.store else None
    serve(model, schema, store=store, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------- ablation


def _ablate_once(schema, store, n_states, cfg, epochs, adam_epochs, seed):
    train_set, test_set = generate_split(store, schema, n_states, seed=seed)
    model = build(cfg, schema, seed=seed)
    plan = TrainPlan(epochs=epochs, adam_epochs=min(adam_epochs, epochs), seed=seed,
                     eval_every=max(1, epochs // 5))
    model, reports = train(model, train_set, test_set, plan, schema=schema)
    return model, min(r.rae for r in reports)


_ABLATE_DEFAULTS = {
    "model-size": "small,medium,large",
    "states": "125,250,500,1000,2000",
    "bins": "10,30,50",
    "raw-rows": "1000,10000,100000",
}

_SIZE_TIERS = {
    "small": ((8, 2, 8), (16, 8)),
    "medium": ((16, 8, 2, 8, 16), (64, 32, 8)),
    "large": ((64, 32, 2, 32, 64), (128, 64, 16)),
}


def cmd_ablate(args) -> int:
    values = (args.values or _ABLATE_DEFAULTS[args.axis]).split(",")
    rows = []
    for value in values:
        value = value.strip()
        bins, n_rows, n_states = args.bins, args.rows, args.states
        if args.axis == "bins":
            bins = int(value)
        elif args.axis == "raw-rows":
            n_rows = int(value)
        elif args.axis == "states":
            n_states = int(value)
        schema, store = synth.splom_store(n_rows, bins=bins, seed=args.data_seed)
        if args.axis == "model-size":
            tower, regressor = _SIZE_TIERS[value]
            towers = tuple(TowerConfig(name=a.name, widths=tower) for a in schema.attributes)
            cfg = ModelConfig(towers=towers, regressor=regressor)
        else:
            cfg = default_config(schema)
        model, rae = _ablate_once(schema, store, n_states, cfg, args.epochs, args.adam_epochs, args.seed)
        kb = model.parameter_count() * 8 / 1024
        rows.append([args.axis, value, f"{model.parameter_count()}", f"{kb:.0f}KB", f"{rae:.2f}%"])
        log.info("ablate %s=%s -> RAE %.2f%%", args.axis, value, rae)
    _print_table(["axis", "value", "params", "weights", "best RAE"], rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("axis,value,params,weights_kb,rae\n")
            for r in rows:
                fh.write(",".join(v.rstrip("KB%") for v in r) + "\n")
    return 0


# ---------------------------------------------------------------- wiring


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neurocube", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic correlated dataset")
    s.add_argument("--rows", type=int, default=100_000)
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--schema-out", required=True)
    s.add_argument("--store-out", required=True)
    s.add_argument("--csv-out")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("ingest", help="bin a CSV into a store cache")
    s.add_argument("--schema", required=True)
    s.add_argument("--csv", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_ingest)

    s = sub.add_parser("generate", help="sample selection states into sets")
    s.add_argument("--schema", required=True)
    s.add_argument("--store", required=True)
    s.add_argument("--states", type=int, required=True)
    s.add_argument("--strategy", choices=sorted(_STRATEGIES), default="length-first")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--test-out")
    s.add_argument("--test-fraction", type=float, default=0.1)
    s.set_defaults(fn=cmd_generate)

    s = sub.add_parser("train", help="fit a model on generated sets")
    s.add_argument("--schema", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--config", help="model config JSON (default: derived from schema)")
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--adam-epochs", type=int, default=15)
    s.add_argument("--states-per-batch", type=int, default=8)
    s.add_argument("--eval-every", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--repeat", type=int, default=1, help="train N seeds, report spread, keep best")
    for name in ("lambda1", "lambda2", "lambda3", "lr-adam", "lr-sgd", "target-scale"):
        s.add_argument(f"--{name}", type=float, default=None)
    s.add_argument("--log", help="NDJSON evaluation log path")
    s.add_argument("--out", help="checkpoint path for the best model")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("eval", help="RAE report on a test set")
    s.add_argument("--schema", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("export", help="portable JSON model")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--f32", action="store_true", help="store weights at single precision")
    s.set_defaults(fn=cmd_export)

    s = sub.add_parser("serve", help="HTTP service for the dashboard")
    s.add_argument("--schema", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--store", help="store cache enabling oracle comparison")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(fn=cmd_serve)

    s = sub.add_parser("ablate", help="accuracy sweeps on the synthetic dataset")
    s.add_argument("--axis", choices=sorted(_ABLATE_DEFAULTS), required=True)
    s.add_argument("--values", help="comma-separated sweep values (default per axis)")
    s.add_argument("--rows", type=int, default=50_000)
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--states", type=int, default=500)
    s.add_argument("--epochs", type=int, default=60)
    s.add_argument("--adam-epochs", type=int, default=15)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--data-seed", type=int, default=0)
    s.add_argument("--out", help="also write the table as CSV")
    s.set_defaults(fn=cmd_ablate)
    return p


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("NEUROCUBE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
