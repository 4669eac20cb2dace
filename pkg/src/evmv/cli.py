"""Command-line pipeline: synth, train, eval, inspect, perturb.

Every subcommand is deterministic given its flags and seed. The seed
comes from --seed, else the EVMV_SEED environment variable, else 12.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from .data import (
    SynthConfig,
    load_dataset,
    save_dataset,
    stratified_split,
    synth_generate,
)
from .errors import DataError, NumericError
from .metrics import DEFAULT_THRESHOLDS, build_report, write_report
from .net import ModelBundle, TrainConfig, forward_fused, load_bundle, predict_batch, save_bundle, train
from .perturb import NoiseConfig, perturb_corpus
from .rand import DEFAULT_SEED


def _resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get("EVMV_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise DataError(f"EVMV_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _float_list(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _fmt17(x):
    return format(float(x), ".17g")


def _render_json(obj, indent=0):
    """JSON text with floats rendered to 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(k)}: {_render_json(v, indent + 1)}" for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ", ".join(_render_json(v, indent + 1) for v in obj)
        return "[" + items + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt17(obj)
    return json.dumps(obj)


def cmd_synth(args):
    seed = _resolve_seed(args.seed)
    dims = _int_list(args.dims) if args.dims else (8,) * args.views
    if args.informativeness:
        informativeness = _float_list(args.informativeness)
    elif args.views == 3:
        informativeness = (1.0, 0.6, 0.0)
    else:
        informativeness = (1.0,) * args.views
    cfg = SynthConfig(
        num_classes=args.classes,
        num_views=args.views,
        samples_per_class=args.samples_per_class,
        dims=dims,
        informativeness=informativeness,
        label_noise=args.label_noise,
        seed=seed,
    )
    ds = synth_generate(cfg)
    manifest_path = save_dataset(ds, args.out)
    print(f"dataset: {ds.name} ({len(ds)} samples, {ds.num_classes} classes)")
    counts = np.bincount(ds.labels, minlength=ds.num_classes)
    for c, count in enumerate(counts):
        print(f"  class {c}: {count}")
    for vm, info in zip(ds.views, cfg.informativeness):
        print(f"  view {vm.name}: dims={vm.dims} informativeness={info}")
    print(f"wrote {manifest_path}")
    return 0


def _load_views_subset(args, ds):
    if args.views:
        names = [n.strip() for n in args.views.split(",") if n.strip()]
        ds = ds.select_views(names)
    return ds


def cmd_train(args):
    seed = _resolve_seed(args.seed)
    ds = _load_views_subset(args, load_dataset(args.manifest))
    fractions = _float_list(args.split)
    train_set, val_set, _ = stratified_split(ds, fractions, seed)
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        max_epochs=args.max_epochs,
        anneal_epochs=args.anneal_epochs,
        patience=args.patience,
        seed=seed,
    )
    bundle = ModelBundle.initialized(
        [vm.dims for vm in ds.views], ds.view_names, ds.num_classes, config,
        hidden_dim=args.hidden_dim,
    )
    bundle, history = train(bundle, train_set, val_set, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.bin"
    save_bundle(bundle, model_path)
    with open(out / "history.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "lambda", "train_loss", "val_loss"])
        for row in history:
            writer.writerow([row.epoch, repr(row.lam), repr(row.train_loss), repr(row.val_loss)])
    best = min(history, key=lambda r: r.val_loss)
    print(f"trained {bundle.num_views} views for {len(history)} epochs (backend: {backend_name()})")
    print(f"best epoch {best.epoch}: val_loss={best.val_loss:.6f}")
    print(f"wrote {model_path}")
    return 0


def _select_subset(ds, subset, fractions, seed):
    if subset == "all":
        return ds
    parts = dict(zip(("train", "val", "test"), stratified_split(ds, fractions, seed)))
    return parts[subset]


def cmd_eval(args):
    seed = _resolve_seed(args.seed)
    bundle = load_bundle(args.model)
    ds = load_dataset(args.manifest).select_views(bundle.view_names)
    ds = _select_subset(ds, args.subset, _float_list(args.split), seed)
    records = predict_batch(bundle, ds)
    predicted = [r.predicted_class for r in records]
    probs = np.stack([r.fused_probs for r in records])
    uncertainties = [r.fused_uncertainty for r in records]
    thresholds = _float_list(args.thresholds) if args.thresholds else DEFAULT_THRESHOLDS
    report = build_report(
        predicted, ds.labels, probs, uncertainties, ds.num_classes, thresholds
    )
    paths = write_report(report, args.out)
    print(f"evaluated {report.num_samples} samples ({args.subset} subset)")
    print(f"  accuracy={report.accuracy:.4f} f1={report.f1:.4f}")
    if report.auroc is not None:
        print(f"  auroc={report.auroc:.4f} ({report.score_averaging})")
    if report.auprc is not None:
        print(f"  auprc={report.auprc:.4f}")
    if report.uncertainty_auroc is not None:
        print(f"  uncertainty_auroc={report.uncertainty_auroc:.4f}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_inspect(args):
    bundle = load_bundle(args.model)
    ds = load_dataset(args.manifest).select_views(bundle.view_names)
    idx = ds.index_of(args.sample_id)
    sample = [ds.view(name).data[idx] for name in bundle.view_names]
    fused, _, record = forward_fused(bundle, sample, sample_id=args.sample_id)
    doc = {
        "sample_id": record.sample_id,
        "num_classes": bundle.num_classes,
        "predicted_class": record.predicted_class,
        "conflict": record.final_conflict,
        "fused": {
            "num_classes": bundle.num_classes,
            "beliefs": [float(b) for b in dirichlet_beliefs(fused)],
            "uncertainty": record.fused_uncertainty,
            "expected_probs": [float(p) for p in record.fused_probs],
        },
        "views": [
            {
                "name": name,
                "num_classes": o.num_classes,
                "beliefs": [float(b) for b in o.beliefs],
                "uncertainty": o.uncertainty,
            }
            for name, o in zip(bundle.view_names, record.per_view_opinions)
        ],
    }
    print(_render_json(doc))
    return 0


def dirichlet_beliefs(d):
    """Belief masses implied by a Dirichlet: (alpha - 1) / S."""
    return (d.alpha - 1.0) / d.strength


def cmd_perturb(args):
    seed = _resolve_seed(args.seed)
    cfg = NoiseConfig(p=args.p, seed=seed)
    stats = perturb_corpus(args.input, args.output, cfg)
    print(
        f"perturbed {stats.lines} lines: {stats.mutations}/{stats.eligible} "
        f"eligible characters mutated (rate {stats.rate:.4f}, target {cfg.p})"
    )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evmv",
        description="Uncertainty-aware multi-view classification with evidential fusion.",
    )
    parser.add_argument("--version", action="version", version=f"evmv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-view dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--views", type=int, default=3)
    p.add_argument("--samples-per-class", type=int, default=1000)
    p.add_argument("--dims", help="comma list, one per view (default 8 each)")
    p.add_argument("--informativeness", help="comma list in [0,1], one per view")
    p.add_argument("--label-noise", type=float, default=0.1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train evidence heads on a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--views", help="comma list of view names to keep (ablation)")
    p.add_argument("--split", default="0.64,0.16,0.20")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=12)
    p.add_argument("--max-epochs", type=int, default=15)
    p.add_argument("--anneal-epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subset", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--split", default="0.64,0.16,0.20")
    p.add_argument("--thresholds", help="comma list for the selective sweep")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="per-view opinions for one sample")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--sample-id", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("perturb", help="inject typographical noise into a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
