"""Command-line entry point: ``generate``, ``train``, ``compare`` and ``report``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error
(unreadable, malformed or mismatched files), 4 numerical abort (non-finite loss).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

from . import __version__
from . import backend
from .config import TrainConfig, load_config_file
from .data import (GENERATORS, NoiseSpec, apply_label_noise, dumps_dataset, file_sha256, generate,
                   load_dataset, split)
from .errors import ConfigError, DataError, NonFiniteLossError
from .experiment import ARMS, FileTask, TaskSpec, compare, final_bins, format_table, score
from .linalg import Rng, derive_seed
from .model import save_checkpoint
from .trainer import N_EPOCH_BINS, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST_FORMAT = "binaryppo-manifest"
MANIFEST_VERSION = 1
METRICS_VERSION = 1


class UsageError(Exception):
    pass


def _flip_rate(text):
    value = float(text)
    if not 0.0 <= value < 0.5:
        raise argparse.ArgumentTypeError(f"flip rate must lie in [0, 0.5), got {value}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return value


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


# -- generate ----------------------------------------------------------------

def _generator_params(args):
    if args.task == "blobs":
        return {"mean_separation": args.sep, "d": args.d}
    return {"scale": args.scale, "d": args.d}


def _sidecar(path):
    return Path(str(path) + ".provenance.json")


def _emit(dataset, path, fmt, force, extra):
    path = Path(path)
    if (path.exists() or _sidecar(path).exists()) and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_dataset(dataset, fmt))
    prov = dict(dataset.provenance, **extra, file=path.name, format=fmt, sha256=file_sha256(path),
                n_examples=len(dataset), n_positive=int(dataset.labels.sum()), package_version=__version__)
    _write_json(_sidecar(path), prov)
    print(f"wrote {path} ({len(dataset)} examples)")


def cmd_generate(args):
    fmt = args.format or Path(args.out).suffix.lstrip(".").lower() or "csv"
    if fmt not in ("csv", "jsonl"):
        raise UsageError(f"--format must be csv or jsonl, got {fmt!r}")
    noise = NoiseSpec(args.flip, args.imbalance)
    params = _generator_params(args)
    flags = {"cli": {"task": args.task, "n": args.n, "flip": args.flip, "imbalance": args.imbalance,
                     "seed": args.seed, "test_fraction": args.test_fraction, **params}}
    if args.test_fraction is None:
        data = generate(args.task, args.n, noise, rng=Rng(args.seed), **params)
        _emit(data, args.out, fmt, args.force, flags)
        return EXIT_OK
    # clean sample, stratified split, then noise on the training part only
    data = generate(args.task, args.n, NoiseSpec(0.0, args.imbalance), rng=Rng(args.seed), **params)
    train_set, test_set = split(data, args.test_fraction, Rng(derive_seed(args.seed, "split")))
    if args.flip:
        train_set = apply_label_noise(train_set, args.flip, Rng(derive_seed(args.seed, "noise")))
    out = Path(args.out)
    stem = out.with_suffix("")
    _emit(train_set, f"{stem}-train.{fmt}", fmt, args.force, flags)
    _emit(test_set, f"{stem}-test.{fmt}", fmt, args.force, flags)
    return EXIT_OK


# -- train -------------------------------------------------------------------

CONFIG_FLAGS = [
    # (flag, dest, dotted key, type, help)
    ("--method", "method", "method", str, "binaryppo | vanilla_ppo | sft"),
    ("--epochs", "epochs", "epochs", int, "number of epochs"),
    ("--schedule", "schedule", "schedule", str, "ee | pe | comma list of explore/exploit"),
    ("--batch-size", "batch_size", "batch_size", int, "minibatch size"),
    ("--lr", "learning_rate", "learning_rate", float, "learning rate"),
    ("--optimizer", "optimizer", "optimizer", str, "adam | sgd"),
    ("--sampler", "sampler", "sampler", str, "balanced | natural"),
    ("--seed", "seed", "seed", int, "training seed"),
    ("--alpha", "alpha", "loss.alpha", float, "value-loss weight"),
    ("--beta", "beta", "loss.beta", float, "cross-entropy weight"),
    ("--gamma", "gamma", "loss.gamma", float, "entropy-bonus weight"),
    ("--clip-epsilon", "clip_epsilon", "loss.clip_epsilon", float, "PPO clip range"),
    ("--normalize-advantage", "normalize_advantage", "loss.normalize_advantage", str, "true | false"),
    ("--kappa", "kappa", "reward.kappa", float, "reward scale"),
    ("--reward-shape", "reward_shape", "reward.shape", str, "literal-log | one-plus-log | linear"),
    ("--p-min", "p_min", "reward.p_min", float, "probability floor"),
    ("--hidden", "hidden", "model.hidden", str, "hidden widths, e.g. 32,32"),
]


def _add_config_flags(parser):
    group = parser.add_argument_group("config overrides (take precedence over --config)")
    group.add_argument("--config", help="YAML config file (flat dotted keys or nested)")
    for flag, dest, _, typ, help_ in CONFIG_FLAGS:
        group.add_argument(flag, dest=dest, type=typ, default=None, help=help_)
    group.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any dotted config key")


def _resolve_config(args):
    """Defaults < config file < command-line flags."""
    flat = load_config_file(args.config) if args.config else {}
    for _, dest, key, _, _ in CONFIG_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            flat[key] = value
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        flat[key.strip()] = value.strip()
    return TrainConfig().override(flat)


def _data_entry(path):
    path = Path(path).resolve()
    entry = {"path": str(path), "sha256": file_sha256(path)}
    side = _sidecar(path)
    if side.exists():
        entry["provenance"] = json.loads(side.read_text())
    return entry


def _new_run_dir(root, method):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    run = root / f"{stamp}-{method}"
    k = 1
    while run.exists():
        run = root / f"{stamp}-{method}-{k}"
        k += 1
    run.mkdir()
    return run


def _load_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataError(f"{path} is not a {MANIFEST_FORMAT} file")
    return manifest


def cmd_train(args):
    if args.from_manifest:
        manifest = _load_manifest(args.from_manifest)
        config = TrainConfig().override(manifest["config"])
        data_path = manifest["data"]["train"]["path"]
        test_path = manifest["data"].get("test", {}).get("path")
        n_bins = manifest.get("n_bins", N_EPOCH_BINS)
        for role, entry in manifest["data"].items():
            if file_sha256(entry["path"]) != entry["sha256"]:
                raise DataError(f"{role} data {entry['path']} no longer matches the manifest checksum")
    else:
        if not args.data:
            raise UsageError("train needs --data (or --from-manifest)")
        config = _resolve_config(args)
        data_path, test_path, n_bins = args.data, args.test_data, args.bins
    train_set = load_dataset(data_path)
    test_set = load_dataset(test_path) if test_path else None

    run = _new_run_dir(args.out_dir, config.method)
    manifest = {
        "format": MANIFEST_FORMAT,
        "format_version": MANIFEST_VERSION,
        "metrics_version": METRICS_VERSION,
        "package_version": __version__,
        "backend": backend.NAME,
        "config": config.to_flat(),
        "seed": config.seed,
        "n_bins": n_bins,
        "data": {"train": _data_entry(data_path)},
        "started_at": _now(),
        "finished_at": None,
        "status": "running",
    }
    if test_path:
        manifest["data"]["test"] = _data_entry(test_path)
    if args.from_manifest:
        manifest["reproduces"] = str(Path(args.from_manifest).resolve())
    _write_json(run / "manifest.json", manifest)

    metrics = (run / "metrics.jsonl").open("w")
    timing = (run / "timing.jsonl").open("w")

    def on_epoch(report):
        metrics.write(json.dumps(report.record(), sort_keys=True) + "\n")
        metrics.flush()
        timing.write(json.dumps({"epoch": report.epoch, "wall_time": report.wall_time}) + "\n")
        if not args.quiet:
            print(f"epoch {report.epoch:3d} {report.mode:10s} loss {report.loss.total:+.5f} "
                  f"H {report.entropy:.4f} KL {report.kl:.2e} acc {report.train_accuracy:.4f}")

    try:
        result = train(config, train_set, on_epoch=on_epoch, n_bins=n_bins)
    except NonFiniteLossError as exc:
        metrics.close()
        timing.close()
        _write_json(run / "nonfinite_dump.json", {"error": str(exc), "batch": exc.dump})
        manifest.update(status="aborted", finished_at=_now())
        _write_json(run / "manifest.json", manifest)
        print(f"error: {exc}; diagnostic written to {run / 'nonfinite_dump.json'}", file=sys.stderr)
        return EXIT_NUMERIC
    metrics.close()
    timing.close()

    save_checkpoint(run / "policy.ckpt", result.policy)
    if result.value is not None:
        save_checkpoint(run / "value.ckpt", result.value)
    evaluation = {"train": score(result.policy, train_set)}
    bins_on = test_set if test_set is not None else train_set
    if test_set is not None:
        evaluation["test"] = score(result.policy, test_set)
    evaluation["final_bins"] = final_bins(result.policy, bins_on, n_bins).as_dict()
    evaluation["final_bins_split"] = "test" if test_set is not None else "train"
    _write_json(run / "eval.json", evaluation)
    manifest.update(status="complete", finished_at=_now())
    _write_json(run / "manifest.json", manifest)
    summary = evaluation.get("test", evaluation["train"])
    print(f"run directory: {run}")
    print("final " + ("test" if test_set is not None else "train") + " metrics: " +
          ", ".join(f"{k} {v:.4f}" for k, v in summary.items()))
    return EXIT_OK


# -- compare -----------------------------------------------------------------

def cmd_compare(args):
    base = _resolve_config(args)
    arms = args.arms.split(",") if args.arms else ["sft", "vanilla_ppo", "binaryppo"]
    if args.ablations:
        arms += [a for a in ("no-entropy", "natural-sampling") if a not in arms]
    arms = [a.strip() for a in arms if a.strip()]
    unknown = [a for a in arms if a not in ARMS]
    if unknown:
        raise UsageError(f"unknown arm(s) {unknown}; choose from {list(ARMS)}")
    if args.data:
        tasks = [FileTask(args.data, args.test_data, args.test_fraction)]
    else:
        tasks = [TaskSpec(t.strip(), args.n_train, args.n_test, args.flip, args.imbalance, args.balanced_test)
                 for t in args.tasks.split(",") if t.strip()]
        for t in tasks:
            if t.task not in TASKS:
                raise UsageError(f"unknown task {t.task!r}; choose from {TASKS}")
    seeds = args.seeds if args.seeds is not None else list(range(args.n_seeds))
    result = compare(tasks, arms, seeds, base, jobs=args.jobs)
    table = format_table(result)
    print(table, end="")
    if args.out:
        _write_json(args.out, dict(result.as_dict(), base_config=base.to_flat()))
    if args.table:
        Path(args.table).parent.mkdir(parents=True, exist_ok=True)
        Path(args.table).write_text(table)
    return EXIT_OK


# -- report ------------------------------------------------------------------

def _read_metrics(run):
    path = run / "metrics.jsonl"
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    records = []
    for i, line in enumerate(lines, start=1):
        try:
            rec = json.loads(line)
            rec["epoch"], rec["loss"]["total"], rec["entropy"], rec["kl"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{i}: corrupt metrics record ({exc})") from None
        records.append(rec)
    if not records:
        raise DataError(f"{path}: no epoch records")
    return records


def series_tables(records):
    """``{name: rows}`` of plot-ready series; the first row of each is the header.

    KL row ``k`` is the divergence from the policy after epoch ``k`` to the one
    after epoch ``k + 1`` (row 0 starts from the initial policy).
    """
    loss = [["epoch", "mode", "total", "ppo", "value", "supervised", "entropy_mean"]]
    ent = [["epoch", "entropy"]]
    kl = [["index", "transition", "kl"]]
    for rec in records:
        l = rec["loss"]
        loss.append([rec["epoch"], rec["mode"], l["total"], l["ppo"], l["value"], l["supervised"], l["entropy_mean"]])
        ent.append([rec["epoch"], rec["entropy"]])
        k = rec["epoch"] - 1
        kl.append([k, f"{k}->{k + 1}", rec["kl"]])
    return {"loss": loss, "entropy": ent, "kl": kl}


def bin_table(bins, epoch=None):
    head = (["epoch"] if epoch is not None else []) + ["lo", "hi", "count", "mean_confidence", "accuracy", "mean_advantage"]
    rows = [head]
    edges = bins["edges"]
    for i in range(len(bins["counts"])):
        row = [edges[i], edges[i + 1], bins["counts"][i], bins["mean_confidence"][i], bins["accuracy"][i],
               bins["mean_advantage"][i]]
        rows.append(([epoch] if epoch is not None else []) + row)
    return rows


def _cell(v):
    if v is None:
        return "empty"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _tsv(rows):
    return "".join("\t".join(_cell(c) for c in r) + "\n" for r in rows)


def _aligned(rows):
    cells = [[_cell(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n" for r in cells)


def cmd_report(args):
    run = Path(args.run_dir)
    if not run.is_dir():
        raise DataError(f"{run} is not a run directory")
    records = _read_metrics(run)
    out = Path(args.out) if args.out else run / "report"
    out.mkdir(parents=True, exist_ok=True)
    tables = series_tables(records)
    epoch_bins = [["epoch", "lo", "hi", "count", "mean_confidence", "accuracy", "mean_advantage"]]
    for rec in records:
        if rec.get("bins"):
            epoch_bins.extend(bin_table(rec["bins"], rec["epoch"])[1:])
    tables["bins_by_epoch"] = epoch_bins
    eval_path = run / "eval.json"
    if eval_path.exists():
        try:
            evaluation = json.loads(eval_path.read_text())
            tables["bins_final"] = bin_table(evaluation["final_bins"])
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"{eval_path}: corrupt evaluation file ({exc})") from None
    for name, rows in tables.items():
        (out / f"{name}.tsv").write_text(_tsv(rows))
    for name in ("loss", "entropy", "kl", "bins_final"):
        if name in tables:
            print(f"== {name} ==")
            print(_aligned(tables[name]))
    print(f"tables written to {out}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------

TASKS = tuple(GENERATORS) + ("overlap",)


def build_parser():
    parser = argparse.ArgumentParser(prog="binaryppo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({backend.NAME} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset and its provenance sidecar")
    g.add_argument("--task", choices=sorted(GENERATORS), default="blobs")
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--sep", type=float, default=4.0, help="blobs: distance between the class means")
    g.add_argument("--scale", type=float, default=None, help="xor/rings: lobe offset or inner radius")
    g.add_argument("--d", type=int, default=2, help="feature dimension")
    g.add_argument("--flip", type=_flip_rate, default=0.0, help="symmetric label-noise rate in [0, 0.5)")
    g.add_argument("--imbalance", type=_fraction, default=0.5, help="positive-class fraction")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output file (.csv or .jsonl)")
    g.add_argument("--format", choices=("csv", "jsonl"))
    g.add_argument("--test-fraction", type=_fraction, default=None,
                   help="also write a clean held-out split: <stem>-train and <stem>-test files")
    g.add_argument("--force", action="store_true", help="overwrite existing files")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one model into a new run directory")
    t.add_argument("--data", help="training dataset file")
    t.add_argument("--test-data", help="held-out dataset file with clean labels")
    t.add_argument("--out-dir", default="runs", help="parent of the timestamped run directory")
    t.add_argument("--from-manifest", help="rerun exactly from a manifest file or run directory")
    t.add_argument("--bins", type=int, default=N_EPOCH_BINS, help="confidence-bin count")
    t.add_argument("--quiet", action="store_true")
    _add_config_flags(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", help="method/ablation grid over tasks and seeds")
    c.add_argument("--arms", help=f"comma list from {list(ARMS)} (default sft,vanilla_ppo,binaryppo)")
    c.add_argument("--ablations", action="store_true", help="add the no-entropy and natural-sampling arms")
    c.add_argument("--tasks", default="blobs", help=f"comma list from {list(TASKS)}")
    c.add_argument("--data", help="dataset file instead of synthetic tasks")
    c.add_argument("--test-data", help="held-out file for --data (otherwise split per seed)")
    c.add_argument("--test-fraction", type=_fraction, default=0.2)
    c.add_argument("--n-train", type=int, default=2000)
    c.add_argument("--n-test", type=int, default=500)
    c.add_argument("--flip", type=_flip_rate, default=0.0)
    c.add_argument("--imbalance", type=_fraction, default=0.5)
    c.add_argument("--balanced-test", action="store_true", help="draw the clean test set 50/50")
    c.add_argument("--seeds", type=_int_list, default=None, help="comma list of seeds")
    c.add_argument("--n-seeds", type=int, default=3)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", help="write the full grid as JSON")
    c.add_argument("--table", help="write the text table to a file")
    _add_config_flags(c)
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="plot-ready series and bin tables from a run directory")
    r.add_argument("run_dir")
    r.add_argument("--out", help="output directory (default <run_dir>/report)")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "scale", "unset") is None:
        args.scale = 2.0 if args.task == "xor" else 1.0
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"{parser.prog} {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteLossError as exc:
        print(f"{parser.prog} {args.command}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
