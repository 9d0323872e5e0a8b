"""Benchmark harness: task suites, single grid cells and method comparisons.

A cell trains one arm (method + ablation overrides) on one task instance and
scores it on held-out data with clean labels. Every cell is a pure function of
(task, arm, seed), so grids can be evaluated in any order or in parallel.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .data import NoiseSpec, apply_label_noise, generate, load_dataset, split
from .errors import BinaryPPOError, ConfigError
from .evaluate import accuracy, auprc, auroc, balanced_accuracy, confidence_bins
from .linalg import Rng, derive_seed
from .trainer import train

# Row label -> dotted-key overrides applied on top of the base config.
ARMS = {
    "sft": {"method": "sft"},
    "vanilla_ppo": {"method": "vanilla_ppo"},
    "binaryppo": {"method": "binaryppo"},
    "no-entropy": {"method": "binaryppo", "loss.gamma": 0.0},
    "natural-sampling": {"method": "binaryppo", "sampler": "natural"},
}
ABLATIONS = ("no-entropy", "natural-sampling")
METRICS = ("accuracy", "auroc", "auprc")

TASK_PARAMS = {
    "blobs": {"mean_separation": 4.0},
    "overlap": {"mean_separation": 2.0},
    "xor": {"scale": 2.0},
    "rings": {"scale": 1.0},
}


def arm_label(config: TrainConfig, defaults: TrainConfig = None) -> str:
    """Row label for a config: the method name, or the ablation it represents."""
    defaults = defaults or TrainConfig()
    if config.method != "binaryppo":
        return config.method
    tags = []
    if config.loss.gamma == 0.0 and defaults.loss.gamma != 0.0:
        tags.append("no-entropy")
    if config.sampler == "natural" and defaults.sampler != "natural":
        tags.append("natural-sampling")
    return "+".join(tags) or "binaryppo"


def resolve_arms(names, base: TrainConfig = None):
    """``[(label, overrides)]`` for the named arms applied on top of ``base``.

    Labels come from the effective config, so ``binaryppo`` with a base of
    ``loss.gamma = 0`` is reported as ``no-entropy``. Arms that resolve to the
    same label are kept once.
    """
    base = base or TrainConfig()
    out, seen = [], set()
    for name in names:
        if name not in ARMS:
            raise ConfigError(f"unknown arm {name!r}; expected one of {list(ARMS)}")
        label = arm_label(base.override(ARMS[name]))
        if label not in seen:
            seen.add(label)
            out.append((label, dict(ARMS[name])))
    return out


@dataclass(frozen=True)
class TaskSpec:
    """One synthetic task instance family: generator, size and corruption."""

    task: str = "blobs"
    n_train: int = 2000
    n_test: int = 500
    flip_rate: float = 0.0
    imbalance: float = 0.5
    balanced_test: bool = False

    @property
    def name(self):
        parts = [self.task]
        if self.flip_rate:
            parts.append(f"flip{self.flip_rate:g}")
        if self.imbalance != 0.5:
            parts.append(f"pos{self.imbalance:g}")
        return "-".join(parts)

    def build(self, seed):
        """``(train, test)``: noise only on train; test labels are clean.

        By default one sample of ``n_train + n_test`` points is split with
        stratification. With ``balanced_test`` the test set is an independent
        50/50 draw regardless of the training imbalance.
        """
        params = TASK_PARAMS.get(self.task, {})
        generator = "blobs" if self.task == "overlap" else self.task
        if self.balanced_test:
            train_set = generate(generator, self.n_train, NoiseSpec(0.0, self.imbalance),
                                 rng=Rng(derive_seed(seed, self.task, "train")), **params)
            test_set = generate(generator, self.n_test, NoiseSpec(0.0, 0.5),
                                rng=Rng(derive_seed(seed, self.task, "test")), **params)
        else:
            full = generate(generator, self.n_train + self.n_test, NoiseSpec(0.0, self.imbalance),
                            rng=Rng(derive_seed(seed, self.task, "data")), **params)
            train_set, test_set = split(full, self.n_test / len(full), Rng(derive_seed(seed, self.task, "split")))
        if self.flip_rate:
            train_set = apply_label_noise(train_set, self.flip_rate, Rng(derive_seed(seed, self.task, "noise")))
        return train_set, test_set


@dataclass(frozen=True)
class FileTask:
    """A task backed by dataset files; without a test file each seed re-splits."""

    train_path: str
    test_path: str = None
    test_fraction: float = 0.2
    label: str = None

    @property
    def name(self):
        return self.label or Path(self.train_path).stem

    def build(self, seed):
        data = load_dataset(self.train_path)
        if self.test_path:
            return data, load_dataset(self.test_path)
        return split(data, self.test_fraction, Rng(derive_seed(seed, "split")))


def score(policy, test_set):
    """Threshold and rank metrics of ``policy`` against clean test labels."""
    _, p1 = policy.probs(test_set.features)
    y = test_set.clean_labels
    out = {"accuracy": accuracy(p1, y), "balanced_accuracy": balanced_accuracy(p1, y)}
    try:
        out["auroc"] = auroc(p1, y)
    except BinaryPPOError:
        out["auroc"] = float("nan")
    try:
        out["auprc"] = auprc(p1, y)
    except BinaryPPOError:
        out["auprc"] = float("nan")
    return out


def final_bins(policy, test_set, n_bins=10):
    _, p1 = policy.probs(test_set.features)
    return confidence_bins(p1, test_set.clean_labels, n_bins)


@dataclass
class CellResult:
    task: str
    arm: str
    seed: int
    status: str = "ok"
    metrics: dict = field(default_factory=dict)
    error: str = ""
    collapsed: bool = False

    def as_dict(self):
        return {"task": self.task, "arm": self.arm, "seed": self.seed, "status": self.status,
                "metrics": self.metrics, "error": self.error, "collapsed": self.collapsed}


def run_cell(task, arm, seed: int, base: TrainConfig = None, overrides=None) -> CellResult:
    """Train and score one grid cell; failures are captured, never raised.

    ``arm`` is a label from ``ARMS`` or a ``(label, overrides)`` pair.
    """
    base = base or TrainConfig()
    label, flat = (arm, ARMS.get(arm, {})) if isinstance(arm, str) else arm
    flat = dict(flat, **(overrides or {}))
    try:
        config = base.override(flat).override({"seed": derive_seed(seed, "train") & 0x7FFFFFFF})
        train_set, test_set = task.build(seed)
        result = train(config, train_set)
        metrics = score(result.policy, test_set)
        _, p1 = result.policy.probs(test_set.features)
        collapsed = bool(np.all(p1 >= 0.5) or np.all(p1 < 0.5))
        return CellResult(task.name, label, seed, "ok", metrics, collapsed=collapsed)
    except (BinaryPPOError, FloatingPointError) as exc:
        return CellResult(task.name, label, seed, "failed", {}, f"{type(exc).__name__}: {exc}")


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class Comparison:
    tasks: list
    arms: list
    seeds: list
    cells: list

    def values(self, arm, metric="accuracy", task=None):
        return [c.metrics[metric] for c in self.cells
                if c.arm == arm and c.status == "ok" and (task is None or c.task == task)]

    def mean(self, arm, metric="accuracy", task=None):
        vals = [v for v in self.values(arm, metric, task) if not math.isnan(v)]
        return float(np.mean(vals)) if vals else float("nan")

    def flags(self, reference="binaryppo", metric="accuracy"):
        """Ablated arms that tie or beat ``reference`` on a task's seed mean."""
        out = []
        if reference not in self.arms:
            return out
        for task in self.tasks:
            ref = self.mean(reference, metric, task)
            for arm in self.arms:
                if arm in ABLATIONS and self.mean(arm, metric, task) >= ref:
                    out.append(f"{arm} ties or beats {reference} on {task} "
                               f"({self.mean(arm, metric, task):.4f} vs {ref:.4f})")
        return out

    def as_dict(self):
        return {"tasks": self.tasks, "arms": self.arms, "seeds": self.seeds,
                "cells": [c.as_dict() for c in self.cells],
                "means": {a: {m: self.mean(a, m) for m in METRICS} for a in self.arms},
                "flags": self.flags()}


def compare(tasks, arms, seeds, base: TrainConfig = None, overrides=None, jobs=1) -> Comparison:
    """Evaluate the full tasks x arms x seeds grid; results come back in grid order.

    Each cell derives its own seeds, so parallel and serial runs agree exactly.
    """
    resolved = resolve_arms(arms, base)
    grid = [(t, a, s, base, overrides) for t in tasks for a in resolved for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell_args, grid))
    else:
        cells = [run_cell(*g) for g in grid]
    return Comparison([t.name for t in tasks], [label for label, _ in resolved], list(seeds), cells)


def format_table(comparison: Comparison, metrics=METRICS) -> str:
    """Plain-text table: one row per arm, per-task seed means, then per-seed detail."""
    lines = []
    header = ["arm"] + [f"{t}:{m}" for t in comparison.tasks for m in metrics] + [f"mean:{m}" for m in metrics]
    rows = []
    for arm in comparison.arms:
        row = [arm]
        row += [_fmt(comparison.mean(arm, m, t)) for t in comparison.tasks for m in metrics]
        row += [_fmt(comparison.mean(arm, m)) for m in metrics]
        rows.append(row)
    lines.extend(_align([header] + rows))
    lines.append("")
    detail = [["arm", "task"] + [f"seed{s}" for s in comparison.seeds]]
    for arm in comparison.arms:
        for task in comparison.tasks:
            cells = {c.seed: c for c in comparison.cells if c.arm == arm and c.task == task}
            detail.append([arm, task] + [
                _fmt(cells[s].metrics["accuracy"]) if cells[s].status == "ok" else "FAILED"
                for s in comparison.seeds])
    lines.extend(_align(detail))
    flags = comparison.flags()
    if flags:
        lines.append("")
        lines.extend(f"FLAG: {f}" for f in flags)
    collapsed = [c for c in comparison.cells if c.collapsed]
    lines.extend(f"COLLAPSED: {c.arm} / {c.task} / seed {c.seed} predicts a single class" for c in collapsed)
    failed = [c for c in comparison.cells if c.status != "ok"]
    lines.extend(f"FAILED: {c.arm} / {c.task} / seed {c.seed}: {c.error}" for c in failed)
    return "\n".join(lines) + "\n"


def _fmt(v):
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4f}"


def _align(rows):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]


def noisy_imbalanced_suite(n_train=8000, n_test=2000, flip_rate=0.2, imbalance=0.2, tasks=("blobs", "xor", "rings")):
    return [TaskSpec(t, n_train, n_test, flip_rate, imbalance, balanced_test=True) for t in tasks]
