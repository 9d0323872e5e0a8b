"""Synthetic benchmark generators, label noise, dataset files and splits.

File formats (text, written with ``repr`` floats so round trips are exact):

* CSV: header ``f0,f1,...,f{d-1},label``, one example per row.
* JSONL: one ``{"features": [...], "label": 0|1}`` object per line.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .linalg import Rng, rng_from_state


@dataclass(frozen=True)
class Example:
    features: tuple
    label: int


@dataclass(frozen=True)
class NoiseSpec:
    flip_rate: float = 0.0
    imbalance: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.flip_rate < 0.5:
            raise ConfigError(f"flip rate must lie in [0, 0.5), got {self.flip_rate}")
        if not 0.0 < self.imbalance < 1.0:
            raise ConfigError(f"imbalance (positive fraction) must lie in (0, 1), got {self.imbalance}")


@dataclass
class Dataset:
    """Feature matrix plus labels.

    ``clean_labels`` holds the labels before noise injection (equal to
    ``labels`` for clean or loaded data).
    """

    features: np.ndarray
    labels: np.ndarray
    clean_labels: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.clean_labels is None:
            self.clean_labels = self.labels.copy()
        self.clean_labels = np.asarray(self.clean_labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DataError(f"features {self.features.shape} do not match {self.labels.shape[0]} labels")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features must be finite")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0 or 1")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def examples(self):
        return [Example(tuple(x), int(y)) for x, y in zip(self.features.tolist(), self.labels.tolist())]

    def class_counts(self):
        n_pos = int(self.labels.sum())
        return len(self) - n_pos, n_pos

    def subset(self, idx, **provenance):
        idx = np.asarray(idx, dtype=np.int64)
        prov = dict(self.provenance, **provenance)
        return Dataset(self.features[idx], self.labels[idx], self.clean_labels[idx], prov)

    def with_labels(self, labels, **provenance):
        return Dataset(self.features, labels, self.clean_labels, dict(self.provenance, **provenance))


def _rng(rng):
    return rng if isinstance(rng, Rng) else Rng(int(rng))


def _class_labels(n, imbalance, rng):
    n_pos = int(round(n * imbalance))
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_pos] = 1
    return labels[rng.permutation(n)]


def _flip(labels, flip_rate, rng):
    flips = rng.uniforms(labels.shape[0]) < flip_rate
    return np.where(flips, 1 - labels, labels), flips


def _finish(name, params, start_state, seed, features, clean, noise, rng):
    noisy, flips = _flip(clean, noise.flip_rate, rng)
    prov = {
        "generator": name,
        "params": params,
        "flip_rate": noise.flip_rate,
        "imbalance": noise.imbalance,
        "seed": seed,
        "rng_state": start_state,
        "n_flipped": int(flips.sum()),
    }
    return Dataset(features, noisy, clean, prov)


def gen_blobs(n, mean_separation=4.0, d=2, noise=NoiseSpec(), rng=0):
    """Two unit-covariance Gaussian classes centred at +/-(separation/2) on axis 0."""
    if n < 2 or d < 1:
        raise ConfigError("gen_blobs needs n >= 2 and d >= 1")
    rng = _rng(rng)
    seed, start = rng.seed, rng.state
    labels = _class_labels(n, noise.imbalance, rng)
    x = rng.normals(n * d).reshape(n, d)
    x[:, 0] += np.where(labels == 1, 0.5, -0.5) * mean_separation
    params = {"n": n, "mean_separation": mean_separation, "d": d}
    return _finish("blobs", params, start, seed, x, labels, noise, rng)


def gen_xor(n, scale=2.0, noise=NoiseSpec(), rng=0, spread=None, d=2):
    """Four Gaussian lobes at (+/-s, +/-s); label 1 where the two signs differ."""
    if n < 4 or d < 2:
        raise ConfigError("gen_xor needs n >= 4 and d >= 2")
    rng = _rng(rng)
    seed, start = rng.seed, rng.state
    spread = 0.25 * scale if spread is None else spread
    labels = _class_labels(n, noise.imbalance, rng)
    sx = np.where(rng.uniforms(n) < 0.5, 1.0, -1.0)
    sy = np.where(labels == 1, -sx, sx)
    x = spread * rng.normals(n * d).reshape(n, d)
    x[:, 0] += scale * sx
    x[:, 1] += scale * sy
    params = {"n": n, "scale": scale, "spread": spread, "d": d}
    return _finish("xor", params, start, seed, x, labels, noise, rng)


def gen_rings(n, scale=1.0, noise=NoiseSpec(), rng=0, spread=None, d=2):
    """Concentric annuli: class 0 at radius ``scale``, class 1 at ``2 * scale``."""
    if n < 2 or d < 2:
        raise ConfigError("gen_rings needs n >= 2 and d >= 2")
    rng = _rng(rng)
    seed, start = rng.seed, rng.state
    spread = 0.2 * scale if spread is None else spread
    labels = _class_labels(n, noise.imbalance, rng)
    theta = 2.0 * math.pi * rng.uniforms(n)
    radius = scale * (1.0 + labels) + spread * rng.normals(n)
    x = spread * rng.normals(n * d).reshape(n, d)
    x[:, 0] = radius * np.cos(theta)
    x[:, 1] = radius * np.sin(theta)
    params = {"n": n, "scale": scale, "spread": spread, "d": d}
    return _finish("rings", params, start, seed, x, labels, noise, rng)


GENERATORS = {"blobs": gen_blobs, "xor": gen_xor, "rings": gen_rings}


def generate(task, n, noise=NoiseSpec(), rng=0, **params):
    if task not in GENERATORS:
        raise ConfigError(f"unknown task {task!r}; expected one of {sorted(GENERATORS)}")
    return GENERATORS[task](n, noise=noise, rng=rng, **params)


def regenerate(provenance):
    """Rebuild a synthetic dataset bit-exactly from its provenance record."""
    params = dict(provenance["params"])
    n = params.pop("n")
    noise = NoiseSpec(provenance["flip_rate"], provenance["imbalance"])
    rng = rng_from_state(provenance["rng_state"], provenance["seed"])
    return generate(provenance["generator"], n, noise=noise, rng=rng, **params)


def apply_label_noise(dataset, flip_rate, rng):
    """Symmetric label noise on ``dataset.labels``; clean labels are kept."""
    NoiseSpec(flip_rate=flip_rate)
    noisy, flips = _flip(dataset.labels, flip_rate, _rng(rng))
    return dataset.with_labels(noisy, flip_rate=flip_rate, n_flipped=int(flips.sum()))


def split(dataset, test_fraction, rng):
    """Stratified, disjoint train/test partition."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = _rng(rng)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.labels == cls)
        idx = idx[rng.permutation(idx.shape[0])]
        n_test = int(round(idx.shape[0] * test_fraction))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return (dataset.subset(train_idx, split="train", test_fraction=test_fraction),
            dataset.subset(test_idx, split="test", test_fraction=test_fraction))


# -- files -------------------------------------------------------------------

def _fmt(path, fmt):
    fmt = fmt or Path(path).suffix.lstrip(".").lower()
    if fmt not in ("csv", "jsonl"):
        raise DataError(f"cannot infer dataset format from {path!r}; use csv or jsonl")
    return fmt


def dumps_dataset(dataset, fmt):
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(dataset.dim)] + ["label"])
        for x, y in zip(dataset.features.tolist(), dataset.labels.tolist()):
            writer.writerow([repr(v) for v in x] + [y])
    else:
        for x, y in zip(dataset.features.tolist(), dataset.labels.tolist()):
            buf.write(json.dumps({"features": x, "label": y}) + "\n")
    return buf.getvalue()


def save_dataset(dataset, path, fmt=None):
    Path(path).write_text(dumps_dataset(dataset, _fmt(path, fmt)))


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse_label(raw, where):
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise DataError(f"{where}: label {raw!r} is not a number") from None
    if value not in (0.0, 1.0):
        raise DataError(f"{where}: label {raw!r} is outside {{0, 1}}")
    return int(value)


def _parse_features(values, where):
    try:
        feats = [float(v) for v in values]
    except (TypeError, ValueError):
        raise DataError(f"{where}: non-numeric feature") from None
    if not all(math.isfinite(v) for v in feats):
        raise DataError(f"{where}: non-finite feature")
    return feats


def load_dataset(path, fmt=None):
    """Read a CSV or JSONL dataset, validating every line."""
    path = Path(path)
    fmt = _fmt(path, fmt)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows, labels = [], []
    dim = None
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if not header or header[-1].strip() != "label":
            raise DataError(f"{path}:1: header must be f0,...,f{{d-1}},label")
        expected = [f"f{i}" for i in range(len(header) - 1)]
        if [h.strip() for h in header[:-1]] != expected:
            raise DataError(f"{path}:1: feature columns must be named {','.join(expected)}")
        dim = len(header) - 1
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            where = f"{path}:{lineno}"
            if len(rec) - 1 != dim:
                raise DataError(f"{where}: row has dimension {len(rec) - 1}, header declares {dim}")
            rows.append(_parse_features(rec[:-1], where))
            labels.append(_parse_label(rec[-1], where))
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
                feats, label = obj["features"], obj["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{where}: malformed record ({exc})") from None
            if isinstance(label, bool) or not isinstance(label, int):
                raise DataError(f"{where}: label must be an integer, got {label!r}")
            if label not in (0, 1):
                raise DataError(f"{where}: label {label} is outside {{0, 1}}")
            if not isinstance(feats, list):
                raise DataError(f"{where}: features must be an array")
            feats = _parse_features(feats, where)
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise DataError(f"{where}: dimension {len(feats)} differs from first record's dimension {dim}")
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise DataError(f"{path}: no examples")
    features = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return Dataset(features, np.array(labels, dtype=np.int64),
                   provenance={"source": str(path), "sha256": file_sha256(path), "format": fmt})
