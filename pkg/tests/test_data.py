import json

import numpy as np
import pytest

from binaryppo.data import (Dataset, NoiseSpec, apply_label_noise, dumps_dataset, gen_blobs, gen_rings, gen_xor,
                            generate, load_dataset, regenerate, save_dataset, split)
from binaryppo.errors import ConfigError, DataError
from binaryppo.linalg import Rng


def test_noise_spec_validation():
    with pytest.raises(ConfigError, match="0.5"):
        NoiseSpec(flip_rate=0.5)
    with pytest.raises(ConfigError):
        NoiseSpec(imbalance=1.0)


def test_blobs_large_separation_linear_oracle():
    d = gen_blobs(5000, 8.0, rng=Rng(0))
    assert np.mean((d.features[:, 0] >= 0) == d.labels) >= 0.999


def test_blobs_geometry():
    d = gen_blobs(20_000, 4.0, d=3, rng=Rng(1))
    assert d.dim == 3
    for cls, mean in ((0, -2.0), (1, 2.0)):
        pts = d.features[d.labels == cls]
        assert abs(pts[:, 0].mean() - mean) < 0.05
        np.testing.assert_allclose(np.cov(pts.T), np.eye(3), atol=0.05)


def test_flip_bookkeeping():
    d = gen_blobs(10_000, 4.0, noise=NoiseSpec(0.2), rng=Rng(2))
    flipped = np.mean(d.labels != d.clean_labels)
    assert abs(flipped - 0.2) < 0.01
    assert d.provenance["n_flipped"] == int(np.sum(d.labels != d.clean_labels))


def test_imbalance():
    d = gen_blobs(10_000, 4.0, noise=NoiseSpec(0.0, 0.1), rng=Rng(3))
    assert abs(d.labels.mean() - 0.1) < 0.01


def linear_probe_accuracy(x, y, steps=2000, lr=0.5):
    xb = np.c_[x, np.ones(len(x))]
    w = np.zeros(xb.shape[1])
    for _ in range(steps):
        p = 1 / (1 + np.exp(-xb @ w))
        w -= lr * xb.T @ (p - y) / len(y)
    return np.mean((xb @ w >= 0) == y)


def test_xor_defeats_linear_probe_and_centroids():
    d = gen_xor(4000, 2.0, rng=Rng(4))
    assert linear_probe_accuracy(d.features, d.labels) <= 0.6
    for sx in (-1, 1):
        for sy in (-1, 1):
            mask = (np.sign(d.features[:, 0]) == sx) & (np.sign(d.features[:, 1]) == sy)
            centroid = d.features[mask].mean(0)
            assert np.all(np.abs(centroid - 2.0 * np.array([sx, sy])) < 0.2)
            assert np.all(d.labels[mask] == int(sx != sy))


def test_rings_radii():
    d = gen_rings(4000, 1.0, rng=Rng(5))
    r = np.hypot(d.features[:, 0], d.features[:, 1])
    assert abs(r[d.labels == 0].mean() - 1.0) < 0.05
    assert abs(r[d.labels == 1].mean() - 2.0) < 0.05


def test_generator_determinism_and_regenerate():
    for task in ("blobs", "xor", "rings"):
        a = generate(task, 300, NoiseSpec(0.1, 0.3), rng=Rng(6))
        b = generate(task, 300, NoiseSpec(0.1, 0.3), rng=Rng(6))
        assert a.features.tobytes() == b.features.tobytes() and a.labels.tobytes() == b.labels.tobytes()
        c = regenerate(json.loads(json.dumps(a.provenance)))
        assert c.features.tobytes() == a.features.tobytes() and c.labels.tobytes() == a.labels.tobytes()
    with pytest.raises(ConfigError):
        generate("moons", 10)


def test_apply_label_noise_keeps_clean_labels():
    d = gen_blobs(2000, 4.0, rng=Rng(7))
    noisy = apply_label_noise(d, 0.3, Rng(8))
    assert np.array_equal(noisy.clean_labels, d.labels)
    assert abs(np.mean(noisy.labels != d.labels) - 0.3) < 0.03


def test_split_partition_stratified_deterministic():
    d = gen_blobs(1000, 4.0, noise=NoiseSpec(0.0, 0.2), rng=Rng(9))
    tr, te = split(d, 0.25, Rng(10))
    assert len(tr) + len(te) == 1000
    rows = {tuple(r) for r in d.features.tolist()}
    assert {tuple(r) for r in tr.features.tolist()} | {tuple(r) for r in te.features.tolist()} == rows
    assert not {tuple(r) for r in tr.features.tolist()} & {tuple(r) for r in te.features.tolist()}
    min_class = min(d.class_counts())
    for part in (tr, te):
        assert abs(part.labels.mean() - d.labels.mean()) <= 1 / min_class
    tr2, te2 = split(d, 0.25, Rng(10))
    assert tr2.features.tobytes() == tr.features.tobytes()
    with pytest.raises(ConfigError):
        split(d, 1.0, Rng(0))


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip_bit_exact(tmp_path, fmt):
    d = gen_xor(200, 2.0, noise=NoiseSpec(0.1), rng=Rng(11))
    path = tmp_path / f"d.{fmt}"
    save_dataset(d, path)
    back = load_dataset(path)
    assert back.features.tobytes() == d.features.tobytes()
    assert back.labels.tobytes() == d.labels.tobytes()
    assert back.examples() == d.examples()
    assert back.provenance["sha256"]


def test_hand_written_csv(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("f0,f1,label\n1.5,-2,1\n0,0.25,0\n3e-1,7,1\n")
    d = load_dataset(path)
    assert [(e.features, e.label) for e in d.examples()] == [((1.5, -2.0), 1), ((0.0, 0.25), 0), ((0.3, 7.0), 1)]


@pytest.mark.parametrize("body,match", [
    ("f0,label\n1.0,2\n", r":2: label '2'"),
    ("f0,label\n1.0,1\nnan,0\n", r":3: non-finite"),
    ("f0,f1,label\n1.0,2.0,1\n1.0,0\n", "dimension 1, header declares 2"),
    ("f0,label\nabc,1\n", ":2: non-numeric"),
    ("x,label\n1,1\n", "f0"),
])
def test_csv_rejections(tmp_path, body, match):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=match):
        load_dataset(path)


@pytest.mark.parametrize("body,match", [
    ('{"features": [1.0], "label": 2}\n', ":1: label 2"),
    ('{"features": [1.0], "label": 1}\n{"features": [1.0, 2.0], "label": 0}\n', "dimension 2 differs .* dimension 1"),
    ('{"features": [1.0], "label": 1}\nnot json\n', ":2: malformed"),
    ('{"features": [Infinity], "label": 1}\n', "non-finite"),
])
def test_jsonl_rejections(tmp_path, body, match):
    path = tmp_path / "bad.jsonl"
    path.write_text(body)
    with pytest.raises(DataError, match=match):
        load_dataset(path)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.ones((2, 2)), np.array([0, 3]))
    with pytest.raises(DataError):
        Dataset(np.ones((3, 2)), np.array([0, 1]))
    assert dumps_dataset(Dataset(np.array([[0.1]]), np.array([1])), "csv") == "f0,label\n0.1,1\n"
