"""Compare the compiled and pure-Python kernel backends.

Measures PRNG fill throughput per backend in-process, then end-to-end training
time with each backend forced through ``BINARYPPO_BACKEND`` in a subprocess.
Also checks that both backends produce identical draws and identical training
metrics.

    python benchmarks/bench_kernels.py [--repeats 5] [--skip-train]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from binaryppo import backend
from binaryppo.linalg import Rng

TRAIN_SNIPPET = """
import hashlib, json, time
from binaryppo import backend
from binaryppo.config import TrainConfig
from binaryppo.experiment import TaskSpec
from binaryppo.trainer import train
train_set, _ = TaskSpec("blobs", 2000, 500).build(0)
cfg = TrainConfig(batch_size={batch_size})
start = time.perf_counter()
res = train(cfg, train_set)
elapsed = time.perf_counter() - start
digest = hashlib.sha256("".join(json.dumps(r.record(), sort_keys=True) for r in res.reports).encode()).hexdigest()
print(json.dumps({{"backend": backend.NAME, "seconds": elapsed, "metrics_sha256": digest}}))
"""


def bench_fill(mod, kind, n, repeats):
    fill = mod.fill_uniform if kind == "uniform" else mod.fill_normal
    out = np.empty(n)
    state = Rng(1).state
    number = max(1, 200_000 // n)
    best = min(timeit.repeat(lambda: fill(state, out), number=number, repeat=repeats)) / number
    return best / n * 1e9  # ns per draw


def bench_train(name, batch_size, repeats):
    env = dict(os.environ, BINARYPPO_BACKEND=name)
    results = []
    for _ in range(repeats):
        proc = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET.format(batch_size=batch_size)], env=env,
                              capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout.strip().splitlines()[-1]))
    return min(r["seconds"] for r in results), results[0]["metrics_sha256"], results[0]["backend"]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--skip-train", action="store_true")
    args = parser.parse_args()

    names = backend.available()
    print(f"available backends: {', '.join(names)} (import-time default: {backend.NAME})")
    if len(names) == 2:
        for kind in ("uniform", "normal"):
            bufs = []
            for name in names:
                buf = np.empty(10_001)
                getattr(backend.load(name), f"fill_{kind}")(Rng(7).state, buf)
                bufs.append(buf.tobytes())
            print(f"bit-identical {kind} streams: {bufs[0] == bufs[1]}")

    print("\nPRNG fill, ns per draw (best of repeats)")
    print(f"{'kernel':<10}{'n':>10}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for kind in ("uniform", "normal"):
        for n in (100, 10_000, 1_000_000):
            times = [bench_fill(backend.load(name), kind, n, args.repeats) for name in names]
            speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) == 2 else ""
            print(f"{kind:<10}{n:>10}" + "".join(f"{t:>12.1f}" for t in times) + speed)

    if args.skip_train:
        return
    print("\nEnd-to-end training, blobs n=2000, default config (best of repeats, seconds)")
    print(f"{'batch':>6}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}  metrics identical")
    for batch_size in (256, 32):
        rows = [bench_train(name, batch_size, max(1, args.repeats // 2)) for name in names]
        speed = f"{rows[-1][0] / rows[0][0]:>9.1f}x" if len(rows) == 2 else ""
        same = len({r[1] for r in rows}) == 1
        print(f"{batch_size:>6}" + "".join(f"{r[0]:>12.3f}" for r in rows) + speed + f"  {same}")


if __name__ == "__main__":
    main()
