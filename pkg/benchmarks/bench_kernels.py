#!/usr/bin/env python3
"""Time each SGD kernel compiled with numba against the plain-Python fallback.

    python3 benchmarks/bench_kernels.py [--samples 3000] [--k 10] [--repeat 3]

The fallback runs in a child process started with FMPAIR_DISABLE_JIT=1, so
nested kernel calls are uncompiled too. Both paths get identical inputs;
a hash of the parameters they leave behind shows whether they agree bit
for bit.
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np

from fmpair import kernels
from fmpair._jit import HAS_NUMBA
from fmpair.core import ItemAttributes, SparseVector
from fmpair.pointwise import LabeledInstance, pack
from fmpair.synthetic import random_sparse


def make_inputs(samples, k, n_users=500, n_items=1000, n_aux=200, seed=0):
    rng = np.random.default_rng(seed)
    n = n_users + n_items + n_aux
    V = 0.1 * rng.standard_normal((n, k))
    w = np.zeros(n)
    users = rng.integers(0, n_users, samples)
    pos = rng.integers(n_users, n_users + n_items, samples)
    neg = rng.integers(n_users, n_users + n_items, samples)
    aux = [SparseVector(n_users + n_items + rng.choice(n_aux, 3, replace=False), np.ones(3)) for _ in range(samples)]
    ptr = np.zeros(samples + 1, np.int64)
    np.cumsum([len(a) for a in aux], out=ptr[1:])
    idx = np.concatenate([a.ids for a in aux])
    val = np.concatenate([a.values for a in aux])
    attrs = ItemAttributes(
        [SparseVector(n_users + n_items + rng.choice(n_aux, 2, replace=False), [0.5, 0.5]) for _ in range(n_items)],
        n_users,
    )
    instances = [LabeledInstance(random_sparse(n, 4, rng, binary=True), float(rng.choice([-1.0, 1.0]))) for _ in range(samples)]
    x_ptr, x_idx, x_val, y = pack(instances)
    rows = np.arange(samples)
    return {
        "pair_epoch": lambda f, W, VV: f(W, VV, users, pos, neg, rows, ptr, idx, val, 0.01, 0.01, 0.01, True),
        "pair_epoch_attr": lambda f, W, VV: f(
            W, VV, users, pos, neg, rows, ptr, idx, val, attrs.ptr, attrs.idx, attrs.val, n_users, 0.01, 0.01, 0.01, True
        ),
        "bprmf_epoch": lambda f, W, VV: f(VV[:n_users], VV[n_users : n_users + n_items], users, pos - n_users, neg - n_users, 0.01, 0.01),
        "pointwise_epoch": lambda f, W, VV: f(np.zeros(1), W, VV, rows, x_ptr, x_idx, x_val, y, 0.001, 0.0, 0.01, 0.01),
    }, w, V


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def measure(samples, k, repeat):
    calls, w, V = make_inputs(samples, k)
    out = {}
    for name, call in calls.items():
        kernel = getattr(kernels, name)
        W, VV = w.copy(), V.copy()
        call(kernel, W, VV)  # compiles on the numba path
        digest = hashlib.sha256(W.tobytes() + VV.tobytes()).hexdigest()[:16]
        out[name] = {"ms": best_of(lambda: call(kernel, w.copy(), V.copy()), repeat) * 1e3, "hash": digest}
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=3000)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.worker:
        print(json.dumps(measure(args.samples, args.k, args.repeat)))
        return
    if not HAS_NUMBA:
        sys.exit("numba is unavailable or disabled; nothing to compare")

    jit = measure(args.samples, args.k, args.repeat)
    env = dict(os.environ, FMPAIR_DISABLE_JIT="1")
    cmd = [sys.executable, __file__, "--worker", f"--samples={args.samples}", f"--k={args.k}", f"--repeat={args.repeat}"]
    py = json.loads(subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout)
    print(f"samples={args.samples} k={args.k}")
    print(f"{'kernel':<18}{'numba ms':>12}{'python ms':>12}{'speedup':>10}  identical")
    for name in jit:
        a, b = jit[name], py[name]
        print(f"{name:<18}{a['ms']:12.2f}{b['ms']:12.2f}{b['ms'] / a['ms']:10.1f}  {a['hash'] == b['hash']}")


if __name__ == "__main__":
    main()
