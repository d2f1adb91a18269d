"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_backends.py [--repeat N] [--skip-e2e]

Kernel timings call both variants in-process.  The end-to-end section runs a
CLI experiment twice in subprocesses, once per value of CPUSHPULL_NUMBA.
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import timeit

import numpy as np

from cpushpull import kernels
from cpushpull.ingestion import partition_to_agents, synth_logistic
from cpushpull.objectives import LogisticModel
from cpushpull.topology import build_mixing_matrices, build_ring_plus_random


def kernel_cases(n=20, p=41):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((n, p))
    V = rng.random((n, p))
    obj = LogisticModel.from_shards(partition_to_agents(synth_logistic(n, p, 50, 0), n, 0), 0.001)
    agents = np.arange(n, dtype=np.int64)
    x = X[0]
    m = build_mixing_matrices(build_ring_plus_random(n, 20, 0), build_ring_plus_random(n, 20, 1))
    return {
        "quantize_rows": (X, V, 2),
        "randk_rows": (X, V, 5),
        "logistic_grads": (X, agents, obj.Z, obj.labels, obj.offsets, obj.mu),
        "logistic_value": (x, obj.Z, obj.labels, obj._weights, obj.mu),
        "logistic_full_grad": (x, obj.Z, obj.labels, obj._weights, obj.mu),
        "power_iterate": (m.C, np.ones(n), 1e-13, 10**6),
    }


def bench_kernels(repeat):
    if not kernels.HAVE_NUMBA:
        print("numba not installed; kernel comparison skipped")
        return
    kernels.warmup()
    print(f"{'kernel':<20}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, args in kernel_cases().items():
        f_np, f_nb = kernels.variants(name)
        t = {}
        for tag, f in (("np", f_np), ("nb", f_nb)):
            f(*args)
            number = max(1, int(0.2 / max(timeit.timeit(lambda: f(*args), number=1), 1e-7)))
            t[tag] = min(timeit.repeat(lambda: f(*args), number=number, repeat=repeat)) / number * 1e6
        print(f"{name:<20}{t['np']:>12.1f}{t['nb']:>12.1f}{t['np'] / t['nb']:>10.2f}")


def bench_end_to_end(iters):
    cfg = {"algo": "cpp", "compressor": "quantize:b=4", "per_agent": 50, "iters": iters}
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "cfg.json")
        with open(path, "w") as fh:
            json.dump(cfg, fh)
        for flag in ("0", "1"):
            env = dict(os.environ, CPUSHPULL_NUMBA=flag)
            proc = subprocess.run(
                [sys.executable, "-m", "cpushpull", "--config", path],
                env=env, capture_output=True, text=True, check=True,
            )
            print(f"CPUSHPULL_NUMBA={flag}: {proc.stdout.strip()}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if not args.skip_e2e:
        bench_end_to_end(args.iters)


if __name__ == "__main__":
    main()
