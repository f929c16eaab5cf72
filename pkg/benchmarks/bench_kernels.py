"""Compare the numba and numpy backends.

Times the leave-one-out walk kernel on the default Monte Carlo shape
(250 groups of 25 agents, 4 steps) and a full replication (simulate, fit
both estimators, Hausman test). Each backend runs in its own interpreter
with ``PEERFX_BACKEND`` set, so module-level backend selection is honoured.

Usage::

    python benchmarks/bench_kernels.py [--groups 250] [--size 25] [--repeat 20]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from peerfx._accel import BACKEND
from peerfx.dgp import ErrorCoupling, FormationConfig, StructuralParams, group_rng, simulate_arrays
from peerfx.kernels import leave_out_walks
from peerfx.montecarlo import McConfig, _replicate

G, n, repeat = map(int, sys.argv[1:4])
A, x, _, _ = simulate_arrays(G, n, StructuralParams(), FormationConfig(), ErrorCoupling(), group_rng(1, 0))
A = A.astype(np.float64)
leave_out_walks(A, x, 4)  # compile / warm up
kernel = min(timeit.repeat(lambda: leave_out_walks(A, x, 4), number=1, repeat=repeat))
cfg = McConfig(G=G, n_g=n, R=1)
_replicate(cfg, 0)
rep = min(timeit.repeat(lambda: _replicate(cfg, 0), number=1, repeat=max(3, repeat // 4)))
first, second = leave_out_walks(A, x, 4)
print(json.dumps({"backend": BACKEND, "kernel": kernel, "replication": rep,
                  "checksum": [float(first.sum()), float(second.sum())]}))
"""


def run(backend, args):
    env = dict(os.environ, PEERFX_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(args.groups), str(args.size), str(args.repeat)],
        env=env, capture_output=True, text=True,
    )
    if out.returncode:
        sys.exit(f"{backend} run failed:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--groups", type=int, default=250)
    parser.add_argument("--size", type=int, default=25)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)

    results = [run(b, args) for b in ("numba", "numpy")]
    print(f"shape: {args.groups} groups x {args.size} agents, 4 steps; best of {args.repeat}")
    print(f"{'backend':<8} {'kernel ms':>10} {'replication ms':>15}")
    for res in results:
        print(f"{res['backend']:<8} {1e3 * res['kernel']:>10.2f} {1e3 * res['replication']:>15.2f}")
    nb, np_ = results
    print(f"kernel speedup {np_['kernel'] / nb['kernel']:.1f}x, "
          f"replication speedup {np_['replication'] / nb['replication']:.1f}x")
    diff = max(abs(a - b) / abs(b) for a, b in zip(nb["checksum"], np_["checksum"]))
    print(f"relative checksum difference {diff:.2e}")


if __name__ == "__main__":
    main()
