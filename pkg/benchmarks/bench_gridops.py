"""Benchmark the grid kernels under both backends.

The backend is fixed at import time by ARENA_BACKEND, so each backend
runs in its own subprocess and the parent prints the comparison.

    python3 benchmarks/bench_gridops.py            # compare both
    ARENA_BACKEND=numpy python3 benchmarks/bench_gridops.py --single
"""

from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import time


def build_grids(n_grids=12, size=220, p=0.32, seed=7):
    import numpy as np
    rng = random.Random(seed)
    grids = []
    for _ in range(n_grids):
        g = np.zeros((size, size), dtype=bool)
        for y in range(size):
            for x in range(size):
                if rng.random() < p:
                    g[y, x] = True
        g[0, 0] = g[size - 1, size - 1] = False
        grids.append(g)
    return grids


def run_single(repeats=3):
    from arena import gridops

    grids = build_grids()
    size = grids[0].shape[0]
    rng = random.Random(11)

    # warm up the JIT so compile time stays out of the numbers
    gridops.distance_field(grids[0], (0, 0))
    gridops.line_of_sight(grids[0], (0, 0), (size - 1, size - 1))

    t0 = time.perf_counter()
    fields = []
    for _ in range(repeats):
        fields = [gridops.distance_field(g, (0, 0)) for g in grids]
    t_field = (time.perf_counter() - t0) / repeats

    pairs = [((rng.randrange(size), rng.randrange(size)),
              (rng.randrange(size), rng.randrange(size))) for _ in range(4000)]
    t0 = time.perf_counter()
    hits = 0
    for a, b in pairs:
        if gridops.line_of_sight(grids[0], a, b):
            hits += 1
    t_los = time.perf_counter() - t0

    t0 = time.perf_counter()
    n_paths = 0
    for field, g in zip(fields, grids):
        for _ in range(40):
            cell = (rng.randrange(size), rng.randrange(size))
            if not g[cell[1], cell[0]] and gridops.descend_path(field, cell) is not None:
                n_paths += 1
    t_path = time.perf_counter() - t0

    checksum = int(sum(int(f.sum()) for f in fields)) + hits + n_paths
    return {"backend": gridops.backend_name(), "distance_field_s": t_field,
            "line_of_sight_s": t_los, "descend_path_s": t_path,
            "checksum": checksum}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--single", action="store_true",
                        help="benchmark only the active backend, print JSON")
    args = parser.parse_args()

    if args.single:
        print(json.dumps(run_single()))
        return

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, ARENA_BACKEND=backend)
        out = subprocess.run([sys.executable, __file__, "--single"], env=env,
                             capture_output=True, text=True, check=True)
        results[backend] = json.loads(out.stdout.strip().splitlines()[-1])

    assert results["numba"]["checksum"] == results["numpy"]["checksum"], \
        "backends disagree on results"
    print(f"{'kernel':>18} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for key in ("distance_field_s", "line_of_sight_s", "descend_path_s"):
        a, b = results["numba"][key], results["numpy"][key]
        print(f"{key[:-2]:>18} {a:>9.4f}s {b:>9.4f}s {b / a:>8.1f}x")
    print(f"identical checksums: {results['numba']['checksum']}")


if __name__ == "__main__":
    main()
