"""Compare the compiled and pure-Python kernel backends.

Three measurements per backend:
  buffer  replay of a random page-access trace through PageBuffer (LRU-C)
  order   DRO chain construction over a random reference graph
  bench   one full pre/cluster/post experiment point on a generated database

Usage: python benchmarks/bench_backends.py [--repeat N] [--objects N]
"""
from __future__ import annotations

import argparse
import random
import statistics
import sys
import time

from clusterstore import bench, kernels
from clusterstore.bench import ExperimentConfig
from clusterstore.dro import DroParams, step2_order


def time_buffer(backend: str, events: int) -> float:
    module = kernels.get_backend(backend)
    rng = random.Random(1)
    pages = [rng.randrange(400) for _ in range(events)]
    buf = module.PageBuffer(64, True)
    started = time.perf_counter()
    for p in pages:
        buf.access(p, p // 8)
    return time.perf_counter() - started


def time_order(backend: str, objects: int) -> float:
    rng = random.Random(2)
    graph = {o: tuple(rng.randrange(objects) for _ in range(5)) for o in range(objects)}
    tracked = set(rng.sample(range(objects), objects // 2))
    freq = {o: rng.randint(1, 30) for o in tracked}
    params = DroParams(MaxD=2, MaxDR=0.2)
    started = time.perf_counter()
    step2_order(tracked, graph, freq, params, backend=backend)
    return time.perf_counter() - started


def time_bench(backend: str, objects: int) -> float:
    config = ExperimentConfig.from_mapping({
        "instance_count": str(objects), "engine": "dro", "frames": "10%",
        "iterations": "1", "backend": backend, "seed": "1",
    })
    text = bench.build_database(config).dumps()
    started = time.perf_counter()
    bench.run_experiment(config, text)
    return time.perf_counter() - started


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--objects", type=int, default=5000)
    parser.add_argument("--events", type=int, default=200_000)
    args = parser.parse_args(argv)

    backends = kernels.available()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is measured", file=sys.stderr)
    jobs = {
        "buffer": lambda b: time_buffer(b, args.events),
        "order": lambda b: time_order(b, args.objects),
        "bench": lambda b: time_bench(b, args.objects),
    }
    print(f"{'kernel':<8}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, job in jobs.items():
        medians = {b: statistics.median(job(b) for _ in range(args.repeat)) for b in backends}
        row = f"{name:<8}" + "".join(f"{medians[b] * 1000:>10.1f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{medians['python'] / medians['compiled']:>9.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
