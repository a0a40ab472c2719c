"""Synthetic object databases and traversal workloads.

Everything is driven by ``random.Random(seed)`` so a DatabaseSpec or TraversalSpec fixes the
database bytes and every traversal trace.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .store import ConfigurationError, IoCounters, ObjectStore

ROOT = 0  # "via" marker for traversal roots


@dataclass
class DatabaseSpec:
    class_count: int = 50
    instance_count: int = 2000
    refs_per_object: int = 5
    object_size_range: tuple[int, int] = (50, 200)
    hot_fraction: float = 0.2
    # probability that a reference targets the hot set (ignored when hot_fraction == 1)
    hot_bias: float = 0.8
    seed: int = 0

    def validate(self) -> None:
        lo, hi = self.object_size_range
        if self.class_count < 1 or self.instance_count < 1 or self.refs_per_object < 0:
            raise ConfigurationError("class_count and instance_count must be positive")
        if not 0 < lo <= hi:
            raise ConfigurationError(f"bad object_size_range {self.object_size_range}")
        if not 0.0 < self.hot_fraction <= 1.0:
            raise ConfigurationError("hot_fraction must be in (0, 1]")
        if not 0.0 <= self.hot_bias <= 1.0:
            raise ConfigurationError("hot_bias must be in [0, 1]")
        if self.refs_per_object > self.instance_count - 1:
            raise ConfigurationError("refs_per_object exceeds instance_count - 1")


@dataclass
class TraversalSpec:
    kind: str = "hierarchy"  # simple | hierarchy | mixed
    depth: int = 3
    root_count: int = 100
    repetitions: int = 10
    ref_slot: int = 0
    transactions: int = 1000  # mixed runs only
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("simple", "hierarchy", "mixed"):
            raise ConfigurationError(f"unknown traversal kind {self.kind!r}")
        if self.depth < 0 or self.root_count < 0 or self.repetitions < 0 or self.transactions < 0:
            raise ConfigurationError("traversal counts must be non-negative")
        if self.ref_slot < 0:
            raise ConfigurationError("ref_slot must be non-negative")


def generate_database(spec: DatabaseSpec, store: ObjectStore | None = None) -> ObjectStore:
    """Populate ``store`` (or a fresh default store) in object-id order."""
    spec.validate()
    store = store if store is not None else ObjectStore()
    if store.objects:
        raise ConfigurationError("generate_database needs an empty store")
    rng = random.Random(spec.seed)
    n = spec.instance_count
    first = store.next_oid
    oids = list(range(first, first + n))
    hot_count = max(1, round(spec.hot_fraction * n))
    hot = sorted(rng.sample(oids, hot_count)) if spec.hot_fraction < 1.0 else oids
    lo, hi = spec.object_size_range
    for oid in oids:
        class_id = rng.randrange(spec.class_count)
        size = rng.randint(lo, hi)
        refs: list[int] = []
        chosen = {oid}
        while len(refs) < spec.refs_per_object:
            pool = hot if rng.random() < spec.hot_bias else oids
            target = rng.choice(pool)
            if target in chosen:
                # hot pool may be exhausted for tiny databases; fall back to uniform
                target = rng.choice(oids)
                if target in chosen:
                    continue
            chosen.add(target)
            refs.append(target)
        got = store.insert_object(class_id, size, refs)
        assert got == oid
    return store


class EdgeObserver(Protocol):
    def on_edge(self, from_oid: int, to_oid: int) -> None: ...


def simple_traversal(
    store: ObjectStore, root: int, depth: int, observer: EdgeObserver | None = None
) -> list[tuple[int, int]]:
    """Depth-first walk over every reference slot, cycles cut per path."""
    trace: list[tuple[int, int]] = []
    path: set[int] = set()

    def visit(oid: int, via: int, remaining: int) -> None:
        obj = store.access_object(oid)
        trace.append((oid, via))
        if via != ROOT and observer is not None:
            observer.on_edge(via, oid)
        if remaining == 0:
            return
        path.add(oid)
        for ref in obj.refs:
            if ref not in path:
                visit(ref, oid, remaining - 1)
        path.discard(oid)

    visit(root, ROOT, depth)
    return trace


def hierarchy_traversal(
    store: ObjectStore, root: int, depth: int, ref_slot: int = 0, observer: EdgeObserver | None = None
) -> list[tuple[int, int]]:
    """Follow reference slot ``ref_slot`` only; stops at a missing slot or a cycle."""
    trace: list[tuple[int, int]] = []
    seen = set()
    oid, via = root, ROOT
    for level in range(depth + 1):
        obj = store.access_object(oid)
        trace.append((oid, via))
        if via != ROOT and observer is not None:
            observer.on_edge(via, oid)
        seen.add(oid)
        if level == depth or ref_slot >= len(obj.refs) or obj.refs[ref_slot] in seen:
            break
        oid, via = obj.refs[ref_slot], oid
    return trace


@dataclass
class WorkloadResult:
    io: IoCounters
    transactions: int
    visits: int
    digest: str
    traces: list[list[tuple[int, int]]] = field(default_factory=list, repr=False)


def choose_roots(store: ObjectStore, spec: TraversalSpec) -> list[int]:
    oids = sorted(store.objects)
    if spec.root_count > len(oids):
        raise ConfigurationError("root_count exceeds number of objects")
    return random.Random(spec.seed).sample(oids, spec.root_count)


def schedule(store: ObjectStore, spec: TraversalSpec) -> list[tuple[str, int, int]]:
    """Transactions as ``(kind, root, depth)``.

    Fixed-kind runs replay the predefined roots ``repetitions`` times in
    rounds; mixed runs draw kind, root and depth uniformly.
    """
    spec.validate()
    roots = choose_roots(store, spec)
    if spec.kind != "mixed":
        return [(spec.kind, r, spec.depth) for _ in range(spec.repetitions) for r in roots]
    if not roots:
        return []
    rng = random.Random(spec.seed + 1)
    out = []
    for _ in range(spec.transactions):
        kind = rng.choice(("simple", "hierarchy"))
        out.append((kind, rng.choice(roots), rng.randint(1, max(1, spec.depth))))
    return out


def run_workload(
    store: ObjectStore,
    spec: TraversalSpec,
    observer: EdgeObserver | None = None,
    hook: Callable[[int], None] | None = None,
    keep_traces: bool = False,
) -> WorkloadResult:
    """Execute the schedule; ``hook(i)`` runs after transaction ``i``."""
    before = store.io_report()
    digest = hashlib.blake2b(digest_size=8)
    visits = 0
    traces = []
    txns = schedule(store, spec)
    for i, (kind, root, depth) in enumerate(txns):
        if kind == "simple":
            trace = simple_traversal(store, root, depth, observer)
        else:
            trace = hierarchy_traversal(store, root, depth, spec.ref_slot, observer)
        visits += len(trace)
        digest.update(",".join(f"{o}:{v}" for o, v in trace).encode() + b";")
        if keep_traces:
            traces.append(trace)
        if hook is not None:
            hook(i)
    return WorkloadResult(store.io_report() - before, len(txns), visits, digest.hexdigest(), traces)
