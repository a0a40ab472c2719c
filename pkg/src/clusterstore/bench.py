"""Experiment pipeline: generate, measure, cluster, measure again, report.

Per sweep point and iteration::

    restore snapshot -> reset_io -> pre workload -> record
    -> flush + engine + flush (overhead window) -> record
    -> reset_io -> post workload (same schedule) -> record

The three windows partition every I/O of the run.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from . import dro
from .dstc import DstcEngine, DstcParams
from .stats import StatStore
from .store import ConfigurationError, IoCounters, ObjectStore
from .workload import DatabaseSpec, TraversalSpec, generate_database, run_workload

ENGINES = ("none", "dro", "dstc")
PHASES = ("pre", "overhead", "post")
INFINITE = "inf"
RESULTS_HEADER = "frames,phase,reads,writes,total,gain_factor,overhead_total"


def gain_factor(before_io: float, after_io: float) -> float:
    """Pre-clustering I/O over post-clustering I/O (> 1 means clustering helped)."""
    if after_io < 0 or before_io < 0:
        raise ValueError("I/O counts must be non-negative")
    if after_io == 0:
        return math.inf
    return before_io / after_io


def parse_kv(text: str) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def parse_frames(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigurationError("frame list is empty")
    return items


@dataclass
class ExperimentConfig:
    database: DatabaseSpec = field(default_factory=DatabaseSpec)
    workload: TraversalSpec = field(default_factory=TraversalSpec)
    engine: str = "dro"
    dro_params: dro.DroParams = field(default_factory=dro.DroParams)
    dstc_params: DstcParams = field(default_factory=DstcParams)
    # frame counts, or "<p>%" of the database's page count
    frames: list[str] = field(default_factory=lambda: ["10%"])
    iterations: int = 10
    page_capacity: int = 4096
    policy: str | None = None  # default: LRU-C for dstc, LRU otherwise
    prefetch: bool | None = None  # default: on for dstc
    trigger: str = "manual"
    auto_every: int = 100
    out: str = "out"
    backend: str | None = None

    def validate(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigurationError(f"unknown engine {self.engine!r}")
        if not self.frames:
            raise ConfigurationError("frame sweep must not be empty")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.trigger not in ("manual", "automatic"):
            raise ConfigurationError(f"unknown trigger {self.trigger!r}")
        if self.trigger == "automatic" and self.auto_every < 1:
            raise ConfigurationError("auto_every must be >= 1")
        self.database.validate()
        self.workload.validate()

    @property
    def buffer_policy(self) -> str:
        return self.policy or ("LRU-C" if self.engine == "dstc" else "LRU")

    @property
    def cluster_prefetch(self) -> bool:
        return self.prefetch if self.prefetch is not None else self.engine == "dstc"

    def resolve_frames(self, database_pages: int) -> list[int]:
        counts = set()
        for item in self.frames:
            if item.endswith("%"):
                n = round(float(item[:-1]) / 100.0 * database_pages)
            else:
                n = int(item)
            if n < 1:
                if item.endswith("%"):
                    n = 1
                else:
                    raise ConfigurationError(f"frame count must be >= 1, got {item!r}")
            counts.add(n)
        return sorted(counts)

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "ExperimentConfig":
        v = dict(values)
        known = {
            "seed", "db_seed", "workload_seed", "class_count", "instance_count",
            "refs_per_object", "size_min", "size_max", "hot_fraction", "hot_bias",
            "kind", "depth", "root_count", "repetitions", "ref_slot", "transactions",
            "engine", "frames", "iterations", "page_capacity", "policy", "prefetch",
            "trigger", "auto_every", "out", "backend",
        }
        known |= set(dro.DroParams.__dataclass_fields__) | set(DstcParams.__dataclass_fields__)
        unknown = sorted(set(v) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        seed = int(v.get("seed", 0))
        base = DatabaseSpec()
        db = DatabaseSpec(
            class_count=int(v.get("class_count", base.class_count)),
            instance_count=int(v.get("instance_count", base.instance_count)),
            refs_per_object=int(v.get("refs_per_object", base.refs_per_object)),
            object_size_range=(
                int(v.get("size_min", base.object_size_range[0])),
                int(v.get("size_max", base.object_size_range[1])),
            ),
            hot_fraction=float(v.get("hot_fraction", base.hot_fraction)),
            hot_bias=float(v.get("hot_bias", base.hot_bias)),
            seed=int(v.get("db_seed", seed)),
        )
        tbase = TraversalSpec()
        wl = TraversalSpec(
            kind=v.get("kind", tbase.kind),
            depth=int(v.get("depth", tbase.depth)),
            root_count=int(v.get("root_count", tbase.root_count)),
            repetitions=int(v.get("repetitions", tbase.repetitions)),
            ref_slot=int(v.get("ref_slot", tbase.ref_slot)),
            transactions=int(v.get("transactions", tbase.transactions)),
            seed=int(v.get("workload_seed", seed)),
        )
        try:
            config = cls(
                database=db,
                workload=wl,
                engine=v.get("engine", "dro"),
                dro_params=dro.DroParams.from_mapping(v),
                dstc_params=DstcParams.from_mapping(v),
                frames=parse_frames(v["frames"]) if "frames" in v else ["10%"],
                iterations=int(v.get("iterations", 10)),
                page_capacity=int(v.get("page_capacity", 4096)),
                policy=v.get("policy") or None,
                prefetch=dro._parse_bool(v["prefetch"]) if "prefetch" in v else None,
                trigger=v.get("trigger", "manual"),
                auto_every=int(v.get("auto_every", 100)),
                out=v.get("out", "out"),
                backend=v.get("backend") or None,
            )
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        config.validate()
        return config

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(parse_kv(fh.read()))


@dataclass
class PhaseMean:
    reads: float = 0.0
    writes: float = 0.0

    @property
    def total(self) -> float:
        return self.reads + self.writes


@dataclass
class ExperimentResult:
    frames: int
    phases: dict[str, PhaseMean]
    report: object = None  # last iteration's engine report
    iterations: int = 1

    @property
    def gain_factor(self) -> float:
        return gain_factor(self.phases["pre"].total, self.phases["post"].total)

    @property
    def overhead(self) -> PhaseMean:
        return self.phases["overhead"]


def build_database(config: ExperimentConfig) -> ObjectStore:
    store = ObjectStore(page_capacity=config.page_capacity, backend=config.backend)
    return generate_database(config.database, store)


def run_engine(
    config: ExperimentConfig, store: ObjectStore, state, sort_order=None
) -> tuple[object, IoCounters]:
    """Overhead window: flush, cluster, flush. Returns (report, io delta).

    ``sort_order`` overrides DRO's frequency sort (golden fixtures only).
    """
    before = store.io_report()
    store.flush()
    report = None
    if config.engine == "dro":
        report = dro.run(store, state, config.dro_params, sort_order, backend=config.backend)
    elif config.engine == "dstc":
        report = state.run()
    store.flush()
    return report, store.io_report() - before


def run_point(
    config: ExperimentConfig, snapshot_text: str, frames: int, iteration: int
) -> tuple[dict[str, IoCounters], object]:
    store = ObjectStore.loads(
        snapshot_text,
        buffer_frames=frames,
        policy=config.buffer_policy,
        cluster_prefetch=config.cluster_prefetch,
        backend=config.backend,
    )
    workload = replace(config.workload, seed=config.workload.seed + iteration)
    observer = None
    state = None
    hook = None
    if config.engine == "dro":
        state = StatStore(store.page_capacity)
        store.add_listener(state)
        if config.trigger == "automatic":
            hook = dro.AutoTrigger(store, state, config.dro_params, config.auto_every)
    elif config.engine == "dstc":
        state = DstcEngine(store, config.dstc_params)
        store.add_listener(state)
        observer = state

    store.reset_io()
    pre = run_workload(store, workload, observer=observer, hook=hook).io
    auto_overhead = hook.overhead if hook is not None else IoCounters()
    report, overhead = run_engine(config, store, state)
    if state is not None:
        store.remove_listener(state)
    store.reset_io()
    post = run_workload(store, workload).io
    phases = {"pre": pre - auto_overhead, "overhead": overhead + auto_overhead, "post": post}
    return phases, report


def run_experiment(config: ExperimentConfig, snapshot_text: str | None = None) -> list[ExperimentResult]:
    config.validate()
    if snapshot_text is None:
        snapshot_text = build_database(config).dumps()
    pages = len(ObjectStore.loads(snapshot_text).pages)
    results = []
    for frames in config.resolve_frames(pages):
        sums = {p: PhaseMean() for p in PHASES}
        report = None
        for it in range(config.iterations):
            phases, report = run_point(config, snapshot_text, frames, it)
            for name, io in phases.items():
                sums[name].reads += io.page_reads
                sums[name].writes += io.page_writes
        n = config.iterations
        means = {p: PhaseMean(m.reads / n, m.writes / n) for p, m in sums.items()}
        results.append(ExperimentResult(frames, means, report, n))
    return sorted(results, key=lambda r: r.frames)


def _num(x: float) -> str:
    if math.isinf(x):
        return INFINITE
    return f"{x:.4f}".rstrip("0").rstrip(".") if x != int(x) else str(int(x))


def results_csv(results: Iterable[ExperimentResult]) -> str:
    lines = [RESULTS_HEADER]
    for r in sorted(results, key=lambda r: r.frames):
        for phase in PHASES:
            m = r.phases[phase]
            gain = overhead = ""
            if phase == "post":
                gain = _num(r.gain_factor)
                overhead = _num(r.overhead.total)
            lines.append(f"{r.frames},{phase},{_num(m.reads)},{_num(m.writes)},{_num(m.total)},{gain},{overhead}")
    return "\n".join(lines) + "\n"


def parse_results_csv(text: str) -> list[ExperimentResult]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != RESULTS_HEADER:
        raise ConfigurationError("not a results CSV (bad header)")
    by_frames: dict[int, dict[str, PhaseMean]] = {}
    for ln in lines[1:]:
        cols = ln.split(",")
        if len(cols) != 7 or cols[1] not in PHASES:
            raise ConfigurationError(f"bad results row {ln!r}")
        by_frames.setdefault(int(cols[0]), {})[cols[1]] = PhaseMean(float(cols[2]), float(cols[3]))
    out = []
    for frames, phases in sorted(by_frames.items()):
        if set(phases) != set(PHASES):
            raise ConfigurationError(f"incomplete phases for frames={frames}")
        out.append(ExperimentResult(frames, phases))
    return out


def write_plot_data(results: Iterable[ExperimentResult], out_dir: str | os.PathLike) -> list[Path]:
    """One whitespace-separated ``frames value`` file per curve."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = sorted(results, key=lambda r: r.frames)
    series = {
        "pre_io.dat": [(r.frames, r.phases["pre"].total) for r in results],
        "post_io.dat": [(r.frames, r.phases["post"].total) for r in results],
        "overhead_io.dat": [(r.frames, r.overhead.total) for r in results],
        "gain_factor.dat": [(r.frames, r.gain_factor) for r in results],
    }
    paths = []
    for name, points in series.items():
        path = out / name
        body = "".join(f"{f} {_num(v)}\n" for f, v in points)
        path.write_text(f"# frames {name[:-4]}\n" + body)
        paths.append(path)
    return paths
