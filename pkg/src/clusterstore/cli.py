"""``clusterstore`` command line.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, dro
from .bench import ExperimentConfig
from .dstc import DstcEngine
from .stats import StatStore
from .store import ConfigurationError, IoCounters, ObjectStore, StoreError, io_report_csv
from .workload import run_workload

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clusterstore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("generate", "generate a database snapshot"),
        ("run", "run the workload on a snapshot and report I/O"),
        ("cluster", "run workload + one clustering pass on a snapshot"),
        ("bench", "full before/after experiment over a frame sweep"),
        ("report", "turn a results CSV into plot-data files"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--snapshot", help="store snapshot file")
        p.add_argument("--engine", choices=bench.ENGINES)
        p.add_argument("--frames", help="comma-separated frame counts or percentages (e.g. 8,16 or 5%%,50%%)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--iterations", type=int)
    return parser


def load_config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {args.config}")
        values = bench.parse_kv(path.read_text())
    if args.seed is not None:
        values["seed"] = str(args.seed)
        values.pop("db_seed", None)
        values.pop("workload_seed", None)
    if args.engine:
        values["engine"] = args.engine
    if args.frames:
        values["frames"] = args.frames
    if args.out:
        values["out"] = args.out
    if args.iterations is not None:
        values["iterations"] = str(args.iterations)
    try:
        return ExperimentConfig.from_mapping(values)
    except ConfigurationError as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def _snapshot_text(args, required: bool) -> str | None:
    if not args.snapshot:
        if required:
            raise UsageError("--snapshot is required for this command")
        return None
    path = Path(args.snapshot)
    if not path.is_file():
        raise UsageError(f"snapshot not found: {args.snapshot}")
    return path.read_text(encoding="ascii")


def cmd_generate(config: ExperimentConfig, args) -> int:
    out = Path(args.snapshot) if args.snapshot else Path(config.out) / "db.snapshot"
    out.parent.mkdir(parents=True, exist_ok=True)
    store = bench.build_database(config)
    store.snapshot(out)
    print(f"{out}: {len(store.objects)} objects on {len(store.pages)} pages ({store.total_bytes()} B)")
    return EXIT_OK


def cmd_run(config: ExperimentConfig, args) -> int:
    text = _snapshot_text(args, required=True)
    pages = len(ObjectStore.loads(text).pages)
    windows: list[tuple[str, IoCounters]] = []
    for frames in config.resolve_frames(pages):
        store = ObjectStore.loads(
            text, buffer_frames=frames, policy=config.buffer_policy,
            cluster_prefetch=config.cluster_prefetch, backend=config.backend,
        )
        result = run_workload(store, config.workload)
        windows.append((f"run@{frames}", result.io))
        print(f"frames={frames} transactions={result.transactions} visits={result.visits} digest={result.digest}")
    csv = io_report_csv(windows)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.csv").write_text(csv)
    sys.stdout.write(csv)
    return EXIT_OK


def cmd_cluster(config: ExperimentConfig, args) -> int:
    text = _snapshot_text(args, required=True)
    if config.engine == "none":
        raise UsageError("cluster needs --engine dro or dstc")
    pages = len(ObjectStore.loads(text).pages)
    frames = config.resolve_frames(pages)[0]
    store = ObjectStore.loads(
        text, buffer_frames=frames, policy=config.buffer_policy,
        cluster_prefetch=config.cluster_prefetch, backend=config.backend,
    )
    if config.engine == "dro":
        state = StatStore(store.page_capacity)
        store.add_listener(state)
        run_workload(store, config.workload)
        report, _ = bench.run_engine(config, store, state)
    else:
        state = DstcEngine(store, config.dstc_params)
        store.add_listener(state)
        run_workload(store, config.workload, observer=state)
        report, _ = bench.run_engine(config, store, state)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    row = dro.ClusteringReport.CSV_HEADER + "\n" + report.csv_row() + "\n"
    (out / "cluster.csv").write_text(row)
    store.snapshot(out / "clustered.snapshot")
    sys.stdout.write(row)
    if isinstance(report, dro.ClusteringReport) and report.proposal is not None:
        print("proposal " + ",".join(str(o) for o in report.proposal.order))
    return EXIT_OK


def cmd_bench(config: ExperimentConfig, args) -> int:
    text = _snapshot_text(args, required=False)
    results = bench.run_experiment(config, text)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    csv = bench.results_csv(results)
    (out / "results.csv").write_text(csv)
    bench.write_plot_data(results, out)
    sys.stdout.write(csv)
    return EXIT_OK


def cmd_report(config: ExperimentConfig, args) -> int:
    path = Path(config.out) / "results.csv"
    if not path.is_file():
        raise UsageError(f"results not found: {path}")
    results = bench.parse_results_csv(path.read_text())
    for p in bench.write_plot_data(results, config.out):
        print(p)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "cluster": cmd_cluster,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        return COMMANDS[args.command](config, args)
    except UsageError as exc:
        print(f"clusterstore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StoreError, ValueError, OSError) as exc:
        print(f"clusterstore: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
