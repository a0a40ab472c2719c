"""Simplified DSTC baseline.

Reference traversals are counted per observation window, filtered, folded
into a persistent consolidated matrix, turned into clustering units by a
greedy attraction ordering, and finally written out as contiguous clusters.

The consolidated matrix lives on simulated disk pages: every consolidation
reads and rewrites it, and unit construction reads it once. That I/O is
charged to the store.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping

from .store import IoCounters, ObjectStore, RelocationReport

MATRIX_ENTRY_BYTES = 16  # two 4-byte object ids + one 8-byte weight


@dataclass
class DstcParams:
    window_length: int = 1000
    selection_threshold: int = 2
    consolidation_decay: float = 1.0
    unit_min_weight: float = 2.0
    max_unit_size: int = 64

    def __post_init__(self):
        if self.window_length < 1 or self.selection_threshold < 1:
            raise ValueError("window_length and selection_threshold must be positive")
        if not 0.0 < self.consolidation_decay <= 1.0:
            raise ValueError("consolidation_decay must be in (0, 1]")
        if self.unit_min_weight <= 0:
            raise ValueError("unit_min_weight must be positive")
        if self.max_unit_size < 2:
            raise ValueError("max_unit_size must be >= 2")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "DstcParams":
        kwargs = {}
        for f in fields(cls):
            if f.name in values:
                cast = float if f.type in ("float", float) else int
                kwargs[f.name] = cast(values[f.name])
        return cls(**kwargs)


class ObservationMatrix:
    def __init__(self, window_id: int = 0):
        self.window_id = window_id
        self.counts: dict[tuple[int, int], int] = {}

    def observe(self, from_oid: int, to_oid: int) -> None:
        key = (from_oid, to_oid)
        self.counts[key] = self.counts.get(key, 0) + 1

    def __len__(self) -> int:
        return len(self.counts)


def end_window(matrix: ObservationMatrix, params: DstcParams) -> list[tuple[tuple[int, int], int]]:
    """Selection phase: keep significant counts, heaviest first; clears the window."""
    kept = [(pair, c) for pair, c in matrix.counts.items() if c >= params.selection_threshold]
    kept.sort(key=lambda item: (-item[1], item[0]))
    matrix.counts = {}
    matrix.window_id += 1
    return kept


def consolidate(
    consolidated: dict[tuple[int, int], float],
    filtered: Iterable[tuple[tuple[int, int], int]],
    params: DstcParams,
) -> None:
    """new = decay * old + count, for surviving pairs only."""
    for pair, count in filtered:
        consolidated[pair] = params.consolidation_decay * consolidated.get(pair, 0.0) + count


def build_units(consolidated: Mapping[tuple[int, int], float], params: DstcParams) -> list[list[int]]:
    """Greedy attraction ordering into vertex-disjoint linear units."""
    weights: dict[tuple[int, int], float] = {}
    for (a, b), w in consolidated.items():
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        weights[key] = weights.get(key, 0.0) + w
    edges = sorted(
        ((w, a, b) for (a, b), w in weights.items() if w >= params.unit_min_weight),
        key=lambda e: (-e[0], e[1], e[2]),
    )
    neighbours: dict[int, list[tuple[float, int]]] = {}
    for w, a, b in edges:
        neighbours.setdefault(a, []).append((w, b))
        neighbours.setdefault(b, []).append((w, a))
    for adj in neighbours.values():
        adj.sort(key=lambda e: (-e[0], e[1]))

    assigned: set[int] = set()
    units: list[list[int]] = []
    for w, a, b in edges:
        if a in assigned or b in assigned:
            continue
        unit = [a, b]
        assigned.update(unit)
        while len(unit) < params.max_unit_size:
            best = None
            for side, end in ((0, unit[0]), (1, unit[-1])):
                for weight, other in neighbours.get(end, ()):
                    if other in assigned:
                        continue
                    cand = (-weight, other, side)
                    if best is None or cand < best:
                        best = cand
                    break  # adjacency is sorted; first free neighbour is the best
            if best is None:
                break
            _, other, side = best
            if side == 0:
                unit.insert(0, other)
            else:
                unit.append(other)
            assigned.add(other)
        units.append(unit)
    return units


def units_csv(units: Iterable[list[int]]) -> str:
    """Diagnostic dump: one ``unit,position,oid`` row per member."""
    rows = ["unit,position,oid"]
    for u, unit in enumerate(units):
        rows.extend(f"{u},{i},{oid}" for i, oid in enumerate(unit))
    return "\n".join(rows) + "\n"


def reorganize(units: Iterable[list[int]], store: ObjectStore) -> RelocationReport:
    """Write the units back to back into one fresh contiguous segment."""
    sequence = [oid for unit in units for oid in unit if oid in store.objects]
    if len(sequence) < 2:
        return RelocationReport()
    return store.rewrite_placement(sequence)


@dataclass
class DstcReport:
    outcome: str
    units: int = 0
    unit_objects: int = 0
    moved: int = 0
    overhead: IoCounters = field(default_factory=IoCounters)

    CSV_HEADER = "outcome,cand_pages,cand_objects,resemblance,moved,overhead_reads,overhead_writes"

    def csv_row(self) -> str:
        return (
            f"{self.outcome},,{self.unit_objects},,{self.moved},"
            f"{self.overhead.page_reads},{self.overhead.page_writes}"
        )


class DstcEngine:
    """Observation/selection run online; consolidation onward runs on demand.

    Attach as a store listener (counts object accesses for window ends) and
    as the workload's edge observer (counts traversed references).
    """

    def __init__(self, store: ObjectStore, params: DstcParams | None = None):
        self.store = store
        self.params = params or DstcParams()
        self.matrix = ObservationMatrix()
        self.consolidated: dict[tuple[int, int], float] = {}
        self.pending: list[list[tuple[tuple[int, int], int]]] = []
        self.window_accesses = 0
        self.last_units: list[list[int]] = []

    # store listener
    def on_access(self, oid: int, page_id: int, size: int) -> None:
        self.window_accesses += 1
        if self.window_accesses >= self.params.window_length:
            self.close_window()

    def on_unload(self, page_id, resident) -> None:
        pass

    def on_move(self, oid: int) -> None:
        pass

    def on_delete(self, oid: int) -> None:
        self.consolidated = {k: v for k, v in self.consolidated.items() if oid not in k}

    # workload edge observer
    def on_edge(self, from_oid: int, to_oid: int) -> None:
        self.matrix.observe(from_oid, to_oid)

    def close_window(self) -> None:
        self.pending.append(end_window(self.matrix, self.params))
        self.window_accesses = 0

    def matrix_pages(self) -> int:
        return math.ceil(len(self.consolidated) * MATRIX_ENTRY_BYTES / self.store.page_capacity)

    def run(self) -> DstcReport:
        before = self.store.io_report()
        if self.matrix.counts:
            self.close_window()
        for filtered in self.pending:
            self.store.charge_io(reads=self.matrix_pages())
            consolidate(self.consolidated, filtered, self.params)
            self.store.charge_io(writes=self.matrix_pages())
        self.pending = []
        self.store.charge_io(reads=self.matrix_pages())
        units = self.last_units = build_units(self.consolidated, self.params)
        relocation = reorganize(units, self.store)
        outcome = "applied" if relocation.moved else "no_units" if not units else "unchanged"
        return DstcReport(
            outcome,
            units=len(units),
            unit_objects=sum(len(u) for u in units),
            moved=len(relocation.moved),
            overhead=self.store.io_report() - before,
        )
