"""Detection & Reclustering of Objects (DRO).

Clustering runs in four gated steps: select candidate pages from usage
statistics, order candidate objects along the reference graph, compare the
proposal with the current layout, and relocate plus refresh statistics.
"""
from __future__ import annotations

import array
from dataclasses import dataclass, field, fields
from typing import Mapping, Sequence

from . import kernels
from .stats import StatStore
from .store import IoCounters, ObjectStore, RelocationReport

ABORTED_STEP1 = "aborted_step1"
ABORTED_GATE = "aborted_gate"
SKIPPED_RESEMBLANCE = "skipped_resemblance"
APPLIED = "applied"


@dataclass
class DroParams:
    MinUR: float = 0.8
    MinLT: float = 1.0
    PCRate: float = 0.05
    MaxD: int = 1
    MaxDR: float = 0.05
    MaxRR: float = 0.9
    SUInd: bool = True

    def __post_init__(self):
        for name in ("MinUR", "MaxDR", "MaxRR", "PCRate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if int(self.MaxD) != self.MaxD or self.MaxD < 1:
            raise ValueError(f"MaxD must be an integer >= 1, got {self.MaxD}")
        self.MaxD = int(self.MaxD)

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "DroParams":
        kwargs = {}
        for f in fields(cls):
            if f.name not in values:
                continue
            raw = values[f.name]
            if f.name == "SUInd":
                kwargs[f.name] = _parse_bool(raw)
            elif f.name == "MaxD":
                kwargs[f.name] = int(raw)
            else:
                kwargs[f.name] = float(raw)
        return cls(**kwargs)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))


def _parse_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


@dataclass
class ClusterProposal:
    order: list[int]
    sublists: list[list[int]]
    resemblance_rate: float | None = None


@dataclass
class Candidates:
    pages: set[int]
    objects: set[int]
    used_pages: int


@dataclass
class ClusteringReport:
    outcome: str
    cand_pages: int = 0
    cand_objects: int = 0
    resemblance: float | None = None
    moved: int = 0
    overhead: IoCounters = field(default_factory=IoCounters)
    proposal: ClusterProposal | None = None

    CSV_HEADER = "outcome,cand_pages,cand_objects,resemblance,moved,overhead_reads,overhead_writes"

    def csv_row(self) -> str:
        rr = "" if self.resemblance is None else f"{self.resemblance:.6f}"
        return (
            f"{self.outcome},{self.cand_pages},{self.cand_objects},{rr},{self.moved},"
            f"{self.overhead.page_reads},{self.overhead.page_writes}"
        )


def dissimilarity(af_i: float, af_j: float) -> float:
    """|AF_i - AF_j| / max(AF_i, AF_j)."""
    top = max(af_i, af_j)
    if top <= 0:
        raise ValueError("dissimilarity undefined when both frequencies are zero")
    return abs(af_i - af_j) / top


def frequency_order(stats: StatStore, oids) -> list[int]:
    """Descending access frequency, ties by ascending object id."""
    return sorted(oids, key=lambda o: (-stats.frequency(o), o))


def step1_select(stats: StatStore, store: ObjectStore, params: DroParams) -> Candidates | None:
    """Candidate pages/objects, or ``None`` when the page gate fails."""
    pages = {p for p in stats.candidate_pages(params.MinUR, params.MinLT) if p in store.pages}
    objects = {o for o in stats.objects_on(pages) if o in store.objects}
    used = len(stats.pages)
    if len(pages) <= 1 or used == 0 or len(pages) / used <= params.PCRate:
        return None
    return Candidates(pages, objects, used)


def _csr(graph: Mapping[int, Sequence[int]], extra: set[int]):
    """Dense indices plus CSR arrays for ``graph`` (all nodes it mentions)."""
    nodes = set(graph) | extra
    for refs in graph.values():
        nodes.update(refs)
    ids = sorted(nodes)
    index = {oid: i for i, oid in enumerate(ids)}
    offsets = array.array("q", [0])
    targets = array.array("q")
    for oid in ids:
        targets.extend(index[r] for r in graph.get(oid, ()))
        offsets.append(len(targets))
    return ids, index, offsets, targets


def step2_order(
    candidates: Sequence[int] | set[int],
    graph: Mapping[int, Sequence[int]],
    frequencies: Mapping[int, int],
    params: DroParams,
    sort_order: Sequence[int] | None = None,
    backend: str | None = None,
) -> ClusterProposal:
    """Build the placement order by growing reference chains.

    Passes run for distance D = 1..MaxD. In each pass every chain head (in
    frequency order) grows its chain at the tail: an object is linked if it
    is a candidate without a predecessor, is reachable from some chain member
    through at most D references (any object may be an intermediate), and
    its dissimilarity to that member is at most MaxDR. Members are searched
    in chain order, references in slot order, shorter paths first. Linking
    the head of another chain splices that whole chain in. Chains are
    finally concatenated in creation order.
    """
    cand = set(candidates)
    if sort_order is None:
        sort_order = sorted(cand, key=lambda o: (-frequencies[o], o))
    else:
        sort_order = list(sort_order)
        if set(sort_order) != cand or len(sort_order) != len(cand):
            raise ValueError("sort_order must be a permutation of the candidates")
    if not cand:
        return ClusterProposal([], [])
    for oid in cand:
        if frequencies.get(oid, 0) < 1:
            raise ValueError(f"candidate {oid} has no access statistics")

    ids, index, offsets, targets = _csr(graph, cand)
    freq = [float(frequencies.get(oid, 0)) if oid in cand else 0.0 for oid in ids]
    searcher = kernels.get_backend(backend).ChainSearcher(offsets, targets, freq, params.MaxDR)

    eligible = bytearray(len(ids))
    for oid in cand:
        eligible[index[oid]] = 1
    order_idx = [index[o] for o in sort_order]
    has_prev = [False] * len(ids)
    chains: dict[int, list[int]] = {}  # head -> members (dense ids), in creation order

    for depth in range(1, params.MaxD + 1):
        for start in order_idx:
            if has_prev[start]:
                continue
            chain = chains.setdefault(start, [start])
            eligible[start] = 0
            cursor = 0
            while True:
                # members before the cursor have no reachable eligible object left;
                # eligibility only ever shrinks during this chain's growth
                pos, found = searcher.search(chain, cursor, depth, eligible)
                if found < 0:
                    break
                cursor = pos
                tail = chains.pop(found, [found])
                for member in tail:
                    eligible[member] = 0
                has_prev[found] = True
                chain.extend(tail)
            eligible[start] = 1

    sublists = [[ids[i] for i in chain] for chain in chains.values()]
    order = [oid for sub in sublists for oid in sub]
    return ClusterProposal(order, sublists)


def resemblance(proposal: ClusterProposal | Sequence[int], store: ObjectStore) -> float:
    """Share of proposal objects already stored right after their predecessor."""
    order = proposal.order if isinstance(proposal, ClusterProposal) else list(proposal)
    if not order:
        raise ValueError("resemblance undefined for an empty proposal")
    kept = 1 + sum(1 for a, b in zip(order, order[1:]) if store.adjacent(a, b))
    return kept / len(order)


def step3_apply(
    proposal: ClusterProposal, store: ObjectStore, params: DroParams
) -> RelocationReport | None:
    if proposal.resemblance_rate is None:
        proposal.resemblance_rate = resemblance(proposal, store)
    if proposal.resemblance_rate >= params.MaxRR:
        return None
    return store.rewrite_placement(proposal.order)


def step4_update(stats: StatStore, params: DroParams, relocation: RelocationReport) -> None:
    if params.SUInd:
        stats.purge()
    else:
        stats.purge(pages=relocation.touched_pages, objects=relocation.moved)


def reference_graph(store: ObjectStore) -> dict[int, tuple[int, ...]]:
    return {oid: obj.refs for oid, obj in store.objects.items()}


def run(
    store: ObjectStore,
    stats: StatStore,
    params: DroParams | None = None,
    sort_order: Sequence[int] | None = None,
    backend: str | None = None,
) -> ClusteringReport:
    """One clustering phase; the overhead covers every I/O from flush onward."""
    params = params or DroParams()
    before = store.io_report()
    store.flush()

    def finish(report: ClusteringReport) -> ClusteringReport:
        report.overhead = store.io_report() - before
        return report

    candidates = step1_select(stats, store, params)
    if candidates is None:
        return finish(ClusteringReport(ABORTED_STEP1))
    report = ClusteringReport(APPLIED, len(candidates.pages), len(candidates.objects))
    frequencies = {o: stats.frequency(o) for o in candidates.objects}
    if sort_order is not None:
        sort_order = [o for o in sort_order if o in candidates.objects]
    proposal = step2_order(
        candidates.objects, reference_graph(store), frequencies, params, sort_order, backend
    )
    report.proposal = proposal
    if not proposal.order:
        report.outcome = ABORTED_GATE
        return finish(report)
    proposal.resemblance_rate = report.resemblance = resemblance(proposal, store)
    relocation = step3_apply(proposal, store, params)
    if relocation is None:
        report.outcome = SKIPPED_RESEMBLANCE
        return finish(report)
    step4_update(stats, params, relocation)
    report.moved = len(relocation.moved)
    return finish(report)


class AutoTrigger:
    """Runs DRO every ``every`` transactions; used as a workload hook."""

    def __init__(self, store: ObjectStore, stats: StatStore, params: DroParams, every: int):
        if every < 1:
            raise ValueError("every must be >= 1")
        self.store = store
        self.stats = stats
        self.params = params
        self.every = every
        self.reports: list[ClusteringReport] = []

    def __call__(self, transaction_index: int) -> None:
        if (transaction_index + 1) % self.every == 0:
            self.reports.append(run(self.store, self.stats, self.params))

    @property
    def overhead(self) -> IoCounters:
        total = IoCounters()
        for r in self.reports:
            total = total + r.overhead
        return total
