import math
import random

import pytest

from clusterstore.dstc import (
    MATRIX_ENTRY_BYTES,
    DstcEngine,
    DstcParams,
    ObservationMatrix,
    build_units,
    consolidate,
    end_window,
    reorganize,
    units_csv,
)
from clusterstore.store import IoCounters

from conftest import make_store, one_object_per_page

A, B, C, D = 1, 2, 3, 4


def test_observe_counts_directed_pairs():
    m = ObservationMatrix()
    m.observe(A, B)
    m.observe(A, B)
    m.observe(B, A)
    assert m.counts == {(A, B): 2, (B, A): 1}


def test_empty_window():
    m = ObservationMatrix()
    assert end_window(m, DstcParams()) == []
    assert m.window_id == 1


def test_end_window_filters_and_clears():
    m = ObservationMatrix()
    for _ in range(3):
        m.observe(A, B)
    m.observe(B, C)
    assert end_window(m, DstcParams(selection_threshold=2)) == [((A, B), 3)]
    assert len(m) == 0


def test_end_window_all_below_threshold():
    m = ObservationMatrix()
    m.observe(A, B)
    assert end_window(m, DstcParams(selection_threshold=2)) == []


def test_end_window_tie_order():
    m = ObservationMatrix()
    for pair in [(C, D), (A, C), (A, B)] * 2:
        m.observe(*pair)
    m.observe(D, A)
    m.observe(D, A)
    m.observe(D, A)
    assert [p for p, _ in end_window(m, DstcParams())] == [(D, A), (A, B), (A, C), (C, D)]


@pytest.mark.parametrize("old,count,expected", [(None, 3, 3.0), (4.0, 3, 7.0)])
def test_consolidate_adds(old, count, expected):
    cons = {} if old is None else {(A, B): old}
    consolidate(cons, [((A, B), count)], DstcParams())
    assert cons[(A, B)] == expected


def test_consolidate_leaves_filtered_pairs_alone():
    cons = {(A, B): 4.0}
    consolidate(cons, [((B, C), 2)], DstcParams())
    assert cons[(A, B)] == 4.0


def test_consolidate_decay():
    cons = {(A, B): 4.0}
    consolidate(cons, [((A, B), 2)], DstcParams(consolidation_decay=0.5))
    assert cons[(A, B)] == 4.0


def test_build_units_greedy_chain():
    cons = {(A, B): 5.0, (B, C): 4.0, (C, D): 1.0}
    assert build_units(cons, DstcParams(unit_min_weight=2)) == [[A, B, C]]


def test_build_units_nothing_heavy_enough():
    assert build_units({(A, B): 1.0}, DstcParams(unit_min_weight=2)) == []


def test_build_units_size_cap_splits():
    cons = {(A, B): 5.0, (B, C): 4.0, (C, D): 3.0}
    assert build_units(cons, DstcParams(max_unit_size=2)) == [[A, B], [C, D]]


def test_build_units_sums_both_directions():
    cons = {(A, B): 1.0, (B, A): 1.5}
    assert build_units(cons, DstcParams(unit_min_weight=2)) == [[A, B]]


def test_build_units_extends_either_end():
    cons = {(B, C): 9.0, (A, B): 5.0, (C, D): 3.0}
    assert build_units(cons, DstcParams()) == [[A, B, C, D]]


def test_units_are_disjoint_and_capped():
    rng = random.Random(3)
    cons = {(rng.randint(1, 30), rng.randint(1, 30)): float(rng.randint(1, 9)) for _ in range(200)}
    params = DstcParams(max_unit_size=5)
    units = build_units(cons, params)
    flat = [o for u in units for o in u]
    assert len(flat) == len(set(flat))
    assert all(2 <= len(u) <= 5 for u in units)
    assert build_units(cons, params) == units


def test_units_csv():
    assert units_csv([[5, 3], [7, 8]]) == "unit,position,oid\n0,0,5\n0,1,3\n1,0,7\n1,1,8\n"


@pytest.mark.parametrize("kwargs", [
    {"window_length": 0}, {"selection_threshold": 0}, {"consolidation_decay": 0.0},
    {"consolidation_decay": 1.5}, {"unit_min_weight": 0}, {"max_unit_size": 1},
])
def test_param_ranges(kwargs):
    with pytest.raises(ValueError):
        DstcParams(**kwargs)


def test_params_from_mapping():
    p = DstcParams.from_mapping({"window_length": "50", "consolidation_decay": "0.5"})
    assert p.window_length == 50 and p.consolidation_decay == 0.5


# -- reorganize ------------------------------------------------------------------------

def test_reorganize_nothing():
    store, _ = make_store([10, 10])
    assert reorganize([], store).moved == set()


def test_reorganize_contiguous_unit_is_free():
    store, oids = make_store([10, 10, 10])
    store.reset_io()
    report = reorganize([oids[:2]], store)
    assert report.moved == set() and store.io_report() == IoCounters(0, 0)


def test_reorganize_scattered_units_costs_relocation_io():
    store, oids = one_object_per_page(6, capacity=100)
    store.reset_io()
    report = reorganize([[oids[4], oids[0]], [oids[5], oids[2]]], store)
    assert store.io_report() == report.io
    assert report.io.page_reads == 4
    assert store.is_contiguous([oids[4], oids[0], oids[5], oids[2]])


# -- engine --------------------------------------------------------------------------------

def _brute_force_weights(log, params):
    """Recompute consolidated weights from a log of ("access",) / ("edge", a, b)."""
    windows = [[]]
    seen = 0
    for ev in log:
        if ev[0] == "edge":
            windows[-1].append(ev[1:])
        else:
            seen += 1
            if seen == params.window_length:
                windows.append([])
                seen = 0
    weights = {}
    for edges in windows:
        for pair in set(edges):
            n = edges.count(pair)
            if n >= params.selection_threshold:
                weights[pair] = params.consolidation_decay * weights.get(pair, 0.0) + n
    return weights


@pytest.mark.parametrize("seed", range(40))
def test_consolidated_weights_match_replay(seed):
    rng = random.Random(seed)
    params = DstcParams(
        window_length=rng.randint(1, 40),
        selection_threshold=rng.randint(1, 3),
        consolidation_decay=rng.choice((1.0, 0.5, 0.9)),
    )
    store, _ = make_store([10] * 8)
    engine = DstcEngine(store, params)
    log = []
    for _ in range(rng.randint(1, 500)):
        if rng.random() < 0.5:
            log.append(("access",))
            engine.on_access(1, 1, 10)
        else:
            a, b = rng.randint(1, 6), rng.randint(1, 6)
            log.append(("edge", a, b))
            engine.on_edge(a, b)
    engine.close_window()
    for filtered in engine.pending:
        consolidate(engine.consolidated, filtered, params)
    assert engine.consolidated == pytest.approx(_brute_force_weights(log, params))


def test_engine_run_charges_matrix_io():
    store, oids = one_object_per_page(6, capacity=100)
    engine = DstcEngine(store, DstcParams(window_length=1000))
    for _ in range(3):
        engine.on_edge(oids[5], oids[0])
        engine.on_edge(oids[0], oids[3])
    store.reset_io()
    report = engine.run()
    assert report.outcome == "applied"
    assert engine.last_units == [[oids[5], oids[0], oids[3]]]
    pages = math.ceil(2 * MATRIX_ENTRY_BYTES / 100)
    # the first consolidation reads an empty matrix, writes it, then unit building reads it
    matrix_io = IoCounters(pages, pages)
    relocation_io = report.overhead - matrix_io
    assert relocation_io.page_reads == 3
    assert store.is_contiguous([oids[5], oids[0], oids[3]])


def test_engine_without_traffic():
    store, _ = make_store([10, 10])
    store.reset_io()
    report = DstcEngine(store).run()
    assert report.outcome == "no_units" and report.overhead == IoCounters(0, 0)


def test_engine_is_deterministic():
    def go():
        store, oids = one_object_per_page(8, capacity=100)
        engine = DstcEngine(store, DstcParams(window_length=5))
        rng = random.Random(11)
        for _ in range(100):
            engine.on_access(1, 1, 10)
            engine.on_edge(rng.choice(oids), rng.choice(oids))
        engine.run()
        return engine.last_units, store.dumps()
    assert go() == go()


def test_engine_forgets_deleted_objects():
    store, oids = make_store([10, 10, 10])
    engine = DstcEngine(store)
    engine.consolidated = {(oids[0], oids[1]): 3.0, (oids[1], oids[2]): 4.0}
    engine.on_delete(oids[0])
    assert engine.consolidated == {(oids[1], oids[2]): 4.0}
