from collections import Counter

import pytest

from clusterstore.store import ConfigurationError, IoCounters, ObjectStore
from clusterstore.workload import (
    ROOT,
    DatabaseSpec,
    TraversalSpec,
    generate_database,
    hierarchy_traversal,
    run_workload,
    schedule,
    simple_traversal,
)


class Edges:
    def __init__(self):
        self.seen = []

    def on_edge(self, a, b):
        self.seen.append((a, b))


def graph_store(edges, n):
    store = ObjectStore(page_capacity=1000, buffer_frames=4)
    for _ in range(n):
        store.insert_object(0, 100)
    for oid, refs in edges.items():
        store.set_refs(oid, refs)
    return store


BINARY = {1: (2, 3), 2: (4, 5), 3: (6, 7)}


def test_tiny_database_without_refs():
    store = generate_database(DatabaseSpec(class_count=1, instance_count=10, refs_per_object=0))
    assert len(store.objects) == 10
    assert all(o.refs == () for o in store.objects.values())


def test_generation_is_deterministic():
    spec = DatabaseSpec(instance_count=300, seed=5)
    assert generate_database(spec).dumps() == generate_database(spec).dumps()
    assert generate_database(DatabaseSpec(instance_count=300, seed=6)).dumps() != generate_database(spec).dumps()


def test_desk_scale_database_bounds():
    store = generate_database(DatabaseSpec(class_count=50, instance_count=2000, refs_per_object=5, seed=1))
    assert 100_000 <= store.total_bytes() <= 400_000
    assert all(50 <= o.size <= 200 for o in store.objects.values())
    assert all(o.class_id < 50 for o in store.objects.values())
    for obj in store.objects.values():
        assert len(obj.refs) == 5 and len(set(obj.refs)) == 5
        assert obj.oid not in obj.refs
        assert all(r in store.objects for r in obj.refs)
    store.check_invariants()


def test_hot_set_attracts_references():
    store = generate_database(DatabaseSpec(instance_count=2000, hot_fraction=0.2, seed=2))
    indegree = Counter(r for o in store.objects.values() for r in o.refs)
    top = sum(c for _, c in indegree.most_common(400))
    assert top / sum(indegree.values()) > 0.7


def test_uniform_ablation():
    store = generate_database(DatabaseSpec(instance_count=2000, hot_fraction=1.0, seed=2))
    indegree = Counter(r for o in store.objects.values() for r in o.refs)
    top = sum(c for _, c in indegree.most_common(400))
    assert top / sum(indegree.values()) < 0.45


@pytest.mark.parametrize("kwargs", [
    {"instance_count": 3, "refs_per_object": 3},
    {"object_size_range": (10, 5)},
    {"hot_fraction": 0.0},
    {"class_count": 0},
])
def test_bad_database_specs(kwargs):
    with pytest.raises(ConfigurationError):
        generate_database(DatabaseSpec(**kwargs))


def test_simple_traversal_depth_zero():
    store = graph_store(BINARY, 7)
    assert simple_traversal(store, 1, 0) == [(1, ROOT)]


def test_simple_traversal_binary_fanout():
    store = graph_store(BINARY, 7)
    obs = Edges()
    trace = simple_traversal(store, 1, 2, obs)
    assert [o for o, _ in trace] == [1, 2, 4, 5, 3, 6, 7]
    assert obs.seen == [(1, 2), (2, 4), (2, 5), (1, 3), (3, 6), (3, 7)]


def test_simple_traversal_cuts_cycles_per_path_only():
    # 1 -> 2 -> 1 is cut; 3 is reachable twice along different branches
    store = graph_store({1: (2, 3), 2: (1, 3)}, 3)
    assert [o for o, _ in simple_traversal(store, 1, 3)] == [1, 2, 3, 3]


def test_hierarchy_chain():
    store = graph_store({1: (2,), 2: (3,), 3: (4,), 4: (5,)}, 5)
    assert hierarchy_traversal(store, 1, 3) == [(1, ROOT), (2, 1), (3, 2), (4, 3)]


def test_hierarchy_stops_at_missing_slot():
    store = graph_store({1: (2, 3), 2: (4,)}, 4)
    assert [o for o, _ in hierarchy_traversal(store, 1, 3, ref_slot=1)] == [1, 3]


def test_hierarchy_self_cycle():
    store = graph_store({1: (1,)}, 1)
    assert [o for o, _ in hierarchy_traversal(store, 1, 3)] == [1]


def test_traversal_bounds_on_generated_graph():
    store = generate_database(DatabaseSpec(instance_count=500, refs_per_object=3, seed=4))
    for root in range(1, 40):
        assert len(simple_traversal(store, root, 2)) <= (3 ** 3 - 1) // 2
        assert len(hierarchy_traversal(store, root, 3)) <= 4


def test_zero_transactions():
    store = generate_database(DatabaseSpec(instance_count=50))
    result = run_workload(store, TraversalSpec(root_count=0))
    assert result.transactions == 0 and result.io == IoCounters(0, 0)


def test_hundred_roots_ten_rounds():
    store = generate_database(DatabaseSpec(instance_count=500))
    spec = TraversalSpec(root_count=100, repetitions=10)
    txns = schedule(store, spec)
    assert len(txns) == 1000
    assert len({root for _, root, _ in txns}) == 100
    assert run_workload(store, spec).transactions == 1000


def test_mixed_schedule():
    store = generate_database(DatabaseSpec(instance_count=500))
    txns = schedule(store, TraversalSpec(kind="mixed", transactions=300, depth=3, seed=9))
    assert len(txns) == 300
    assert {k for k, _, _ in txns} == {"simple", "hierarchy"}
    assert {d for _, _, d in txns} <= {1, 2, 3}


def test_same_seed_same_io_and_digest():
    text = generate_database(DatabaseSpec(instance_count=800, seed=3)).dumps()
    spec = TraversalSpec(kind="mixed", transactions=200, seed=4)
    runs = [run_workload(ObjectStore.loads(text, buffer_frames=5), spec) for _ in range(2)]
    assert runs[0].io == runs[1].io and runs[0].digest == runs[1].digest
    assert len(runs[0].digest) == 16


def test_hook_runs_after_each_transaction():
    store = generate_database(DatabaseSpec(instance_count=100))
    calls = []
    run_workload(store, TraversalSpec(root_count=5, repetitions=2), hook=calls.append)
    assert calls == list(range(10))


def test_too_many_roots():
    store = generate_database(DatabaseSpec(instance_count=10, refs_per_object=2))
    with pytest.raises(ConfigurationError):
        run_workload(store, TraversalSpec(root_count=11))
