import random

import pytest

from clusterstore.stats import StatStore
from clusterstore.store import ObjectStore

from oracles import replay_stats


def test_first_access_creates_record():
    s = StatStore(4096)
    s.record_access(7, 1, 100)
    assert s.objects[7].access_frequency == 1 and s.objects[7].usage_indicator
    assert s.links == {1: {7: 100}}


def test_frequency_counts_every_access():
    s = StatStore(4096)
    for _ in range(60):
        s.record_access(6, 1, 100)
    assert s.frequency(6) == 60


def test_usage_rate_is_ratio_of_used_bytes():
    s = StatStore(4096)
    s.record_access(1, 5, 1024)
    s.record_unload(5, [(1, 1024), (2, 2000)])
    assert s.pages[5].usage_rate == 0.25
    assert s.pages[5].nb_load == 1


def test_unaccessed_residents_give_zero_rate():
    s = StatStore(4096)
    s.record_unload(5, [(1, 1024), (2, 2000)])
    assert s.pages[5].usage_rate == 0.0


def test_latest_unload_wins():
    s = StatStore(1000)
    s.record_access(1, 5, 500)
    s.record_unload(5, [(1, 500), (2, 300)])
    s.record_access(2, 5, 300)
    s.record_unload(5, [(1, 500), (2, 300)])
    assert s.pages[5].nb_load == 2
    assert s.pages[5].usage_rate == pytest.approx(0.8)


def test_delete_sole_object_removes_page_stats():
    s = StatStore(4096)
    s.record_access(1, 5, 10)
    s.record_delete(1)
    assert s.pages == {} and s.objects == {}


def test_delete_untracked_is_noop():
    s = StatStore(4096)
    s.record_access(1, 5, 10)
    before = s.dump_csv()
    s.record_delete(99)
    assert s.dump_csv() == before


def test_delete_one_of_two_keeps_page():
    s = StatStore(4096)
    s.record_access(1, 5, 10)
    s.record_access(2, 5, 10)
    s.record_delete(1)
    assert 5 in s.pages and s.links[5] == {2: 10}


def test_moved_object_contributes_nothing_at_unload():
    s = StatStore(1000)
    s.record_access(1, 5, 100)
    s.record_access(2, 6, 100)
    s.record_move(1)
    s.record_unload(6, [(1, 100), (2, 100)])
    assert s.pages[6].usage_rate == pytest.approx(0.1)


def test_move_then_access_links_destination():
    s = StatStore(1000)
    s.record_access(1, 5, 100)
    s.record_move(1)
    assert s.linked_page.get(1) is None
    s.record_access(1, 9, 100)
    assert s.links[9] == {1: 100}


def test_move_keeps_frequency():
    s = StatStore(1000)
    for _ in range(60):
        s.record_access(1, 5, 100)
    s.record_move(1)
    assert s.frequency(1) == 60 and not s.objects[1].usage_indicator


@pytest.mark.parametrize("rate,loads,expected", [(0.5, 2, True), (0.9, 2, False), (0.5, 1, False), (0.8, 3, False)])
def test_candidate_pages_strict_bounds(rate, loads, expected):
    s = StatStore(1000)
    s.record_access(1, 5, int(rate * 1000))
    for _ in range(loads):
        s.record_unload(5, [(1, int(rate * 1000))])
    assert (5 in s.candidate_pages(0.8, 1.0)) is expected


def test_purge_all():
    s = StatStore(1000)
    s.record_access(1, 5, 100)
    s.record_unload(5, [(1, 100)])
    s.purge()
    assert not s.objects and not s.pages and not s.links


def test_purge_some_pages_keeps_others():
    s = StatStore(1000)
    s.record_access(1, 5, 100)
    s.record_access(2, 6, 100)
    s.record_unload(6, [(2, 100)])
    s.purge(pages={5})
    assert 1 not in s.objects and 5 not in s.pages
    assert s.frequency(2) == 1 and s.pages[6].nb_load == 1


def test_purge_after_clustering_without_suind():
    from clusterstore import dro
    store = ObjectStore(page_capacity=100, buffer_frames=1)
    stats = StatStore(100)
    store.add_listener(stats)
    oids = [store.insert_object(0, 100) for _ in range(4)]
    for o in oids:
        store.access_object(o)
    store.flush()
    relocation = store.rewrite_placement([oids[2], oids[0]])
    dro.step4_update(stats, dro.DroParams(SUInd=False), relocation)
    assert set(stats.objects) == {oids[1], oids[3]}
    assert set(stats.pages) == {store.page_of(oids[1]), store.page_of(oids[3])}
    stats.check_invariants()


def test_aggregates():
    s = StatStore(1000)
    s.record_access(1, 5, 200)
    s.record_access(2, 6, 600)
    s.record_unload(5, [(1, 200)])
    assert s.pages_loaded == 1
    assert s.mean_usage_rate == pytest.approx((0.2 + 0.0) / 2)


def test_dump_csv_rows():
    s = StatStore(1000)
    s.record_access(1, 5, 250)
    s.record_unload(5, [(1, 250)])
    assert s.dump_csv().splitlines() == [
        "kind,id,field1,field2",
        "object,1,1,1",
        "page,5,1,0.25",
        "link,5,1,250",
    ]


def test_store_events_drive_stats():
    store = ObjectStore(page_capacity=1000, buffer_frames=1)
    stats = StatStore(1000)
    store.add_listener(stats)
    a = store.insert_object(0, 300)
    b = store.insert_object(0, 300)
    c = store.insert_object(0, 900)
    store.access_object(a)
    store.access_object(c)
    assert stats.pages[1].nb_load == 1
    assert stats.pages[1].usage_rate == pytest.approx(0.3)
    store.access_object(b)
    store.delete_object(c)
    assert store.page_of(a) == 1 and 2 not in stats.pages
    stats.check_invariants()


# -- replay oracle --------------------------------------------------------------

def _random_events(rng, n):
    sizes = {o: rng.randint(10, 300) for o in range(1, 13)}
    events = []
    for _ in range(n):
        r = rng.random()
        if r < 0.5:
            o = rng.randint(1, 12)
            events.append(("access", o, rng.randint(1, 6), sizes[o]))
        elif r < 0.72:
            resident = [(o, sizes[o]) for o in rng.sample(range(1, 13), rng.randint(0, 4))]
            events.append(("unload", rng.randint(1, 6), resident))
        elif r < 0.84:
            events.append(("move", rng.randint(1, 14)))
        elif r < 0.93:
            events.append(("delete", rng.randint(1, 14)))
        elif r < 0.96:
            events.append(("purge_all",))
        else:
            events.append(("purge", set(rng.sample(range(1, 7), 2)), set(rng.sample(range(1, 13), 1))))
    return events


def _apply(stats, ev):
    kind = ev[0]
    if kind == "access":
        stats.record_access(*ev[1:])
    elif kind == "unload":
        stats.record_unload(*ev[1:])
    elif kind == "move":
        stats.record_move(ev[1])
    elif kind == "delete":
        stats.record_delete(ev[1])
    elif kind == "purge_all":
        stats.purge()
    else:
        stats.purge(pages=ev[1], objects=ev[2])


@pytest.mark.parametrize("seed", range(60))
def test_stats_match_event_replay(seed):
    rng = random.Random(seed)
    events = _random_events(rng, rng.randint(1, 500))
    stats = StatStore(1000)
    last_freq = {}
    for ev in events:
        _apply(stats, ev)
        stats.check_invariants()
        if ev[0] in ("delete", "purge", "purge_all"):
            last_freq = {}
        for o, st in stats.objects.items():
            assert st.access_frequency >= last_freq.get(o, 0)
        last_freq = {o: st.access_frequency for o, st in stats.objects.items()}
    objects, pages, links = replay_stats(events, 1000)
    assert {o: (s.access_frequency, s.usage_indicator) for o, s in stats.objects.items()} == objects
    assert set(stats.pages) == set(pages)
    for p, (nb, rate) in pages.items():
        assert stats.pages[p].nb_load == nb
        assert stats.pages[p].usage_rate == pytest.approx(rate)
    assert {o: (p, stats.links[p][o]) for o, p in stats.linked_page.items()} == links
