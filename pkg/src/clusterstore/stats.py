"""DRO usage statistics: per-object frequencies and per-page usage rates.

A :class:`StatStore` is attached to an :class:`~clusterstore.store.ObjectStore`
as a listener and updated synchronously from its access, unload, move and
delete events.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass
class ObjectStat:
    oid: int
    access_frequency: int = 0
    usage_indicator: bool = False


@dataclass
class PageStat:
    page_id: int
    nb_load: int = 0
    usage_rate: float = 0.0


class StatStore:
    def __init__(self, page_capacity: int):
        if page_capacity <= 0:
            raise ValueError("page_capacity must be positive")
        self.page_capacity = page_capacity
        self.objects: dict[int, ObjectStat] = {}
        self.pages: dict[int, PageStat] = {}
        # page -> {oid: occupied bytes}; each object links to at most one page
        self.links: dict[int, dict[int, int]] = {}
        self.linked_page: dict[int, int] = {}

    # -- event handlers ---------------------------------------------------

    def record_access(self, oid: int, page_id: int, size: int) -> None:
        stat = self.objects.get(oid)
        if stat is None:
            stat = self.objects[oid] = ObjectStat(oid)
        stat.access_frequency += 1
        stat.usage_indicator = True
        current = self.linked_page.get(oid)
        if current is not None and current != page_id:
            self._unlink(oid)
        if page_id not in self.pages:
            self.pages[page_id] = PageStat(page_id)
        self.links.setdefault(page_id, {})[oid] = size
        self.linked_page[oid] = page_id

    def record_unload(self, page_id: int, resident: Sequence[tuple[int, int]]) -> None:
        used = 0
        for oid, size in resident:
            stat = self.objects.get(oid)
            if stat is not None and stat.usage_indicator:
                used += size
        page = self.pages.get(page_id)
        if page is None:
            page = self.pages[page_id] = PageStat(page_id)
        page.usage_rate = used / self.page_capacity
        page.nb_load += 1

    def record_delete(self, oid: int) -> None:
        if self.objects.pop(oid, None) is None:
            return
        self._unlink(oid)

    def record_move(self, oid: int) -> None:
        stat = self.objects.get(oid)
        if stat is None:
            return
        stat.usage_indicator = False
        self._unlink(oid)

    def _unlink(self, oid: int) -> None:
        page_id = self.linked_page.pop(oid, None)
        if page_id is None:
            return
        members = self.links[page_id]
        del members[oid]
        if not members:
            # a page whose last object link disappears loses its statistics
            del self.links[page_id]
            self.pages.pop(page_id, None)

    # store listener protocol
    on_access = record_access
    on_unload = record_unload
    on_move = record_move
    on_delete = record_delete

    # -- queries ------------------------------------------------------------

    def candidate_pages(self, min_ur: float, min_lt: float) -> set[int]:
        return {p for p, s in self.pages.items() if s.usage_rate < min_ur and s.nb_load > min_lt}

    def objects_on(self, pages: Iterable[int]) -> set[int]:
        found: set[int] = set()
        for page_id in pages:
            found.update(self.links.get(page_id, ()))
        return found

    def frequency(self, oid: int) -> int:
        stat = self.objects.get(oid)
        return stat.access_frequency if stat else 0

    @property
    def mean_usage_rate(self) -> float:
        if not self.pages:
            return 0.0
        return sum(p.usage_rate for p in self.pages.values()) / len(self.pages)

    @property
    def pages_loaded(self) -> int:
        return sum(1 for p in self.pages.values() if p.nb_load > 0)

    # -- maintenance --------------------------------------------------------

    def purge(self, pages: Iterable[int] | None = None, objects: Iterable[int] = ()) -> None:
        """Drop statistics.

        ``pages=None`` clears everything. Otherwise the given pages lose their
        statistics together with the objects linked to them; ``objects`` names
        extra object records to drop (e.g. moved objects that are no longer
        linked anywhere).
        """
        if pages is None:
            self.objects.clear()
            self.pages.clear()
            self.links.clear()
            self.linked_page.clear()
            return
        doomed = set(objects)
        for page_id in pages:
            self.pages.pop(page_id, None)
            for oid in self.links.pop(page_id, {}):
                doomed.add(oid)
                del self.linked_page[oid]
        for oid in doomed:
            if oid in self.objects:
                self.record_delete(oid)

    def check_invariants(self) -> None:
        for page_id, members in self.links.items():
            assert members, f"empty link set for page {page_id}"
            assert page_id in self.pages, f"link into page {page_id} without PageStat"
            for oid in members:
                assert oid in self.objects, f"link for object {oid} without ObjectStat"
                assert self.linked_page[oid] == page_id
        assert sum(len(m) for m in self.links.values()) == len(self.linked_page)
        for stat in self.objects.values():
            assert stat.access_frequency >= 1
        for page in self.pages.values():
            assert 0.0 <= page.usage_rate <= 1.0

    def dump_csv(self) -> str:
        """Diagnostic dump: ``kind,id,field1,field2`` rows."""
        rows = ["kind,id,field1,field2"]
        for oid in sorted(self.objects):
            s = self.objects[oid]
            rows.append(f"object,{oid},{s.access_frequency},{int(s.usage_indicator)}")
        for page_id in sorted(self.pages):
            p = self.pages[page_id]
            rows.append(f"page,{page_id},{p.nb_load},{p.usage_rate!r}")
        for page_id in sorted(self.links):
            for oid, size in sorted(self.links[page_id].items()):
                rows.append(f"link,{page_id},{oid},{size}")
        return "\n".join(rows) + "\n"
