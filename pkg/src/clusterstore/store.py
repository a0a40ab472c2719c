"""Simulated paged object store with a bounded page buffer and I/O counters."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from . import kernels

DEFAULT_PAGE_CAPACITY = 4096
BASE_EXTENT = 0
NO_PAGE = -1
POLICIES = ("LRU", "LRU-C")


class StoreError(Exception):
    pass


class ConfigurationError(StoreError, ValueError):
    pass


class OversizeObjectError(StoreError, ValueError):
    pass


class ObjectNotFound(StoreError, KeyError):
    pass


class ProposalError(StoreError, ValueError):
    pass


class DanglingReferenceError(StoreError, ValueError):
    pass


class SnapshotError(StoreError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class StoredObject:
    oid: int
    class_id: int
    size: int
    refs: tuple[int, ...] = ()


@dataclass
class Page:
    page_id: int
    capacity: int
    slots: list[int] = field(default_factory=list)
    used_bytes: int = 0

    @property
    def free_bytes(self) -> int:
        return self.capacity - self.used_bytes


@dataclass
class IoCounters:
    page_reads: int = 0
    page_writes: int = 0

    @property
    def total(self) -> int:
        return self.page_reads + self.page_writes

    def copy(self) -> "IoCounters":
        return IoCounters(self.page_reads, self.page_writes)

    def __sub__(self, other: "IoCounters") -> "IoCounters":
        return IoCounters(self.page_reads - other.page_reads, self.page_writes - other.page_writes)

    def __add__(self, other: "IoCounters") -> "IoCounters":
        return IoCounters(self.page_reads + other.page_reads, self.page_writes + other.page_writes)


@dataclass
class RelocationReport:
    moved: set[int] = field(default_factory=set)
    touched_pages: set[int] = field(default_factory=set)
    source_pages: set[int] = field(default_factory=set)
    destination_pages: list[int] = field(default_factory=list)
    io: IoCounters = field(default_factory=IoCounters)
    cluster_id: int | None = None

    def merge(self, other: "RelocationReport") -> None:
        self.moved |= other.moved
        self.touched_pages |= other.touched_pages
        self.source_pages |= other.source_pages
        self.destination_pages.extend(other.destination_pages)
        self.io = self.io + other.io


class StoreListener(Protocol):
    def on_access(self, oid: int, page_id: int, size: int) -> None: ...
    def on_unload(self, page_id: int, resident: Sequence[tuple[int, int]]) -> None: ...
    def on_move(self, oid: int) -> None: ...
    def on_delete(self, oid: int) -> None: ...


class ObjectStore:
    """Objects placed on fixed-capacity pages, read through a page buffer.

    Pages belong to extents: insertion pages form the base extent and every
    :meth:`rewrite_placement` allocates a fresh extent that is registered as
    a cluster. LRU-C dating and cluster prefetch work on those extents;
    base-extent pages behave as singleton clusters.
    """

    def __init__(
        self,
        page_capacity: int = DEFAULT_PAGE_CAPACITY,
        buffer_frames: int = 8,
        policy: str = "LRU",
        cluster_prefetch: bool = False,
        backend: str | None = None,
    ):
        if not isinstance(page_capacity, int) or page_capacity <= 0:
            raise ConfigurationError(f"page_capacity must be a positive integer, got {page_capacity!r}")
        if not isinstance(buffer_frames, int) or buffer_frames < 1:
            raise ConfigurationError(f"buffer_frames must be >= 1, got {buffer_frames!r}")
        if policy not in POLICIES:
            raise ConfigurationError(f"unknown replacement policy {policy!r}")
        self.page_capacity = page_capacity
        self.buffer_frames = buffer_frames
        self.policy = policy
        self.cluster_prefetch = bool(cluster_prefetch)
        self.backend = backend
        self.objects: dict[int, StoredObject] = {}
        self.pages: dict[int, Page] = {}
        self.placement: dict[int, tuple[int, int]] = {}
        self.page_extent: dict[int, int] = {}
        self.extents: dict[int, list[int]] = {BASE_EXTENT: []}
        self.next_oid = 1
        self.next_page = 1
        self.next_extent = 1
        self._tail_page: int | None = None
        self.io = IoCounters()
        self.listeners: list[StoreListener] = []
        self.buffer = kernels.get_backend(backend).PageBuffer(buffer_frames, policy == "LRU-C")

    # -- construction -----------------------------------------------------

    def add_listener(self, listener: StoreListener) -> None:
        self.listeners.append(listener)

    def remove_listener(self, listener: StoreListener) -> None:
        self.listeners.remove(listener)

    def _new_page(self, extent: int) -> Page:
        page = Page(self.next_page, self.page_capacity)
        self.next_page += 1
        self.pages[page.page_id] = page
        self.page_extent[page.page_id] = extent
        self.extents[extent].append(page.page_id)
        return page

    def insert_object(self, class_id: int, size: int, refs: Iterable[int] = ()) -> int:
        """Append a new object to the insertion tail page (or a new page)."""
        if size <= 0:
            raise ConfigurationError(f"object size must be positive, got {size}")
        if size > self.page_capacity:
            raise OversizeObjectError(f"object of {size} B exceeds page capacity {self.page_capacity} B")
        tail = self.pages.get(self._tail_page) if self._tail_page is not None else None
        if tail is None or tail.free_bytes < size:
            tail = self._new_page(BASE_EXTENT)
            self._tail_page = tail.page_id
        oid = self.next_oid
        self.next_oid += 1
        self.objects[oid] = StoredObject(oid, class_id, size, tuple(refs))
        self.placement[oid] = (tail.page_id, len(tail.slots))
        tail.slots.append(oid)
        tail.used_bytes += size
        self.buffer.mark_dirty(tail.page_id)
        return oid

    def set_refs(self, oid: int, refs: Iterable[int]) -> None:
        self._get(oid).refs = tuple(refs)

    def delete_object(self, oid: int) -> None:
        self._get(oid)
        referrers = [o.oid for o in self.objects.values() if oid in o.refs and o.oid != oid]
        if referrers:
            raise DanglingReferenceError(f"object {oid} is still referenced by {referrers[:5]}")
        page_id = self._detach(oid)
        del self.objects[oid]
        if page_id in self.pages:
            self.buffer.mark_dirty(page_id)
        for listener in self.listeners:
            listener.on_delete(oid)

    def _get(self, oid: int) -> StoredObject:
        try:
            return self.objects[oid]
        except KeyError:
            raise ObjectNotFound(oid) from None

    def _detach(self, oid: int) -> int:
        """Remove ``oid`` from its page, compacting slots; frees empty pages."""
        page_id, slot = self.placement.pop(oid)
        page = self.pages[page_id]
        del page.slots[slot]
        page.used_bytes -= self.objects[oid].size
        for s in range(slot, len(page.slots)):
            self.placement[page.slots[s]] = (page_id, s)
        if not page.slots:
            self._free_page(page_id)
        return page_id

    def _free_page(self, page_id: int) -> None:
        del self.pages[page_id]
        extent = self.page_extent.pop(page_id)
        self.extents[extent].remove(page_id)
        if extent != BASE_EXTENT and not self.extents[extent]:
            del self.extents[extent]
        self.buffer.discard(page_id)
        if self._tail_page == page_id:
            self._tail_page = None

    # -- buffer -----------------------------------------------------------

    def cluster_of(self, page_id: int) -> int:
        """Cluster key for buffer dating; unclustered pages are singletons."""
        extent = self.page_extent[page_id]
        return extent if extent != BASE_EXTENT else -page_id

    def is_resident(self, page_id: int) -> bool:
        return page_id in self.buffer

    def _fetch(self, page_id: int) -> bool:
        hit, victim, victim_dirty = self.buffer.access(page_id, self.cluster_of(page_id))
        if victim != NO_PAGE:
            self._after_evict(victim, victim_dirty)
        if not hit:
            self.io.page_reads += 1
        return hit

    def _after_evict(self, page_id: int, dirty: bool) -> None:
        if dirty:
            self.io.page_writes += 1
        page = self.pages.get(page_id)
        if page is not None and self.listeners:
            resident = [(oid, self.objects[oid].size) for oid in page.slots]
            for listener in self.listeners:
                listener.on_unload(page_id, resident)

    def access_object(self, oid: int, write: bool = False) -> StoredObject:
        """Read (or update, with ``write``) an object through the buffer."""
        obj = self.objects.get(oid)
        if obj is None:
            raise ObjectNotFound(oid)
        page_id = self.placement[oid][0]
        hit = self._fetch(page_id)
        if not hit and self.cluster_prefetch:
            extent = self.page_extent[page_id]
            if extent != BASE_EXTENT:
                budget = self.buffer_frames - 1
                for other in self.extents[extent]:
                    if budget <= 0:
                        break
                    if other != page_id:
                        self._fetch(other)
                        budget -= 1
        if write:
            self.buffer.mark_dirty(page_id)
        for listener in self.listeners:
            listener.on_access(oid, page_id, obj.size)
        return obj

    def evict_page(self) -> int | None:
        """Evict one page in policy order; ``None`` if the buffer is empty."""
        popped = self.buffer.pop_victim()
        if popped is None:
            return None
        page_id, dirty = popped
        self._after_evict(page_id, dirty)
        return page_id

    def flush(self) -> list[int]:
        evicted = []
        while True:
            page_id = self.evict_page()
            if page_id is None:
                return evicted
            evicted.append(page_id)

    # -- accounting -------------------------------------------------------

    def io_report(self) -> IoCounters:
        return self.io.copy()

    def reset_io(self) -> None:
        self.io = IoCounters()

    def charge_io(self, reads: int = 0, writes: int = 0) -> None:
        """Account I/O done outside the object path (e.g. engine metadata)."""
        self.io.page_reads += reads
        self.io.page_writes += writes

    # -- layout queries ---------------------------------------------------

    def page_of(self, oid: int) -> int:
        try:
            return self.placement[oid][0]
        except KeyError:
            raise ObjectNotFound(oid) from None

    def adjacent(self, before: int, after: int) -> bool:
        """True if ``before`` is stored immediately ahead of ``after`` on disk."""
        p_after, s_after = self.placement[after]
        p_before, s_before = self.placement[before]
        if p_before == p_after:
            return s_before == s_after - 1
        if s_after != 0:
            return False
        extent = self.page_extent[p_after]
        if self.page_extent[p_before] != extent:
            return False
        pages = self.extents[extent]
        i = pages.index(p_after)
        return i > 0 and pages[i - 1] == p_before and s_before == len(self.pages[p_before].slots) - 1

    def is_contiguous(self, oids: Sequence[int]) -> bool:
        return all(self.adjacent(a, b) for a, b in zip(oids, oids[1:]))

    def total_bytes(self) -> int:
        return sum(obj.size for obj in self.objects.values())

    # -- reorganization ---------------------------------------------------

    def rewrite_placement(self, ordered_oids: Sequence[int]) -> RelocationReport:
        """Move ``ordered_oids`` into a fresh extent, in order.

        The extent is registered as one cluster. Source pages are compacted;
        pages left empty are released. I/O: one read per non-resident source
        page, one write per modified source page and per destination page.
        """
        ordered = list(ordered_oids)
        if len(set(ordered)) != len(ordered):
            raise ProposalError("duplicate object in relocation sequence")
        for oid in ordered:
            if oid not in self.objects:
                raise ObjectNotFound(oid)
        report = RelocationReport()
        if not ordered or self.is_contiguous(ordered):
            return report

        sources = sorted({self.placement[oid][0] for oid in ordered})
        for page_id in sources:
            if not self.is_resident(page_id):
                report.io.page_reads += 1
        for oid in ordered:
            self._detach(oid)
        for page_id in sources:
            report.io.page_writes += 1
            if page_id in self.pages:
                # written through during reorganization
                self.buffer.mark_clean(page_id)

        extent = self.next_extent
        self.next_extent += 1
        self.extents[extent] = []
        page = self._new_page(extent)
        dests = [page.page_id]
        for oid in ordered:
            size = self.objects[oid].size
            if page.free_bytes < size:
                page = self._new_page(extent)
                dests.append(page.page_id)
            self.placement[oid] = (page.page_id, len(page.slots))
            page.slots.append(oid)
            page.used_bytes += size
        report.io.page_writes += len(dests)

        self.io = self.io + report.io
        report.moved = set(ordered)
        report.source_pages = set(sources)
        report.destination_pages = dests
        report.touched_pages = set(sources) | set(dests)
        report.cluster_id = extent
        for oid in ordered:
            for listener in self.listeners:
                listener.on_move(oid)
        return report

    # -- consistency --------------------------------------------------------

    def check_invariants(self) -> None:
        seen = set()
        for page_id, page in self.pages.items():
            assert page.slots, f"empty page {page_id} retained"
            assert page.used_bytes <= page.capacity
            assert page.used_bytes == sum(self.objects[o].size for o in page.slots)
            for slot, oid in enumerate(page.slots):
                assert oid not in seen, f"object {oid} on two pages"
                seen.add(oid)
                assert self.placement[oid] == (page_id, slot)
        assert seen == set(self.objects) == set(self.placement)
        for oid, obj in self.objects.items():
            for ref in obj.refs:
                assert ref in self.objects, f"dangling reference {oid}->{ref}"
        assert len(self.buffer) <= self.buffer_frames

    # -- snapshot -----------------------------------------------------------

    def dumps(self) -> str:
        out = io.StringIO()
        out.write(
            f"CSTORE v1 page_capacity={self.page_capacity} "
            f"next_oid={self.next_oid} next_page={self.next_page}\n"
        )
        for page_id in sorted(self.pages):
            for slot, oid in enumerate(self.pages[page_id].slots):
                obj = self.objects[oid]
                refs = ",".join(str(r) for r in obj.refs)
                out.write(f"O {oid} {obj.class_id} {obj.size} {page_id} {slot} [{refs}]\n")
        for extent in sorted(self.extents):
            if extent != BASE_EXTENT:
                pages = ",".join(str(p) for p in self.extents[extent])
                out.write(f"E {extent} [{pages}]\n")
        out.write(f"END {len(self.objects)}\n")
        return out.getvalue()

    def snapshot(self, destination: str | os.PathLike) -> None:
        with open(destination, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str, **store_kwargs) -> "ObjectStore":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        elif lines:
            raise SnapshotError("missing trailing newline (truncated file?)", len(lines))
        if not lines:
            raise SnapshotError("empty file", 1)
        header = _parse_header(lines[0])
        store = cls(page_capacity=header["page_capacity"], **store_kwargs)
        rows: list[tuple[int, int, int, int, int, tuple[int, ...]]] = []
        extents: list[tuple[int, list[int]]] = []
        trailer = lines.pop()
        if len(lines) < 1 or not trailer.startswith("END "):
            raise SnapshotError("missing END trailer (truncated file?)", len(lines) + 1)
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(" ")
            try:
                if parts[0] == "O" and len(parts) == 7:
                    oid, class_id, size, page_id, slot = (int(x) for x in parts[1:6])
                    rows.append((oid, class_id, size, page_id, slot, _parse_list(parts[6])))
                elif parts[0] == "E" and len(parts) == 3:
                    extents.append((int(parts[1]), list(_parse_list(parts[2]))))
                else:
                    raise ValueError(f"unrecognized record {line!r}")
            except ValueError as exc:
                raise SnapshotError(str(exc), lineno) from None
        if trailer != f"END {len(rows)}":
            raise SnapshotError(f"trailer {trailer!r} does not match {len(rows)} object records", len(lines) + 1)
        try:
            store._rebuild(rows, extents, header)
        except (AssertionError, KeyError, ValueError, StoreError) as exc:
            raise SnapshotError(f"inconsistent snapshot: {exc}") from None
        return store

    @classmethod
    def restore(cls, source: str | os.PathLike, **store_kwargs) -> "ObjectStore":
        with open(source, encoding="ascii") as fh:
            return cls.loads(fh.read(), **store_kwargs)

    def _rebuild(self, rows, extents, header) -> None:
        page_extent = {}
        for extent, pages in extents:
            if extent == BASE_EXTENT or extent in self.extents:
                raise ValueError(f"bad extent id {extent}")
            self.extents[extent] = pages
            for p in pages:
                page_extent[p] = extent
        for oid, class_id, size, page_id, slot, refs in rows:
            if oid in self.objects:
                raise ValueError(f"duplicate object {oid}")
            if not 0 < size <= self.page_capacity:
                raise ValueError(f"bad size for object {oid}")
            self.objects[oid] = StoredObject(oid, class_id, size, refs)
            page = self.pages.get(page_id)
            if page is None:
                page = self.pages[page_id] = Page(page_id, self.page_capacity)
                extent = page_extent.get(page_id, BASE_EXTENT)
                self.page_extent[page_id] = extent
                if extent == BASE_EXTENT:
                    self.extents[BASE_EXTENT].append(page_id)
            if slot != len(page.slots):
                raise ValueError(f"object {oid} out of slot order")
            page.slots.append(oid)
            page.used_bytes += size
            self.placement[oid] = (page_id, slot)
        for extent, pages in extents:
            for p in pages:
                if p not in self.pages:
                    raise ValueError(f"extent {extent} lists unknown page {p}")
        self.extents[BASE_EXTENT].sort()
        self.next_oid = max(header.get("next_oid", 1), max(self.objects, default=0) + 1)
        self.next_page = max(header.get("next_page", 1), max(self.pages, default=0) + 1)
        self.next_extent = max(self.extents) + 1
        base = self.extents[BASE_EXTENT]
        self._tail_page = base[-1] if base else None
        self.check_invariants()


def _parse_header(line: str) -> dict[str, int]:
    parts = line.split(" ")
    if parts[:2] != ["CSTORE", "v1"] or len(parts) < 3:
        raise SnapshotError("expected header 'CSTORE v1 page_capacity=<n>'", 1)
    fields = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep or not value.isdigit():
            raise SnapshotError(f"bad header field {item!r}", 1)
        fields[key] = int(value)
    if fields.get("page_capacity", 0) <= 0:
        raise SnapshotError("missing or invalid page_capacity", 1)
    return fields


def _parse_list(field_text: str) -> tuple[int, ...]:
    if not (field_text.startswith("[") and field_text.endswith("]")):
        raise ValueError(f"expected [..] list, got {field_text!r}")
    body = field_text[1:-1]
    return tuple(int(x) for x in body.split(",")) if body else ()


def io_report_csv(windows: Iterable[tuple[str, IoCounters]]) -> str:
    lines = ["window,page_reads,page_writes"]
    lines += [f"{name},{c.page_reads},{c.page_writes}" for name, c in windows]
    return "\n".join(lines) + "\n"
