"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` line for line in behaviour; the compiled module
is preferred when it is importable (see :mod:`clusterstore.kernels`).
"""
from __future__ import annotations

from collections import OrderedDict

NO_PAGE = -1


class PageBuffer:
    """Fixed pool of page frames with LRU or LRU-C replacement.

    With ``cluster_dating`` enabled a page's eviction rank is the most recent
    use of any resident page of the same cluster (LRU-C); ties inside a
    cluster fall back to plain page recency.
    """

    def __init__(self, frames: int, cluster_dating: bool = False):
        if frames < 1:
            raise ValueError("frames must be >= 1")
        self.frames = frames
        self.cluster_dating = cluster_dating
        self._tick = 0
        # page -> [last_use, cluster, dirty]; iteration order is LRU order
        self._entries: OrderedDict[int, list] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, page: int) -> bool:
        return page in self._entries

    def access(self, page: int, cluster: int):
        """Touch ``page``; returns ``(hit, victim, victim_dirty)``."""
        self._tick += 1
        entry = self._entries.get(page)
        if entry is not None:
            entry[0] = self._tick
            entry[1] = cluster
            self._entries.move_to_end(page)
            return True, NO_PAGE, False
        victim, victim_dirty = NO_PAGE, False
        if len(self._entries) >= self.frames:
            victim = self._choose_victim()
            victim_dirty = self._entries.pop(victim)[2]
        self._entries[page] = [self._tick, cluster, False]
        return False, victim, victim_dirty

    def _choose_victim(self) -> int:
        if not self.cluster_dating:
            return next(iter(self._entries))
        dates: dict[int, int] = {}
        for last_use, cluster, _ in self._entries.values():
            if last_use > dates.get(cluster, -1):
                dates[cluster] = last_use
        oldest = min(dates, key=dates.__getitem__)
        # entries iterate oldest first, so the first match is the cluster's LRU page
        for page, (_, cluster, _) in self._entries.items():
            if cluster == oldest:
                return page
        raise AssertionError("unreachable")

    def pop_victim(self):
        """Evict one page in policy order; ``None`` when empty."""
        if not self._entries:
            return None
        victim = self._choose_victim()
        return victim, self._entries.pop(victim)[2]

    def mark_dirty(self, page: int) -> bool:
        entry = self._entries.get(page)
        if entry is None:
            return False
        entry[2] = True
        return True

    def mark_clean(self, page: int) -> None:
        entry = self._entries.get(page)
        if entry is not None:
            entry[2] = False

    def is_dirty(self, page: int) -> bool:
        entry = self._entries.get(page)
        return entry is not None and entry[2]

    def discard(self, page: int) -> bool:
        return self._entries.pop(page, None) is not None

    def resident(self) -> list[int]:
        return list(self._entries)


class ChainSearcher:
    """Bounded breadth-first search for the next object to link to a chain.

    The reference graph is given in CSR form over dense node indices
    (``offsets``/``targets``); ``freq`` holds access frequencies (0 for
    untracked nodes). ``search`` scans chain members from ``first`` onward
    and returns ``(member_pos, node)`` for the first eligible node reachable
    within ``depth`` hops whose dissimilarity to that member is within
    ``max_dr``, or ``(-1, -1)``.
    """

    def __init__(self, offsets, targets, freq, max_dr: float):
        self.offsets = list(offsets)
        self.targets = list(targets)
        self.freq = list(freq)
        self.max_dr = max_dr
        self._seen = [0] * (len(self.offsets) - 1)
        self._stamp = 0

    def search(self, members, first: int, depth: int, eligible):
        offsets, targets, freq, seen = self.offsets, self.targets, self.freq, self._seen
        max_dr = self.max_dr
        for pos in range(first, len(members)):
            m = members[pos]
            fm = freq[m]
            self._stamp += 1
            stamp = self._stamp
            seen[m] = stamp
            frontier = [m]
            for _ in range(depth):
                nxt = []
                for v in frontier:
                    for k in range(offsets[v], offsets[v + 1]):
                        w = targets[k]
                        if seen[w] == stamp:
                            continue
                        seen[w] = stamp
                        if eligible[w]:
                            fw = freq[w]
                            if abs(fm - fw) / max(fm, fw) <= max_dr:
                                return pos, w
                        nxt.append(w)
                if not nxt:
                    break
                frontier = nxt
        return -1, -1
