# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: page-frame replacement and chain-link search.

Behaviour is identical to ``_kernels_py``; tests replay random traces
against both.
"""
from libc.math cimport fabs, fmax
from libc.stdlib cimport malloc, realloc, free

DEF NO_PAGE = -1


cdef class PageBuffer:
    cdef public int frames
    cdef public bint cluster_dating
    cdef long long _tick
    cdef int _n
    cdef long long* _page
    cdef long long* _last
    cdef long long* _cluster
    cdef long long* _cdate  # cluster date: max last use over the frame's resident cluster
    cdef char* _dirty

    def __cinit__(self, int frames, bint cluster_dating=False):
        if frames < 1:
            raise ValueError("frames must be >= 1")
        self.frames = frames
        self.cluster_dating = cluster_dating
        self._tick = 0
        self._n = 0
        self._page = <long long*>malloc(frames * sizeof(long long))
        self._last = <long long*>malloc(frames * sizeof(long long))
        self._cluster = <long long*>malloc(frames * sizeof(long long))
        self._cdate = <long long*>malloc(frames * sizeof(long long))
        self._dirty = <char*>malloc(frames * sizeof(char))
        if not (self._page and self._last and self._cluster and self._cdate and self._dirty):
            raise MemoryError()

    def __dealloc__(self):
        free(self._page)
        free(self._last)
        free(self._cluster)
        free(self._cdate)
        free(self._dirty)

    def __len__(self):
        return self._n

    def __contains__(self, long long page):
        return self._find(page) >= 0

    cdef int _find(self, long long page):
        cdef int i
        for i in range(self._n):
            if self._page[i] == page:
                return i
        return -1

    cdef int _choose(self):
        cdef int i, best = 0
        if not self.cluster_dating:
            for i in range(1, self._n):
                if self._last[i] < self._last[best]:
                    best = i
            return best
        for i in range(1, self._n):
            if self._cdate[i] < self._cdate[best] or (
                self._cdate[i] == self._cdate[best] and self._last[i] < self._last[best]
            ):
                best = i
        return best

    cdef void _stamp(self, long long cluster, long long tick):
        cdef int j
        for j in range(self._n):
            if self._cluster[j] == cluster:
                self._cdate[j] = tick

    cdef void _redate(self, long long cluster):
        cdef int j
        cdef long long date = 0
        for j in range(self._n):
            if self._cluster[j] == cluster and self._last[j] > date:
                date = self._last[j]
        self._stamp(cluster, date)

    cdef void _remove(self, int i):
        # keep slots packed; order is irrelevant because ranking uses ticks
        cdef long long cluster = self._cluster[i]
        cdef bint was_newest = self._last[i] == self._cdate[i]
        self._n -= 1
        if i != self._n:
            self._page[i] = self._page[self._n]
            self._last[i] = self._last[self._n]
            self._cluster[i] = self._cluster[self._n]
            self._cdate[i] = self._cdate[self._n]
            self._dirty[i] = self._dirty[self._n]
        if was_newest and self.cluster_dating:
            self._redate(cluster)

    def access(self, long long page, long long cluster):
        cdef int i
        cdef long long old
        cdef long long victim = NO_PAGE
        cdef bint victim_dirty = False
        self._tick += 1
        i = self._find(page)
        if i >= 0:
            self._last[i] = self._tick
            if self._cluster[i] != cluster:
                old = self._cluster[i]
                self._cluster[i] = cluster
                self._redate(old)
            self._stamp(cluster, self._tick)
            return True, NO_PAGE, False
        if self._n >= self.frames:
            i = self._choose()
            victim = self._page[i]
            victim_dirty = self._dirty[i]
            self._remove(i)
        i = self._n
        self._n += 1
        self._page[i] = page
        self._last[i] = self._tick
        self._cluster[i] = cluster
        self._dirty[i] = 0
        self._stamp(cluster, self._tick)
        return False, victim, victim_dirty

    def pop_victim(self):
        cdef int i
        cdef long long page
        cdef bint dirty
        if self._n == 0:
            return None
        i = self._choose()
        page = self._page[i]
        dirty = self._dirty[i]
        self._remove(i)
        return page, dirty

    def mark_dirty(self, long long page):
        cdef int i = self._find(page)
        if i < 0:
            return False
        self._dirty[i] = 1
        return True

    def mark_clean(self, long long page):
        cdef int i = self._find(page)
        if i >= 0:
            self._dirty[i] = 0

    def is_dirty(self, long long page):
        cdef int i = self._find(page)
        return i >= 0 and self._dirty[i] != 0

    def discard(self, long long page):
        cdef int i = self._find(page)
        if i < 0:
            return False
        self._remove(i)
        return True

    def resident(self):
        """Resident pages, least recently used first."""
        order = sorted(range(self._n), key=lambda k: self._last[k])
        return [self._page[k] for k in order]


cdef class ChainSearcher:
    cdef long long[:] offsets
    cdef long long[:] targets
    cdef double[:] freq
    cdef public double max_dr
    cdef long long* _seen
    cdef long long* _queue
    cdef long long _stamp
    cdef long long _nodes

    def __cinit__(self, offsets, targets, freq, double max_dr):
        import array
        self.offsets = array.array("q", offsets)
        self.targets = array.array("q", targets)
        self.freq = array.array("d", freq)
        self.max_dr = max_dr
        self._nodes = len(self.offsets) - 1
        self._stamp = 0
        self._seen = <long long*>malloc((self._nodes + 1) * sizeof(long long))
        self._queue = <long long*>malloc((self._nodes + 1) * sizeof(long long))
        if not (self._seen and self._queue):
            raise MemoryError()
        cdef long long i
        for i in range(self._nodes + 1):
            self._seen[i] = 0

    def __dealloc__(self):
        free(self._seen)
        free(self._queue)

    def search(self, members, Py_ssize_t first, int depth, const unsigned char[:] eligible):
        cdef Py_ssize_t pos, n = len(members)
        cdef long long m, v, w, k, head, tail, level_end
        cdef double fm, fw
        cdef int level
        for pos in range(first, n):
            m = members[pos]
            fm = self.freq[m]
            self._stamp += 1
            self._seen[m] = self._stamp
            # each node enters the queue at most once per stamp
            head = 0
            tail = 1
            self._queue[0] = m
            level = 0
            while level < depth and head < tail:
                level_end = tail
                while head < level_end:
                    v = self._queue[head]
                    head += 1
                    for k in range(self.offsets[v], self.offsets[v + 1]):
                        w = self.targets[k]
                        if self._seen[w] == self._stamp:
                            continue
                        self._seen[w] = self._stamp
                        if eligible[w]:
                            fw = self.freq[w]
                            if fabs(fm - fw) / fmax(fm, fw) <= self.max_dr:
                                return pos, w
                        self._queue[tail] = w
                        tail += 1
                level += 1
        return -1, -1
