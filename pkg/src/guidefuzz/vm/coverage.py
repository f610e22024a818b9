"""AFL-style edge coverage with hit-count buckets."""
from __future__ import annotations

# inclusive lower bounds of buckets 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+
BUCKET_FLOORS = (1, 2, 3, 4, 8, 16, 32, 128)


def bucket(count: int) -> int:
    """Bucket index 0..7 for a positive hit count."""
    if count < 1:
        raise ValueError("hit count must be positive")
    if count < 4:
        return count - 1
    if count < 8:
        return 3
    if count < 16:
        return 4
    if count < 32:
        return 5
    if count < 128:
        return 6
    return 7


class CoverageMap:
    """Global edge -> bitmask of buckets seen so far.

    Masks only ever gain bits, so each edge's value is non-decreasing.
    """

    def __init__(self):
        self.seen: dict = {}

    def __len__(self):
        return len(self.seen)

    def __contains__(self, edge):
        return edge in self.seen

    def update(self, edges: dict) -> bool:
        """Record a result's edges; True if any edge or bucket is new."""
        seen = self.seen
        novel = False
        for edge, count in edges.items():
            bit = 1 << bucket(count)
            old = seen.get(edge, 0)
            if not old & bit:
                seen[edge] = old | bit
                novel = True
        return novel

    def merge(self, other: "CoverageMap") -> bool:
        novel = False
        for edge, mask in other.seen.items():
            old = self.seen.get(edge, 0)
            if mask & ~old:
                self.seen[edge] = old | mask
                novel = True
        return novel

    def blocks(self) -> set:
        return {b for _, b in self.seen}

    def copy(self) -> "CoverageMap":
        m = CoverageMap()
        m.seen = dict(self.seen)
        return m


def is_interesting(cov: CoverageMap, result) -> tuple:
    """Decide novelty and fold the result into ``cov`` in one step."""
    return cov.update(result.edges), cov
