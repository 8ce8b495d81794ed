"""Labeled simple graphs on vertex set {1..n}.

Vertices are 1-based throughout.  A Graph stores one adjacency bitset per
vertex (bit w-1 of rows[v-1] is set iff {v,w} is an edge), which keeps
indicator queries O(1) and makes induced-embedding counting cheap via big-int
AND/popcount.  Graphs are immutable values: every operation returns a new
Graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .errors import CapabilityError

# Backtracking guard for induced-embedding counting: patterns above this size
# are rejected rather than silently taking exponential time.
DEFAULT_PATTERN_GUARD = 8


@dataclass(frozen=True)
class Graph:
    """Simple graph on vertices 1..n as adjacency bitset rows."""

    n: int
    rows: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"vertex count must be >= 1, got {self.n}")
        if len(self.rows) != self.n:
            raise ValueError("rows length must equal vertex count")
        full = (1 << self.n) - 1
        for v, row in enumerate(self.rows, start=1):
            if row & ~full:
                raise ValueError(f"row {v} has bits outside [1..{self.n}]")
            if row & (1 << (v - 1)):
                raise ValueError(f"self-loop at vertex {v}")

    def validate(self) -> "Graph":
        """Full invariant check (row symmetry); constructors keep it cheap."""
        for v in range(1, self.n + 1):
            for w in range(v + 1, self.n + 1):
                if bool(self.rows[v - 1] & (1 << (w - 1))) != bool(self.rows[w - 1] & (1 << (v - 1))):
                    raise ValueError(f"asymmetric adjacency at pair ({v},{w})")
        return self

    @staticmethod
    def from_edges(n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build from unordered pairs {i,j}; duplicates and bad pairs rejected."""
        rows = [0] * n
        seen = set()
        for i, j in edges:
            if not (1 <= i < j <= n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            rows[i - 1] |= 1 << (j - 1)
            rows[j - 1] |= 1 << (i - 1)
        return Graph(n, tuple(rows))

    @staticmethod
    def empty(n: int) -> "Graph":
        return Graph(n, (0,) * n)

    @staticmethod
    def single_vertex() -> "Graph":
        return Graph(1, (0,))

    @staticmethod
    def complete(n: int) -> "Graph":
        full = (1 << n) - 1
        return Graph(n, tuple(full ^ (1 << v) for v in range(n)))

    @property
    def edge_count(self) -> int:
        return sum(row.bit_count() for row in self.rows) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        """Edges as sorted (i, j) pairs with i < j."""
        for v in range(1, self.n + 1):
            row = self.rows[v - 1] >> v  # neighbors w > v
            w = v + 1
            while row:
                if row & 1:
                    yield (v, w)
                row >>= 1
                w += 1

    def has_edge(self, i: int, j: int) -> bool:
        if i == j or not (1 <= i <= self.n) or not (1 <= j <= self.n):
            return False
        return bool(self.rows[i - 1] & (1 << (j - 1)))

    def degree(self, v: int) -> int:
        if not (1 <= v <= self.n):
            raise ValueError(f"vertex {v} out of range")
        return self.rows[v - 1].bit_count()


@dataclass(frozen=True)
class Permutation:
    """Bijection of {1..n}, stored as the image tuple (image[v-1] = pi(v))."""

    n: int
    image: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.image) != self.n or sorted(self.image) != list(range(1, self.n + 1)):
            raise ValueError("image must be a bijection of 1..n")

    @staticmethod
    def identity(n: int) -> "Permutation":
        return Permutation(n, tuple(range(1, n + 1)))

    @staticmethod
    def random(n: int, rng) -> "Permutation":
        return Permutation(n, tuple(int(v) + 1 for v in rng.permutation(n)))

    def __call__(self, v: int) -> int:
        return self.image[v - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for v, w in enumerate(self.image, start=1):
            inv[w - 1] = v
        return Permutation(self.n, tuple(inv))


def induced_prefix(g: Graph, m: int) -> Graph:
    """Graph induced on {1..m}: keep exactly the edges with both ends <= m."""
    if not (1 <= m <= g.n):
        raise ValueError(f"prefix size {m} out of range for n={g.n}")
    mask = (1 << m) - 1
    return Graph(m, tuple(row & mask for row in g.rows[:m]))


def permute(g: Graph, pi: Permutation) -> Graph:
    """Relabel: edge {i,j} becomes {pi(i),pi(j)}."""
    if pi.n != g.n:
        raise ValueError(f"permutation size {pi.n} != graph size {g.n}")
    rows = [0] * g.n
    for v in range(1, g.n + 1):
        row = g.rows[v - 1]
        new_row = 0
        w = 1
        while row:
            if row & 1:
                new_row |= 1 << (pi(w) - 1)
            row >>= 1
            w += 1
        rows[pi(v) - 1] = new_row
    return Graph(g.n, tuple(rows))


def edge_indicator(g: Graph, i: int, j: int) -> int:
    """1 iff {i,j} is an edge; 0 when the pair is absent or j exceeds v(g)."""
    if not (1 <= i < j):
        raise ValueError(f"need 1 <= i < j, got ({i},{j})")
    if j > g.n:
        return 0
    return 1 if g.has_edge(i, j) else 0


def edges_into(g: Graph, j: int) -> int:
    """Number of edges {i,j} with i < j (at most j-1)."""
    if not (2 <= j <= g.n):
        raise ValueError(f"vertex {j} out of range [2..{g.n}]")
    return (g.rows[j - 1] & ((1 << (j - 1)) - 1)).bit_count()


def embedding_count(pattern: Graph, host: Graph, *, max_pattern: int = DEFAULT_PATTERN_GUARD) -> int:
    """Number of injective maps of pattern into host preserving edges AND non-edges.

    Exact depth-first count over partial injections; the candidate bitset for
    each next pattern vertex intersects the (non-)neighborhoods of every host
    vertex already placed, and the last level is counted by popcount instead
    of being enumerated.
    """
    if pattern.n > max_pattern:
        raise CapabilityError(f"pattern has {pattern.n} > {max_pattern} vertices")
    k, n = pattern.n, host.n
    if k > n:
        return 0
    full = (1 << n) - 1
    host_comp = tuple((full ^ row) & ~(1 << v) for v, row in enumerate(host.rows))
    placed = [0] * k  # host vertex (0-based) chosen for each pattern vertex

    def count_from(depth: int, used: int) -> int:
        cand = full & ~used
        prow = pattern.rows[depth]
        for d2 in range(depth):
            if prow & (1 << d2):
                cand &= host.rows[placed[d2]]
            else:
                cand &= host_comp[placed[d2]]
        if depth == k - 1:
            return cand.bit_count()
        total = 0
        while cand:
            bit = cand & -cand
            cand ^= bit
            placed[depth] = bit.bit_length() - 1
            total += count_from(depth + 1, used | bit)
        return total

    return count_from(0, 0)


def sampling_density_exact(pattern: Graph, host: Graph, *, max_pattern: int = DEFAULT_PATTERN_GUARD) -> Fraction:
    """Probability that a uniform ordered sample of v(pattern) distinct host
    vertices induces exactly the labeled pattern."""
    if pattern.n > host.n:
        raise ValueError(f"pattern on {pattern.n} vertices exceeds host on {host.n}")
    t = embedding_count(pattern, host, max_pattern=max_pattern)
    return Fraction(math.factorial(host.n - pattern.n), math.factorial(host.n)) * t


def sampling_density(pattern: Graph, host: Graph, *, max_pattern: int = DEFAULT_PATTERN_GUARD) -> float:
    return float(sampling_density_exact(pattern, host, max_pattern=max_pattern))


# -- text format: line 1 "n m", then m lines "i j" ---------------------------

def parse_graph_text(text: str) -> Graph:
    lines = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"header must be 'n m', got {lines[0]!r}")
    n, m = int(head[0]), int(head[1])
    if len(lines) - 1 != m:
        raise ValueError(f"header announces {m} edges, found {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"edge line must be 'i j', got {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph.from_edges(n, edges)


def format_graph_text(g: Graph) -> str:
    lines = [f"{g.n} {g.edge_count}"]
    lines.extend(f"{i} {j}" for i, j in g.edges())
    return "\n".join(lines) + "\n"
