"""Binary trees, tree ends, and silhouette functionals.

Trees are prefix-stable sets of 0/1 words (the root is the empty word).  An
end is an infinite 0/1 path, represented as a finite prefix plus a repeating
tail bit, which is enough for every functional here: the dyadic measure gives
the set of remaining ends measure zero.

The module also houses the split-table model of the tree chain's limit (one
independent uniform split per word), the mass functionals of the silhouette,
the KL-divergence identity at dyadic resolution, and the records-count
distribution that the silhouette follows along any fixed end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import CapabilityError

Word = tuple[int, ...]

RECORDS_CAP = 500
SPLIT_DEPTH_GUARD = 24


def _check_word(word: Iterable[int]) -> Word:
    w = tuple(word)
    if any(b not in (0, 1) for b in w):
        raise ValueError(f"word bits must be 0/1, got {w}")
    return w


def word_index(word: Word) -> int:
    """Index of a word within its level, MSB first."""
    idx = 0
    for b in word:
        idx = (idx << 1) | b
    return idx


# ---------------------------------------------------------------------------
# Ends
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class End:
    """Infinite 0/1 sequence: finite prefix then a constant tail bit.

    The representation is canonical (trailing prefix bits equal to the tail
    are stripped), so equality of End values is equality of bit sequences.
    """

    prefix: Word
    tail: int

    def __post_init__(self) -> None:
        if self.tail not in (0, 1):
            raise ValueError("tail bit must be 0 or 1")
        p = _check_word(self.prefix)
        while p and p[-1] == self.tail:
            p = p[:-1]
        object.__setattr__(self, "prefix", p)

    @staticmethod
    def zeros() -> "End":
        return End((), 0)

    @staticmethod
    def ones() -> "End":
        return End((), 1)

    @staticmethod
    def from_word(word: Iterable[int], tail: int = 0) -> "End":
        return End(_check_word(word), tail)

    def bit(self, k: int) -> int:
        """Bit at 1-based position k."""
        if k < 1:
            raise ValueError("positions are 1-based")
        return self.prefix[k - 1] if k <= len(self.prefix) else self.tail

    def one_positions(self) -> tuple[int, ...] | None:
        """Positions of 1-bits; None when infinite (tail bit 1)."""
        if self.tail == 1:
            return None
        return tuple(k for k, b in enumerate(self.prefix, start=1) if b == 1)


def end_distance(u: End, v: End) -> float:
    """Ultrametric 2^(1-l) with l the first differing position; 0 if equal."""
    if u == v:
        return 0.0
    horizon = max(len(u.prefix), len(v.prefix)) + 1
    for k in range(1, horizon + 1):
        if u.bit(k) != v.bit(k):
            return 2.0 ** (-k + 1)
    raise AssertionError("distinct canonical ends must differ within the horizon")


def end_to_unit(u: End) -> float:
    """Map an end to [0,1]: 1/2 + sum (2 u_k - 1) / 2^(k+1)."""
    p = len(u.prefix)
    val = 0.5
    for k, b in enumerate(u.prefix, start=1):
        val += (2 * b - 1) / 2.0 ** (k + 1)
    val += (2 * u.tail - 1) / 2.0 ** (p + 1)
    return val


def end_grid(depth: int) -> list[End]:
    """The 2^depth ends extending each depth-`depth` word by zeros, in
    left-to-right order (increasing end_to_unit)."""
    if depth < 1:
        raise ValueError("grid depth must be >= 1")
    ends = []
    for idx in range(1 << depth):
        bits = tuple((idx >> (depth - 1 - k)) & 1 for k in range(depth))
        ends.append(End.from_word(bits, tail=0))
    return ends


# ---------------------------------------------------------------------------
# Binary trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinaryTree:
    """Prefix-stable finite set of words; always contains the root."""

    words: frozenset[Word]

    def __post_init__(self) -> None:
        if () not in self.words:
            raise ValueError("tree must contain the root word")
        for w in self.words:
            _check_word(w)
            if w and w[:-1] not in self.words:
                raise ValueError(f"word {w} lacks its parent")

    @staticmethod
    def root() -> "BinaryTree":
        return BinaryTree(frozenset({()}))

    @staticmethod
    def from_words(words: Iterable[Iterable[int]]) -> "BinaryTree":
        return BinaryTree(frozenset(_check_word(w) for w in words))

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def height(self) -> int:
        return max(len(w) for w in self.words)

    def __contains__(self, word: Word) -> bool:
        return tuple(word) in self.words

    def external_nodes(self) -> list[Word]:
        """Words just outside the tree (parent inside), in sorted order."""
        ext = set()
        for w in self.words:
            for b in (0, 1):
                child = w + (b,)
                if child not in self.words:
                    ext.add(child)
        return sorted(ext)

    def fringe_count(self, u: Word) -> int:
        """Number of tree words having u as a prefix (0 when u is outside)."""
        u = tuple(u)
        k = len(u)
        return sum(1 for w in self.words if len(w) >= k and w[:k] == u)

    def add(self, word: Iterable[int]) -> "BinaryTree":
        w = _check_word(word)
        if w in self.words:
            raise ValueError(f"word {w} already present")
        if w[:-1] not in self.words:
            raise ValueError(f"word {w} is not external (parent missing)")
        return BinaryTree(self.words | {w})


def exit_depth(tree: BinaryTree, u: End) -> int:
    """First depth k at which the end's length-k prefix leaves the tree."""
    k = 1
    while tuple(u.bit(i) for i in range(1, k + 1)) in tree.words:
        k += 1
    return k


def silhouette_mass_exact(tree: BinaryTree) -> Fraction:
    """Sum of 2^(-|u|) over tree words, as an exact rational."""
    return sum((Fraction(1, 2 ** len(w)) for w in tree.words), Fraction(0))


def silhouette_mass(tree: BinaryTree, *, check: bool = True, tol: float = 1e-12) -> float:
    """Dyadic integral of the exit-depth function.

    Evaluated two ways (sum of 2^-|u| over tree words; sum of |u| 2^-|u| over
    external words); with check=True the two are required to agree to `tol`.
    """
    internal = math.fsum(2.0 ** (-len(w)) for w in tree.words)
    if check:
        external = math.fsum(len(w) * 2.0 ** (-len(w)) for w in tree.external_nodes())
        if abs(internal - external) > tol:
            raise AssertionError(
                f"mass identity violated: {internal!r} vs {external!r}"
            )
    return internal


# ---------------------------------------------------------------------------
# Harmonic numbers
# ---------------------------------------------------------------------------

_EULER_GAMMA = 0.5772156649015328606
_HARMONIC_EXACT_CAP = 10_000
_harmonic_cache: list[Fraction] = [Fraction(0)]


def harmonic_number(n: int):
    """n-th harmonic number: exact Fraction for n <= 10^4, float beyond."""
    if n < 0:
        raise ValueError("harmonic_number needs n >= 0")
    if n > _HARMONIC_EXACT_CAP:
        return math.log(n) + _EULER_GAMMA + 1 / (2 * n) - 1 / (12 * n * n)
    while len(_harmonic_cache) <= n:
        k = len(_harmonic_cache)
        _harmonic_cache.append(_harmonic_cache[-1] + Fraction(1, k))
    return _harmonic_cache[n]


def harmonic_float(n: int) -> float:
    if n <= _HARMONIC_EXACT_CAP:
        return float(harmonic_number(n))
    return harmonic_number(n)


# ---------------------------------------------------------------------------
# Labeled search trees
# ---------------------------------------------------------------------------

class LabeledTree:
    """Search tree storing one real key per word (immutable by convention)."""

    __slots__ = ("labels",)

    def __init__(self, labels: dict[Word, float] | None = None):
        self.labels = dict(labels) if labels else {}

    @property
    def size(self) -> int:
        return len(self.labels)

    def shape(self) -> BinaryTree:
        if not self.labels:
            raise ValueError("empty labeled tree has no shape")
        return BinaryTree(frozenset(self.labels))

    def insert(self, key: float) -> "LabeledTree":
        """Insert at the first empty node on the search path (left if smaller)."""
        cur: Word = ()
        labels = self.labels
        while cur in labels:
            stored = labels[cur]
            if key == stored:
                raise ValueError(f"duplicate key {key!r}")
            cur = cur + ((0,) if key < stored else (1,))
        new = dict(labels)
        new[cur] = key
        return LabeledTree(new)


def bst_insert_key(tree: LabeledTree, key: float) -> LabeledTree:
    return tree.insert(key)


def bst_from_keys(keys: Iterable[float]) -> LabeledTree:
    t = LabeledTree()
    for k in keys:
        t = t.insert(k)
    return t


# ---------------------------------------------------------------------------
# Split tables: the tree chain's limit object
# ---------------------------------------------------------------------------

def split_contribution(t: float) -> float:
    """Centered contribution of one split: 1 + (log t + log(1-t))/2.

    Zero mean under a uniform split; symmetric about 1/2 with maximum
    1 - log 2 there.
    """
    if not 0.0 < t < 1.0:
        raise ValueError(f"split value must lie in (0,1), got {t}")
    return 1.0 + 0.5 * (math.log(t) + math.log(1.0 - t))


class SplitTable:
    """Split fractions xi_u for every word u with |u| < depth.

    Level l holds 2^l values indexed by word_index; all values are strictly
    inside (0,1).  The table determines a probability measure on ends whose
    cylinder masses are products of splits.
    """

    __slots__ = ("depth", "levels", "_c_levels", "_c_prefix")

    def __init__(self, levels: Iterable[np.ndarray]):
        levels = tuple(np.asarray(lv, dtype=float) for lv in levels)
        if not levels:
            raise ValueError("split table needs depth >= 1")
        for l, lv in enumerate(levels):
            if lv.shape != (1 << l,):
                raise ValueError(f"level {l} must have {1 << l} entries")
            if not (np.all(lv > 0.0) and np.all(lv < 1.0)):
                raise ValueError(f"level {l} has values outside (0,1)")
        self.depth = len(levels)
        self.levels = levels
        self._c_levels: tuple[np.ndarray, ...] | None = None
        self._c_prefix: tuple[np.ndarray, ...] | None = None

    @staticmethod
    def constant(depth: int, value: float = 0.5) -> "SplitTable":
        return SplitTable([np.full(1 << l, value) for l in range(depth)])

    @staticmethod
    def from_mapping(depth: int, mapping: dict[Word, float]) -> "SplitTable":
        levels = [np.full(1 << l, np.nan) for l in range(depth)]
        for w, v in mapping.items():
            w = _check_word(w)
            if len(w) >= depth:
                raise ValueError(f"word {w} too deep for depth {depth}")
            levels[len(w)][word_index(w)] = v
        for l, lv in enumerate(levels):
            if np.any(np.isnan(lv)):
                raise ValueError(f"level {l} incomplete")
        return SplitTable(levels)

    def xi(self, word: Iterable[int]) -> float:
        w = _check_word(word)
        if len(w) >= self.depth:
            raise ValueError(f"word {w} at or beyond table depth {self.depth}")
        return float(self.levels[len(w)][word_index(w)])

    def items(self) -> Iterator[tuple[Word, float]]:
        for l, lv in enumerate(self.levels):
            for idx in range(1 << l):
                bits = tuple((idx >> (l - 1 - k)) & 1 for k in range(l))
                yield bits, float(lv[idx])

    # cached per-level split_contribution values and their prefix sums
    def _contributions(self) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
        if self._c_levels is None:
            cl = tuple(1.0 + 0.5 * (np.log(lv) + np.log1p(-lv)) for lv in self.levels)
            self._c_levels = cl
            self._c_prefix = tuple(np.concatenate(([0.0], np.cumsum(c))) for c in cl)
        return self._c_levels, self._c_prefix


def sample_split_table(depth: int, rng) -> SplitTable:
    """Independent uniform(0,1) splits for all words above `depth`."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth > SPLIT_DEPTH_GUARD:
        raise CapabilityError(f"depth {depth} exceeds guard {SPLIT_DEPTH_GUARD}")
    levels = []
    for l in range(depth):
        lv = rng.random(1 << l)
        # rng.random may return exactly 0.0; push it inside the open interval
        lv[lv == 0.0] = np.nextafter(0.0, 1.0)
        levels.append(lv)
    return SplitTable(levels)


def cylinder_mass(table: SplitTable, word: Iterable[int]) -> float:
    """Limit-measure mass of the cylinder of ends extending `word`."""
    w = _check_word(word)
    if len(w) > table.depth:
        raise ValueError(f"word {w} deeper than table depth {table.depth}")
    mass = 1.0
    for k, b in enumerate(w):
        xi = float(table.levels[k][word_index(w[:k])])
        mass *= xi if b == 0 else 1.0 - xi
    return mass


def dyadic_density(table: SplitTable, word: Iterable[int]) -> float:
    """Density of the limit measure against the dyadic measure on `word`'s
    cylinder: the product of (2 xi-tilde) factors along the path."""
    w = _check_word(word)
    if len(w) > table.depth:
        raise ValueError(f"word {w} deeper than table depth {table.depth}")
    dens = 1.0
    for k, b in enumerate(w):
        xi = float(table.levels[k][word_index(w[:k])])
        dens *= 2.0 * (xi if b == 0 else 1.0 - xi)
    return dens


def mass_limit_partial(table: SplitTable, k: int) -> float:
    """Partial sum over |u| < k of 2^(-|u|) * split_contribution(xi_u)."""
    if not 1 <= k <= table.depth:
        raise ValueError(f"k must lie in [1, {table.depth}], got {k}")
    c_levels, _ = table._contributions()
    return math.fsum(2.0 ** (-l) * float(c_levels[l].sum()) for l in range(k))


def mass_limit_subtree(table: SplitTable, word: Iterable[int], upto: int | None = None) -> float:
    """Partial sum over words v extending `word` (|v| < upto) of
    2^(-|v|) * split_contribution(xi_v)."""
    w = _check_word(word)
    upto = table.depth if upto is None else upto
    if not len(w) < upto <= table.depth:
        raise ValueError(f"need |word| < upto <= depth, got {len(w)}, {upto}, {table.depth}")
    _, c_prefix = table._contributions()
    idx = word_index(w)
    total = 0.0
    for l in range(len(w), upto):
        width = 1 << (l - len(w))
        lo, hi = idx * width, (idx + 1) * width
        total += 2.0 ** (-l) * float(c_prefix[l][hi] - c_prefix[l][lo])
    return total


def _level_log_masses(table: SplitTable, k: int) -> np.ndarray:
    """log cylinder masses for all 2^k words at level k."""
    logm = np.zeros(1)
    for l in range(k):
        xi = table.levels[l]
        out = np.empty(2 << l)
        out[0::2] = logm + np.log(xi)
        out[1::2] = logm + np.log1p(-xi)
        logm = out
    return logm


def kl_to_dyadic(table: SplitTable, k: int) -> float:
    """Resolution-k divergence of the limit measure from the dyadic measure:
    k + sum over |u|=k of 2^(-k) log(mass(A_u)).

    The level term is the raw count k (not k log 2), which is exactly what
    makes this equal mass_limit_partial(table, k) identically; the balanced
    table therefore scores k (1 - log 2) rather than 0.
    """
    if not 1 <= k <= table.depth:
        raise ValueError(f"k must lie in [1, {table.depth}], got {k}")
    logm = _level_log_masses(table, k)
    return k + 2.0 ** (-k) * float(logm.sum())


def smoothed_limit_mass_part(table: SplitTable, u: End, m: int) -> float:
    """Mass component of the smoothed-silhouette limit: sum over 1-positions
    k <= m of the subtree mass series at the left-turn word u(k)."""
    if m > table.depth:
        raise ValueError(f"m={m} exceeds table depth {table.depth}")
    total = 0.0
    for k in _one_positions_upto(u, m):
        w = tuple(u.bit(i) for i in range(1, k)) + (0,)
        total += mass_limit_subtree(table, w)
    return total


def smoothed_limit_density_part(table: SplitTable, u: End, m: int) -> float:
    """Density component of the smoothed-silhouette limit: sum over
    1-positions k <= m of 2^(-k) log(2^k mass(A_{u(k)}))."""
    if m > table.depth:
        raise ValueError(f"m={m} exceeds table depth {table.depth}")
    total = 0.0
    for k in _one_positions_upto(u, m):
        w = tuple(u.bit(i) for i in range(1, k)) + (0,)
        total += 2.0 ** (-k) * (k * math.log(2.0) + math.log(cylinder_mass(table, w)))
    return total


def _one_positions_upto(u: End, m: int) -> list[int]:
    return [k for k in range(1, m + 1) if u.bit(k) == 1]


# ---------------------------------------------------------------------------
# Smoothed silhouette of a finite tree
# ---------------------------------------------------------------------------

class SmoothedValue(NamedTuple):
    value: float
    tail_bound: float


class SilhouetteCurve:
    """Evaluator for the exit-depth curve and its centered, smoothed integral
    on one fixed tree.  Precomputes subtree dyadic masses once (O(size))."""

    def __init__(self, tree: BinaryTree):
        self.tree = tree
        self.n = tree.size
        self.height = tree.height
        self.centering = harmonic_float(self.n)
        # subtree_mass[w] = sum of 2^(-|v|) over tree words v extending w
        mass: dict[Word, float] = {}
        for w in sorted(tree.words, key=len, reverse=True):
            mass[w] = 2.0 ** (-len(w)) + mass.get(w + (0,), 0.0) + mass.get(w + (1,), 0.0)
        self.subtree_mass = mass

    def boundary(self, u: End) -> int:
        return exit_depth(self.tree, u)

    def cylinder_integral(self, word: Word) -> float:
        """Integral of the exit-depth function over the cylinder of `word`."""
        w = tuple(word)
        for j in range(1, len(w) + 1):
            if w[:j] not in self.tree.words:
                return j * 2.0 ** (-len(w))  # whole cylinder exits at depth j
        return len(w) * 2.0 ** (-len(w)) + self.subtree_mass.get(w, 0.0)

    def smoothed(self, u: End, *, truncate_depth: int = 60) -> SmoothedValue:
        """Integral of (exit depth - centering) over ends left of u.

        Exact for ends with finitely many 1-bits; for a repeating-1 tail the
        sum is truncated at `truncate_depth` and the reported bound covers
        the discarded tail.
        """
        horizon = len(u.prefix) if u.tail == 0 else truncate_depth
        total = 0.0
        exited_at = 0  # first exit depth along u's path, 0 = still inside
        path: Word = ()
        for k in range(1, horizon + 1):
            b = u.bit(k)
            if b == 1:
                if exited_at:
                    part = exited_at * 2.0 ** (-k)
                else:
                    # path (length k-1) is inside the tree, so the cylinder
                    # at path+(0,) integrates to k 2^-k plus its subtree mass
                    part = k * 2.0 ** (-k) + self.subtree_mass.get(path + (0,), 0.0)
                total += part - self.centering * 2.0 ** (-k)
            path = path + (b,)
            if not exited_at and path not in self.tree.words:
                exited_at = k
        if u.tail == 1:
            bound = (truncate_depth + self.height + self.centering) * 2.0 ** (-truncate_depth)
        else:
            bound = 0.0
        return SmoothedValue(total, bound)


def smoothed_silhouette(tree: BinaryTree, u: End, *, truncate_depth: int = 60) -> SmoothedValue:
    """One-shot smoothed silhouette; build a SilhouetteCurve to evaluate many
    ends on the same tree."""
    return SilhouetteCurve(tree).smoothed(u, truncate_depth=truncate_depth)


# ---------------------------------------------------------------------------
# Records-count distribution
# ---------------------------------------------------------------------------

def records_distribution(n: int) -> dict[int, Fraction]:
    """Exact law of 1 + sum of independent Bernoulli(1/k), k=2..n.

    Computed by the permutation-cycle-count recursion over integers and
    normalized by n! at the end; the pmf sums to 1 and has mean H(n) exactly.
    """
    if not 1 <= n <= RECORDS_CAP:
        raise CapabilityError(f"records distribution capped at n={RECORDS_CAP}")
    counts = {1: 1}
    for t in range(2, n + 1):
        nxt: dict[int, int] = {}
        for k, c in counts.items():
            nxt[k] = nxt.get(k, 0) + c * (t - 1)
            nxt[k + 1] = nxt.get(k + 1, 0) + c
        counts = nxt
    total = math.factorial(n)
    return {k: Fraction(c, total) for k, c in sorted(counts.items())}


def records_conditional_distribution(m: int, k: int, n: int) -> dict[int, Fraction]:
    """Exact law of the records count at time n given count k at time m."""
    if not (1 <= k <= m <= n):
        raise ValueError(f"need 1 <= k <= m <= n, got k={k}, m={m}, n={n}")
    if n - m > RECORDS_CAP:
        raise CapabilityError(f"span {n - m} exceeds cap {RECORDS_CAP}")
    dist = {k: Fraction(1)}
    for t in range(m + 1, n + 1):
        nxt: dict[int, Fraction] = {}
        up = Fraction(1, t)
        for j, p in dist.items():
            nxt[j] = nxt.get(j, Fraction(0)) + p * (1 - up)
            nxt[j + 1] = nxt.get(j + 1, Fraction(0)) + p * up
        dist = nxt
    return dict(sorted(dist.items()))


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------

def _word_to_str(w: Word) -> str:
    return "-" if not w else "".join(str(b) for b in w)


def _word_from_str(s: str) -> Word:
    if s == "-":
        return ()
    if not s or any(ch not in "01" for ch in s):
        raise ValueError(f"malformed word {s!r}")
    return tuple(int(ch) for ch in s)


def parse_tree_text(text: str) -> BinaryTree:
    words = [_word_from_str(ln) for ln in (s.strip() for s in text.splitlines()) if ln]
    if not words:
        raise ValueError("empty tree file")
    return BinaryTree(frozenset(words))


def format_tree_text(tree: BinaryTree) -> str:
    return "\n".join(_word_to_str(w) for w in sorted(tree.words)) + "\n"


def parse_split_table_text(text: str) -> SplitTable:
    mapping: dict[Word, float] = {}
    for ln in (s.strip() for s in text.splitlines()):
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"split-table line must be 'word value', got {ln!r}")
        mapping[_word_from_str(parts[0])] = float(parts[1])
    if not mapping:
        raise ValueError("empty split-table file")
    depth = max(len(w) for w in mapping) + 1
    return SplitTable.from_mapping(depth, mapping)


def format_split_table_text(table: SplitTable) -> str:
    lines = [f"{_word_to_str(w)} {v!r}" for w, v in table.items()]
    return "\n".join(lines) + "\n"
