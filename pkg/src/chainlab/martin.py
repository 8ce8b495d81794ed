"""Transition laws, marginals, and limit kernels of the graph chains.

Closed forms are carried in natural-log space (linear-space probabilities of
graphs on [n] underflow around n = 40); every closed form has an
exact-rational twin, and `exact_conditional_oracle` re-derives any small-state
conditional probability by brute-force enumeration of the step randomness, in
exact rationals.  The oracle is the arbiter whenever a formula and a
simulation disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations as _permutations

from .chains import (
    ChainSpec,
    RecordsState,
    UrnState,
    absent_pairs,
    bst_chain_step,
    er_memory_step,
    er_relabel_step,
    polya_step,
    records_step,
    start_state,
    state_time,
    ua_step,
)
from .errors import CapabilityError
from .graphs import Graph, Permutation, induced_prefix, permute, sampling_density_exact
from .rng import stream
from .silhouette import records_conditional_distribution, records_distribution

# exact enumeration caps (target time)
ORACLE_GRAPH_TIME_CAP = 5
ORACLE_SCALAR_TIME_CAP = 10
ORACLE_SUBSET_CAP = 22  # max absent pairs per enumerated attachment step


@dataclass(frozen=True)
class LogProb:
    """Natural-log probability; -inf encodes an impossible event."""

    value: float

    def __post_init__(self) -> None:
        if self.value > 1e-12:
            raise ValueError(f"log probability must be <= 0, got {self.value}")

    @property
    def prob(self) -> float:
        return math.exp(self.value)

    @staticmethod
    def impossible() -> "LogProb":
        return LogProb(float("-inf"))

    @staticmethod
    def from_fraction(q: Fraction) -> "LogProb":
        if q < 0 or q > 1:
            raise ValueError(f"not a probability: {q}")
        if q == 0:
            return LogProb.impossible()
        return LogProb(math.log(q.numerator) - math.log(q.denominator))


@dataclass(frozen=True)
class AdjacencyLimit:
    """0/1 assignment on all vertex pairs {i,j} with j <= window.

    Boundary points of the attachment chain are 0/1 labelings of the whole
    pair set; kernels only ever read the pairs inside a finite window, so the
    window is the stored object.
    """

    window: int
    bits: tuple[int, ...]  # pair (i,j) at index (j-1)(j-2)/2 + i - 1

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValueError("window must be >= 2")
        npairs = self.window * (self.window - 1) // 2
        if len(self.bits) != npairs:
            raise ValueError(f"window {self.window} needs {npairs} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0/1")

    @staticmethod
    def _index(i: int, j: int) -> int:
        return (j - 1) * (j - 2) // 2 + i - 1

    @staticmethod
    def all_ones(window: int) -> "AdjacencyLimit":
        return AdjacencyLimit(window, (1,) * (window * (window - 1) // 2))

    @staticmethod
    def from_bits(window: int, mapping: dict[tuple[int, int], int]) -> "AdjacencyLimit":
        bits = [None] * (window * (window - 1) // 2)
        for (i, j), b in mapping.items():
            if not 1 <= i < j <= window:
                raise ValueError(f"pair ({i},{j}) outside window {window}")
            bits[AdjacencyLimit._index(i, j)] = int(b)
        if any(b is None for b in bits):
            raise ValueError("mapping must cover every pair inside the window")
        return AdjacencyLimit(window, tuple(bits))

    def bit(self, i: int, j: int) -> int:
        if not 1 <= i < j <= self.window:
            raise ValueError(f"pair ({i},{j}) outside window {self.window}")
        return self.bits[self._index(i, j)]

    def edges_into(self, j: int) -> int:
        return sum(self.bit(i, j) for i in range(1, j))

    def allows(self, g: Graph) -> bool:
        """Whether every edge of g sits on a pair assigned 1."""
        if g.n > self.window:
            raise ValueError(f"graph on [{g.n}] exceeds window {self.window}")
        return all(self.bit(i, j) == 1 for i, j in g.edges())


def parse_adjacency_limit_text(text: str) -> AdjacencyLimit:
    """Lines "i j b" covering all pairs with j <= window (= max j seen)."""
    mapping: dict[tuple[int, int], int] = {}
    for ln in (s.strip() for s in text.splitlines()):
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"limit line must be 'i j b', got {ln!r}")
        i, j, b = int(parts[0]), int(parts[1]), int(parts[2])
        if (i, j) in mapping:
            raise ValueError(f"duplicate pair ({i},{j})")
        mapping[(i, j)] = b
    if not mapping:
        raise ValueError("empty adjacency-limit file")
    window = max(j for _, j in mapping)
    return AdjacencyLimit.from_bits(window, mapping)


def format_adjacency_limit_text(limit: AdjacencyLimit) -> str:
    lines = []
    for j in range(2, limit.window + 1):
        for i in range(1, j):
            lines.append(f"{i} {j} {limit.bit(i, j)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Uniform attachment: transition, marginal, kernel
# ---------------------------------------------------------------------------

def _edges_into_all(g: Graph) -> list[int]:
    """edges_into(g, j) for j = 1..n (index 0 unused, kept 0)."""
    return [0] + [
        (g.rows[j - 1] & ((1 << (j - 1)) - 1)).bit_count() for j in range(1, g.n + 1)
    ]


def _ua_possible(g_m: Graph, g_n: Graph) -> bool:
    return set(g_m.edges()) <= set(induced_prefix(g_n, g_m.n).edges())


def ua_transition_prob_exact(g_m: Graph, g_n: Graph) -> Fraction:
    """P(state at n = g_n | state at m = g_m) for the attachment chain."""
    m, n = g_m.n, g_n.n
    if m >= n:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    if not _ua_possible(g_m, g_n):
        return Fraction(0)
    em = _edges_into_all(g_m)
    en = _edges_into_all(g_n)
    prob = Fraction(1)
    for j in range(2, m + 1):
        prob *= (1 - Fraction(m, n)) ** (en[j] - em[j]) * Fraction(m, n) ** (j - 1 - en[j])
    for j in range(m + 1, n + 1):
        prob *= (1 - Fraction(j - 1, n)) ** en[j] * Fraction(j - 1, n) ** (j - 1 - en[j])
    return prob


def ua_transition_prob(g_m: Graph, g_n: Graph) -> LogProb:
    m, n = g_m.n, g_n.n
    if m >= n:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    if not _ua_possible(g_m, g_n):
        return LogProb.impossible()
    em = _edges_into_all(g_m)
    en = _edges_into_all(g_n)
    total = 0.0
    for j in range(2, m + 1):
        total += (en[j] - em[j]) * math.log1p(-m / n) + (j - 1 - en[j]) * math.log(m / n)
    for j in range(m + 1, n + 1):
        total += en[j] * math.log1p(-(j - 1) / n) + (j - 1 - en[j]) * math.log((j - 1) / n)
    return LogProb(min(total, 0.0))


def ua_marginal_prob_exact(g_n: Graph) -> Fraction:
    """P(state at n = g_n) from the single-vertex start."""
    n = g_n.n
    en = _edges_into_all(g_n)
    prob = Fraction(1)
    for j in range(2, n + 1):
        prob *= (1 - Fraction(j - 1, n)) ** en[j] * Fraction(j - 1, n) ** (j - 1 - en[j])
    return prob


def ua_marginal_prob(g_n: Graph) -> LogProb:
    n = g_n.n
    en = _edges_into_all(g_n)
    total = 0.0
    for j in range(2, n + 1):
        total += en[j] * math.log1p(-(j - 1) / n) + (j - 1 - en[j]) * math.log((j - 1) / n)
    return LogProb(min(total, 0.0))


def ua_kernel_exact(g_m: Graph, g_n: Graph) -> Fraction:
    """Ratio kernel of the attachment chain via its three-factor form."""
    m, n = g_m.n, g_n.n
    if m >= n:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    if not _ua_possible(g_m, g_n):
        return Fraction(0)
    em = _edges_into_all(g_m)
    en = _edges_into_all(g_n)
    k = Fraction(1)
    for j in range(2, m + 1):
        k *= (1 - Fraction(m, n)) ** (-em[j])
        k *= (1 - Fraction(m + 1 - j, n + 1 - j)) ** en[j]
        k *= Fraction(j - 1, m) ** (en[j] + 1 - j)
    return k


def ua_kernel(g_m: Graph, g_n: Graph) -> float:
    m, n = g_m.n, g_n.n
    if m >= n:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    if not _ua_possible(g_m, g_n):
        return 0.0
    em = _edges_into_all(g_m)
    en = _edges_into_all(g_n)
    log_k = 0.0
    for j in range(2, m + 1):
        log_k -= em[j] * math.log1p(-m / n)
        log_k += en[j] * math.log1p(-(m + 1 - j) / (n + 1 - j))
        log_k += (en[j] + 1 - j) * math.log((j - 1) / m)
    return math.exp(log_k)


def ua_extended_kernel_exact(g_m: Graph, limit: AdjacencyLimit) -> Fraction:
    """Kernel against a boundary point: the n->infinity limit of ua_kernel
    along graph sequences whose pair indicators freeze to `limit`."""
    m = g_m.n
    if limit.window < m:
        raise ValueError(f"limit window {limit.window} smaller than graph size {m}")
    if not limit.allows(g_m):
        return Fraction(0)
    k = Fraction(1)
    for j in range(2, m + 1):
        k *= Fraction(j - 1, m) ** (limit.edges_into(j) + 1 - j)
    return k


def ua_extended_kernel(g_m: Graph, limit: AdjacencyLimit) -> float:
    return float(ua_extended_kernel_exact(g_m, limit))


def entry_tail_prob(i: int, j: int, n: int) -> Fraction:
    """P(edge {i,j} still absent at time n) = (j-1)/n for n >= j-1.

    This is the product over steps into times j..n of (1 - 1/t), consistent
    with the chain's transition and marginal formulas (the chain adds each
    absent pair within [t] with probability 1/t at the step into time t).
    """
    if not 1 <= i < j:
        raise ValueError(f"need 1 <= i < j, got ({i},{j})")
    if n < j - 1:
        raise ValueError(f"need n >= j-1 = {j - 1}, got {n}")
    return Fraction(j - 1, n)


# ---------------------------------------------------------------------------
# Binomial graph chains: marginal and kernels
# ---------------------------------------------------------------------------

def er_marginal_prob_exact(g_n: Graph, theta: Fraction) -> Fraction:
    theta = Fraction(theta)
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    e = g_n.edge_count
    pairs = g_n.n * (g_n.n - 1) // 2
    return theta ** e * (1 - theta) ** (pairs - e)


def er_marginal_prob(g_n: Graph, theta: float) -> LogProb:
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    e = g_n.edge_count
    pairs = g_n.n * (g_n.n - 1) // 2
    return LogProb(min(e * math.log(theta) + (pairs - e) * math.log1p(-theta), 0.0))


def er_kernel_exact(g_m: Graph, g_n: Graph, theta: Fraction) -> Fraction:
    """Kernel of the relabeled chain: sampling density over start-marginal."""
    if g_m.n > g_n.n:
        raise ValueError(f"need m <= n, got m={g_m.n}, n={g_n.n}")
    rho = sampling_density_exact(g_m, g_n)
    return rho / er_marginal_prob_exact(g_m, Fraction(theta))


def er_kernel(g_m: Graph, g_n: Graph, theta: float) -> float:
    return float(er_kernel_exact(g_m, g_n, Fraction(theta)))


def er_limit_value(h: Graph, theta: float) -> float:
    """Limit of the sampling density of h along the relabeled chain."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    pairs = h.n * (h.n - 1) // 2
    return theta ** h.edge_count * (1 - theta) ** (pairs - h.edge_count)


def pm_kernel_exact(g_m: Graph, g_n: Graph, theta: Fraction) -> Fraction:
    """Kernel of the perfect-memory chain: 1/P(state at m = g_m) on the
    unique path through g_m, else 0."""
    if g_m.n >= g_n.n:
        raise ValueError(f"need m < n, got m={g_m.n}, n={g_n.n}")
    if induced_prefix(g_n, g_m.n) != g_m:
        return Fraction(0)
    return 1 / er_marginal_prob_exact(g_m, Fraction(theta))


def pm_kernel(g_m: Graph, g_n: Graph, theta: float) -> float:
    return float(pm_kernel_exact(g_m, g_n, Fraction(theta)))


# ---------------------------------------------------------------------------
# Exact enumeration oracles
# ---------------------------------------------------------------------------

def _exact_theta(spec: ChainSpec) -> Fraction:
    return Fraction(spec.theta)


def exact_step_distribution(spec: ChainSpec, state) -> dict:
    """Exact one-step law from `state`, as {successor: Fraction}."""
    kind = spec.kind
    if kind == "polya":
        p = Fraction(state.i + 1, state.i + state.j + 2)
        return {UrnState(state.i + 1, state.j): p, UrnState(state.i, state.j + 1): 1 - p}
    if kind == "records":
        p = Fraction(1, state.n + 1)
        return {
            RecordsState(state.n + 1, state.k + 1): p,
            RecordsState(state.n + 1, state.k): 1 - p,
        }
    if kind == "bst":
        ext = state.external_nodes()
        p = Fraction(1, len(ext))
        return {state.add(w): p for w in ext}
    if kind == "uniform-attachment":
        n_next = state.n + 1
        pairs = absent_pairs(state, n_next)
        if len(pairs) > ORACLE_SUBSET_CAP:
            raise CapabilityError(f"{len(pairs)} absent pairs exceed subset cap {ORACLE_SUBSET_CAP}")
        p = Fraction(1, n_next)
        out: dict = {}
        for mask in range(1 << len(pairs)):
            chosen = [pairs[t] for t in range(len(pairs)) if mask >> t & 1]
            w = p ** len(chosen) * (1 - p) ** (len(pairs) - len(chosen))
            g = Graph.from_edges(n_next, list(state.edges()) + chosen)
            out[g] = out.get(g, Fraction(0)) + w
        return out
    if kind in ("er-memory", "er-relabel"):
        theta = _exact_theta(spec)
        n_next = state.n + 1
        new_pairs = [(i, n_next) for i in range(1, state.n + 1)]
        base: dict = {}
        for mask in range(1 << len(new_pairs)):
            chosen = [new_pairs[t] for t in range(len(new_pairs)) if mask >> t & 1]
            w = theta ** len(chosen) * (1 - theta) ** (len(new_pairs) - len(chosen))
            g = Graph.from_edges(n_next, list(state.edges()) + chosen)
            base[g] = base.get(g, Fraction(0)) + w
        if kind == "er-memory":
            return base
        out = {}
        nperm = math.factorial(n_next)
        for g, w in base.items():
            share = w / nperm
            for image in _permutations(range(1, n_next + 1)):
                relabeled = permute(g, Permutation(n_next, image))
                out[relabeled] = out.get(relabeled, Fraction(0)) + share
        return out
    raise AssertionError(kind)  # pragma: no cover


def exact_state_distribution(spec: ChainSpec, x, n: int) -> dict:
    """Exact law of the time-n state given state x (time inferred from x)."""
    m = state_time(spec, x)
    if m > n:
        raise ValueError(f"state sits at time {m} > target {n}")
    cap = ORACLE_GRAPH_TIME_CAP if spec.kind in ("uniform-attachment", "er-memory", "er-relabel") else ORACLE_SCALAR_TIME_CAP
    if n > cap:
        raise CapabilityError(f"exact enumeration capped at time {cap} for {spec.kind}")
    dist = {x: Fraction(1)}
    for _ in range(m, n):
        nxt: dict = {}
        for s, w in dist.items():
            for t, q in exact_step_distribution(spec, s).items():
                nxt[t] = nxt.get(t, Fraction(0)) + w * q
        dist = nxt
    return dist


def exact_conditional_oracle(spec: ChainSpec, x, y) -> Fraction:
    """Brute-force P(state at time(y) = y | state at time(x) = x)."""
    m, n = state_time(spec, x), state_time(spec, y)
    if m > n:
        raise ValueError(f"conditioning state at time {m} is later than target time {n}")
    if m == n:
        return Fraction(1) if x == y else Fraction(0)
    return exact_state_distribution(spec, x, n).get(y, Fraction(0))


# ---------------------------------------------------------------------------
# Monte-Carlo kernel estimate
# ---------------------------------------------------------------------------

def step_state(spec: ChainSpec, state, rng):
    """One step of the chain's law from an arbitrary state."""
    kind = spec.kind
    if kind == "polya":
        return polya_step(state, rng)
    if kind == "records":
        return records_step(state, rng)
    if kind == "bst":
        return bst_chain_step(state, rng)
    if kind == "uniform-attachment":
        return ua_step(state, rng)
    if kind == "er-memory":
        return er_memory_step(state, float(spec.theta), rng)
    if kind == "er-relabel":
        return er_relabel_step(state, float(spec.theta), rng)
    raise AssertionError(kind)  # pragma: no cover


@dataclass(frozen=True)
class KernelEstimate:
    """Monte-Carlo kernel ratio with a delta-method standard error.

    value is None when the marginal arm never hit the target (no estimate);
    the raw hit counts are always reported.
    """

    value: float | None
    stderr: float | None
    hits_conditional: int
    hits_marginal: int
    reps: int


def empirical_kernel(spec: ChainSpec, x, y, reps: int, seed: int) -> KernelEstimate:
    """Estimate P(X_n=y | X_m=x) / P(X_n=y) by two independent run batches."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    m, n = state_time(spec, x), state_time(spec, y)
    if m > n:
        raise ValueError(f"need time(x) <= time(y), got {m} > {n}")
    rng_cond = stream(seed, 1)
    rng_marg = stream(seed, 2)
    hits_cond = 0
    for _ in range(reps):
        s = x
        for _ in range(m, n):
            s = step_state(spec, s, rng_cond)
        hits_cond += s == y
    start = start_state(spec)
    hits_marg = 0
    for _ in range(reps):
        s = start
        for _ in range(1, n):
            s = step_state(spec, s, rng_marg)
        hits_marg += s == y
    if hits_marg == 0:
        return KernelEstimate(None, None, hits_cond, hits_marg, reps)
    p1, p2 = hits_cond / reps, hits_marg / reps
    var1 = p1 * (1 - p1) / reps
    var2 = p2 * (1 - p2) / reps
    value = p1 / p2
    stderr = math.sqrt(var1 / p2 ** 2 + (p1 ** 2) * var2 / p2 ** 4)
    return KernelEstimate(value, stderr, hits_cond, hits_marg, reps)


# ---------------------------------------------------------------------------
# Records chain kernel ratios
# ---------------------------------------------------------------------------

def records_kernel_ratio(m: int, k: int, n: int, l: int) -> Fraction:
    """P(count at n = l | count at m = k) / P(count at n = l), exactly.

    Returns 0 when (n, l) is unreachable from (m, k).
    """
    if not (1 <= k <= m < n):
        raise ValueError(f"need 1 <= k <= m < n, got k={k}, m={m}, n={n}")
    if l < k or l > k + (n - m):
        return Fraction(0)
    cond = records_conditional_distribution(m, k, n).get(l, Fraction(0))
    marg = records_distribution(n)[l]
    return cond / marg


def records_kernel_table(m: int, n: int, l: int) -> dict[int, Fraction]:
    """Kernel ratio as a function of the conditioning count k = 1..m.

    Diagnostic data only: no shape of the table is asserted anywhere.
    """
    return {k: records_kernel_ratio(m, k, n, l) for k in range(1, m + 1)}
