"""Conditioned chains via kernel reweighting.

The generic reweighted step turns a one-step law p(x, .) and a nonnegative
function K(., target) into p(x, y) K(y) / K(x).  Row sums equal 1 exactly
when K is harmonic at x; the sum is returned alongside the distribution so
violations surface instead of being renormalized away.

For the attachment chain conditioned on a boundary point the reweighted step
has a closed form: only pairs the boundary point assigns 1 may enter, still
independently with probability 1/(n+1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .chains import ChainSpec, Trajectory, absent_pairs, _freeze
from .graphs import Graph
from .martin import AdjacencyLimit, exact_step_distribution
from .rng import stream


class DoobStep(NamedTuple):
    """Reweighted one-step distribution plus its raw row sum (1 iff the
    kernel is harmonic at the source state)."""

    dist: dict
    row_sum: float


@dataclass(frozen=True)
class ConditionedChain:
    """Attachment chain conditioned to a boundary point."""

    base: ChainSpec
    target: AdjacencyLimit

    def __post_init__(self) -> None:
        if self.base.kind != "uniform-attachment":
            raise ValueError("conditioning is implemented for the attachment chain")


def doob_step_distribution(
    x,
    kernel_at_target: Callable,
    *,
    one_step: Callable | None = None,
    spec: ChainSpec | None = None,
) -> DoobStep:
    """Kernel-reweighted one-step law from x.

    one_step maps a state to its exact successor distribution; when omitted,
    the exact law of `spec` is used (default: uniform attachment).  Successor
    probabilities keep their exact type (Fraction in, Fraction out).
    """
    if one_step is None:
        base_spec = spec if spec is not None else ChainSpec("uniform-attachment")
        one_step = lambda s: exact_step_distribution(base_spec, s)
    k_x = kernel_at_target(x)
    if k_x == 0:
        raise ValueError("conditioning on a null history: kernel vanishes at the source state")
    base = one_step(x)
    dist = {}
    for y, p in base.items():
        k_y = kernel_at_target(y)
        if k_y != 0:
            dist[y] = p * k_y / k_x
    return DoobStep(dist, sum(dist.values()))


def isolated_node_limit(xi: int, window: int, *, both_sides: bool = True) -> AdjacencyLimit:
    """Boundary point forbidding the edges at node xi.

    both_sides=True (default) zeroes every pair containing xi, so the node
    stays isolated; both_sides=False zeroes only the pairs whose larger
    element is xi, the one-sided variant.  A node outside the window
    constrains nothing.
    """
    if xi < 1:
        raise ValueError("node index must be >= 1")
    bits = {}
    for j in range(2, window + 1):
        for i in range(1, j):
            touches = (j == xi) or (both_sides and i == xi)
            bits[(i, j)] = 0 if touches else 1
    return AdjacencyLimit.from_bits(window, bits)


def ua_conditioned_step(g: Graph, limit: AdjacencyLimit, rng) -> Graph:
    """One conditioned attachment step: absent pairs with limit bit 1 enter
    independently with probability 1/(n+1); pairs with bit 0 never enter."""
    n_next = g.n + 1
    if limit.window < n_next:
        raise ValueError(f"limit window {limit.window} does not cover [{n_next}]")
    if not limit.allows(g):
        raise ValueError("graph already contains a forbidden edge")
    allowed = [(i, j) for i, j in absent_pairs(g, n_next) if limit.bit(i, j) == 1]
    draws = rng.random(len(allowed))
    p = 1.0 / n_next
    added = [pr for pr, u in zip(allowed, draws) if u < p]
    rows = list(g.rows) + [0]
    for i, j in added:
        rows[i - 1] |= 1 << (j - 1)
        rows[j - 1] |= 1 << (i - 1)
    return Graph(n_next, tuple(rows))


def simulate_conditioned(limit: AdjacencyLimit, n_final: int, seed: int) -> Trajectory:
    """Seeded conditioned-attachment run, recorded in the attachment delta
    format (the trajectory replays identically; only the law differs)."""
    if n_final < 1:
        raise ValueError("n_final must be >= 1")
    if limit.window < n_final:
        raise ValueError(f"limit window {limit.window} does not cover horizon {n_final}")
    rng = stream(seed)
    deltas = []
    allowed = np.zeros((0, 2), dtype=np.int64)
    for n in range(1, n_final):
        fresh = [(i, n + 1) for i in range(1, n + 1) if limit.bit(i, n + 1) == 1]
        if fresh:
            allowed = np.concatenate([allowed, np.array(fresh, dtype=np.int64)])
        mask = rng.random(len(allowed)) < 1.0 / (n + 1)
        deltas.append(_freeze(allowed[mask]))
        allowed = allowed[~mask]
    return Trajectory(ChainSpec("uniform-attachment"), seed, tuple(deltas))


def forbidden_edge_checks(tr: Trajectory, limit: AdjacencyLimit) -> list[bool]:
    """Per-step flags: True when every edge added at that step is allowed."""
    return [
        all(limit.bit(int(i), int(j)) == 1 for i, j in delta)
        for delta in tr.deltas
    ]
