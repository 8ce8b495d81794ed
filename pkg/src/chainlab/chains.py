"""Seeded simulation of the six growth chains.

Every chain is time-graded: the state at time n is a graph on [n], a tree
with n nodes, an urn pair with i+j+1 = n, or a records pair (n, k).  A run
is recorded as a Trajectory holding one delta per step (added edges, chosen
external word, draw bit), from which any intermediate state can be rebuilt;
dense graph runs never hold all full states at once.

Graph steps are vectorized over the list of absent vertex pairs, so long
uniform-attachment runs stay cheap while small ones remain exact replicas of
the one-step law.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator

import numpy as np

from .errors import CapabilityError
from .graphs import Graph, Permutation, induced_prefix, permute
from .rng import stream
from .silhouette import BinaryTree, Word

CHAIN_KINDS = ("polya", "records", "uniform-attachment", "er-memory", "er-relabel", "bst")
ER_KINDS = ("er-memory", "er-relabel")
GRAPH_KINDS = ("uniform-attachment", "er-memory", "er-relabel")

# Guard for graph-chain horizons: trajectory size and final state scale with
# the number of vertex pairs.
MAX_GRAPH_PAIRS = 1 << 26


@dataclass(frozen=True)
class ChainSpec:
    """Which chain to run; theta is the edge probability of the ER kinds."""

    kind: str
    theta: float | Fraction | None = None

    def __post_init__(self) -> None:
        if self.kind not in CHAIN_KINDS:
            raise ValueError(f"unknown chain kind {self.kind!r}")
        if self.kind in ER_KINDS:
            if self.theta is None:
                raise ValueError(f"{self.kind} requires theta")
            if self.kind == "er-relabel" and not 0 < self.theta < 1:
                raise ValueError("er-relabel requires 0 < theta < 1")
            if self.kind == "er-memory" and not 0 <= self.theta <= 1:
                raise ValueError("er-memory requires 0 <= theta <= 1")
        elif self.theta is not None:
            raise ValueError(f"theta is only meaningful for ER kinds, not {self.kind}")


@dataclass(frozen=True)
class UrnState:
    """Balls added per colour; i+j+1 equals the current time."""

    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i < 0 or self.j < 0:
            raise ValueError("ball counts must be nonnegative")

    @property
    def time(self) -> int:
        return self.i + self.j + 1


@dataclass(frozen=True)
class RecordsState:
    """Time and running record count, 1 <= k <= n."""

    n: int
    k: int

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise ValueError(f"records state needs 1 <= k <= n, got ({self.n},{self.k})")


def start_state(spec: ChainSpec):
    """Canonical time-1 state of the chain."""
    if spec.kind == "polya":
        return UrnState(0, 0)
    if spec.kind == "records":
        return RecordsState(1, 1)
    if spec.kind == "bst":
        return BinaryTree.root()
    return Graph.single_vertex()


def state_time(spec: ChainSpec, state) -> int:
    """Time slice a state belongs to (chains are time-graded)."""
    if spec.kind == "polya":
        return state.time
    if spec.kind == "records":
        return state.n
    if spec.kind == "bst":
        return state.size
    return state.n


# ---------------------------------------------------------------------------
# One-step samplers
# ---------------------------------------------------------------------------

def polya_step(state: UrnState, rng) -> UrnState:
    """Draw red with probability (i+1)/(i+j+2)."""
    if rng.random() < (state.i + 1) / (state.i + state.j + 2):
        return UrnState(state.i + 1, state.j)
    return UrnState(state.i, state.j + 1)


def records_step(state: RecordsState, rng) -> RecordsState:
    """Record at time n+1 with probability 1/(n+1)."""
    up = rng.random() < 1.0 / (state.n + 1)
    return RecordsState(state.n + 1, state.k + 1 if up else state.k)


def absent_pairs(g: Graph, n_next: int) -> list[tuple[int, int]]:
    """Absent pairs within [n_next]: old pairs in (i, j) order, then the
    pairs of the incoming vertex."""
    old = [(i, j) for i in range(1, g.n + 1) for j in range(i + 1, g.n + 1) if not g.has_edge(i, j)]
    return old + [(i, n_next) for i in range(1, g.n + 1)]


def _with_added_edges(g: Graph, n_next: int, added) -> Graph:
    rows = list(g.rows) + [0]
    for i, j in added:
        rows[i - 1] |= 1 << (j - 1)
        rows[j - 1] |= 1 << (i - 1)
    return Graph(n_next, tuple(rows))


def ua_step(g: Graph, rng) -> Graph:
    """Uniform attachment: vertex n+1 joins, and every absent pair within
    [n+1] (including pairs among old vertices) enters with prob 1/(n+1)."""
    n_next = g.n + 1
    pairs = absent_pairs(g, n_next)
    draws = rng.random(len(pairs))
    p = 1.0 / n_next
    return _with_added_edges(g, n_next, (pr for pr, u in zip(pairs, draws) if u < p))


def er_memory_step(g: Graph, theta: float, rng) -> Graph:
    """Add vertex n+1 and each edge {i, n+1} independently with prob theta;
    edges among old vertices never change."""
    if not 0 <= theta <= 1:
        raise ValueError(f"theta must lie in [0,1], got {theta}")
    n_next = g.n + 1
    draws = rng.random(g.n)
    added = [(i, n_next) for i in range(1, g.n + 1) if draws[i - 1] < theta]
    return _with_added_edges(g, n_next, added)


def er_relabel_step(g: Graph, theta: float, rng) -> Graph:
    """er_memory_step followed by an independent uniform relabeling of [n+1]."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    grown = er_memory_step(g, theta, rng)
    return permute(grown, Permutation.random(grown.n, rng))


def bst_chain_step(tree: BinaryTree, rng) -> BinaryTree:
    """Attach one uniformly chosen external node."""
    ext = tree.external_nodes()
    return tree.add(ext[int(rng.integers(len(ext)))])


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Trajectory:
    """A recorded run: per-step deltas, replayable into any time slice.

    deltas[t-2] carries the transition into time t:
      polya        -> int draw (1 red, 0 blue)
      records      -> int record bit
      bst          -> chosen external Word
      ua/er-memory -> int64 array (k, 2) of added edges
      er-relabel   -> (added edges array, relabeling image array over [n+1])
    """

    spec: ChainSpec
    seed: int
    deltas: tuple

    @property
    def horizon(self) -> int:
        return len(self.deltas) + 1

    def state_at(self, n: int):
        """State at time n (1 <= n <= horizon), rebuilt by replaying deltas."""
        if not 1 <= n <= self.horizon:
            raise ValueError(f"time {n} outside [1, {self.horizon}]")
        kind = self.spec.kind
        steps = self.deltas[: n - 1]
        if kind == "polya":
            reds = sum(steps)
            return UrnState(reds, (n - 1) - reds)
        if kind == "records":
            return RecordsState(n, 1 + sum(int(d) for d in steps))
        if kind == "bst":
            return BinaryTree(frozenset({()}).union(steps))
        if kind in ("uniform-attachment", "er-memory"):
            rows = [0] * n
            for added in steps:
                for pair in added:
                    i, j = int(pair[0]), int(pair[1])
                    rows[i - 1] |= 1 << (j - 1)
                    rows[j - 1] |= 1 << (i - 1)
            return Graph(n, tuple(rows))
        # er-relabel: compose the relabelings backward so every added-edge
        # array is mapped exactly once (O(n^2 + e) instead of O(sum_t e_t))
        composed: list[np.ndarray] = [None] * len(steps)
        comp = None
        for t in range(len(steps) - 1, -1, -1):
            image = steps[t][1]
            comp = image if comp is None else comp[image - 1]
            composed[t] = comp
        pieces = []
        for (added, _), comp_t in zip(steps, composed):
            if len(added):
                pieces.append(comp_t[added - 1])
        if pieces:
            edges = np.sort(np.concatenate(pieces), axis=1)
            return Graph.from_edges(n, [(int(a), int(b)) for a, b in edges])
        return Graph.empty(n)

    def iter_states(self) -> Iterator[Any]:
        """States at times 1..horizon in order."""
        for n in range(1, self.horizon + 1):
            yield self.state_at(n)


def simulate(spec: ChainSpec, n_final: int, seed: int, *, max_pairs: int = MAX_GRAPH_PAIRS) -> Trajectory:
    """Run the chain from its canonical start to time n_final.

    Deterministic given (spec, n_final, seed); the stream is derived from the
    seed alone, so distinct seeds give independent replicates.
    """
    if n_final < 1:
        raise ValueError("n_final must be >= 1")
    if spec.kind in GRAPH_KINDS and n_final * (n_final - 1) // 2 > max_pairs:
        raise CapabilityError(
            f"horizon {n_final} projects {n_final * (n_final - 1) // 2} pairs > cap {max_pairs}"
        )
    rng = stream(seed)
    deltas: list = []

    if spec.kind == "polya":
        i = j = 0
        for _ in range(n_final - 1):
            red = rng.random() < (i + 1) / (i + j + 2)
            deltas.append(1 if red else 0)
            i, j = (i + 1, j) if red else (i, j + 1)
    elif spec.kind == "records":
        for t in range(2, n_final + 1):
            deltas.append(1 if rng.random() < 1.0 / t else 0)
    elif spec.kind == "bst":
        externals: list[Word] = [(0,), (1,)]
        for _ in range(n_final - 1):
            idx = int(rng.integers(len(externals)))
            chosen = externals[idx]
            deltas.append(chosen)
            externals[idx] = chosen + (0,)
            externals.append(chosen + (1,))
    elif spec.kind == "uniform-attachment":
        absent = np.zeros((0, 2), dtype=np.int64)
        for n in range(1, n_final):
            fresh = np.empty((n, 2), dtype=np.int64)
            fresh[:, 0] = np.arange(1, n + 1)
            fresh[:, 1] = n + 1
            absent = np.concatenate([absent, fresh])
            mask = rng.random(len(absent)) < 1.0 / (n + 1)
            deltas.append(_freeze(absent[mask]))
            absent = absent[~mask]
    elif spec.kind == "er-memory":
        theta = float(spec.theta)
        for n in range(1, n_final):
            mask = rng.random(n) < theta
            added = np.empty((int(mask.sum()), 2), dtype=np.int64)
            added[:, 0] = np.arange(1, n + 1)[mask]
            added[:, 1] = n + 1
            deltas.append(_freeze(added))
    else:  # er-relabel
        theta = float(spec.theta)
        for n in range(1, n_final):
            mask = rng.random(n) < theta
            added = np.empty((int(mask.sum()), 2), dtype=np.int64)
            added[:, 0] = np.arange(1, n + 1)[mask]
            added[:, 1] = n + 1
            image = rng.permutation(n + 1).astype(np.int64) + 1
            deltas.append((_freeze(added), _freeze(image)))
    return Trajectory(spec, seed, tuple(deltas))


def entry_time(tr: Trajectory, pair: tuple[int, int]) -> int | None:
    """First time the edge {i,j} is present in a graph trajectory;
    None when it has not entered within the recorded horizon."""
    if tr.spec.kind not in GRAPH_KINDS:
        raise ValueError("entry_time needs a graph trajectory")
    i, j = pair
    if not (1 <= i < j):
        raise ValueError(f"pair must satisfy 1 <= i < j, got ({i},{j})")
    if tr.spec.kind in ("uniform-attachment", "er-memory"):
        # edges persist and are never relabeled: scan the added deltas
        for t, added in enumerate(tr.deltas, start=2):
            if len(added) and bool(np.any((added[:, 0] == i) & (added[:, 1] == j))):
                return t
        return None
    for t, g in enumerate(tr.iter_states(), start=1):
        if j <= g.n and g.has_edge(i, j):
            return t
    return None


# ---------------------------------------------------------------------------
# Legal-transition checkers (test utilities, not runtime guards)
# ---------------------------------------------------------------------------

def check_transition(spec: ChainSpec, s, t) -> bool:
    """Whether t is reachable from s in one step (positive probability)."""
    kind = spec.kind
    if kind == "polya":
        return (t.i, t.j) in ((s.i + 1, s.j), (s.i, s.j + 1))
    if kind == "records":
        return t.n == s.n + 1 and t.k in (s.k, s.k + 1)
    if kind == "bst":
        new = t.words - s.words
        return t.size == s.size + 1 and len(new) == 1 and next(iter(new))[:-1] in s.words
    if kind == "uniform-attachment":
        # any edge superset within [n+1] is reachable
        return t.n == s.n + 1 and set(s.edges()) <= set(t.edges())
    if kind == "er-memory":
        return t.n == s.n + 1 and induced_prefix(t, s.n) == s
    if kind == "er-relabel":
        if t.n != s.n + 1:
            return False
        if t.n > 8:
            raise CapabilityError("er-relabel transition check limited to graphs on <= 8 vertices")
        from itertools import permutations as _perms

        for image in _perms(range(1, t.n + 1)):
            back = permute(t, Permutation(t.n, image))
            if induced_prefix(back, s.n) == s:
                return True  # remaining edges of 'back' all touch vertex t.n
        return False
    raise AssertionError(kind)  # pragma: no cover


# ---------------------------------------------------------------------------
# JSONL export / import
# ---------------------------------------------------------------------------

def _delta_to_json(kind: str, delta) -> dict:
    if kind == "polya":
        return {"red": bool(delta)}
    if kind == "records":
        return {"record": int(delta)}
    if kind == "bst":
        return {"chosen": "".join(str(b) for b in delta)}
    if kind in ("uniform-attachment", "er-memory"):
        return {"added": [[int(i), int(j)] for i, j in delta]}
    added, image = delta
    return {
        "added": [[int(i), int(j)] for i, j in added],
        "relabel": [int(v) for v in image],
    }


def _delta_from_json(kind: str, payload: dict):
    if kind == "polya":
        return 1 if payload["red"] else 0
    if kind == "records":
        return int(payload["record"])
    if kind == "bst":
        return tuple(int(ch) for ch in payload["chosen"])
    added = np.array(payload["added"], dtype=np.int64).reshape(-1, 2)
    if kind in ("uniform-attachment", "er-memory"):
        return _freeze(added)
    image = np.array(payload["relabel"], dtype=np.int64)
    return (_freeze(added), _freeze(image))


def trajectory_to_jsonl(tr: Trajectory) -> str:
    """One header line, then one record per time step from n=2 on."""
    head = {"chain": tr.spec.kind, "seed": tr.seed, "horizon": tr.horizon}
    if tr.spec.theta is not None:
        head["theta"] = float(tr.spec.theta)
    lines = [json.dumps(head)]
    for t, delta in enumerate(tr.deltas, start=2):
        lines.append(json.dumps({"n": t, "delta": _delta_to_json(tr.spec.kind, delta)}))
    return "\n".join(lines) + "\n"


def trajectory_from_jsonl(text: str) -> Trajectory:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trajectory stream")
    head = json.loads(lines[0])
    spec = ChainSpec(head["chain"], head.get("theta"))
    deltas = []
    for t, ln in enumerate(lines[1:], start=2):
        rec = json.loads(ln)
        if rec.get("n") != t:
            raise ValueError(f"trajectory record out of order at n={rec.get('n')}")
        deltas.append(_delta_from_json(spec.kind, rec["delta"]))
    return Trajectory(spec, int(head["seed"]), tuple(deltas))
