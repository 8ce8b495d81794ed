"""Shared test utilities: enumerations and random-object builders."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from chainlab.graphs import Graph, Permutation
from chainlab.silhouette import BinaryTree


def all_graphs(n: int):
    """Every labeled graph on [n] (2^C(n,2) of them)."""
    pairs = list(combinations(range(1, n + 1), 2))
    out = []
    for mask in range(1 << len(pairs)):
        edges = [pairs[t] for t in range(len(pairs)) if mask >> t & 1]
        out.append(Graph.from_edges(n, edges))
    return out


@lru_cache(maxsize=None)
def all_tree_shapes(n: int) -> tuple[BinaryTree, ...]:
    """Every binary tree shape with exactly n nodes (Catalan many)."""
    if n == 0:
        return (None,)
    if n == 1:
        return (BinaryTree.root(),)
    shapes = []
    for left_n in range(n):
        right_n = n - 1 - left_n
        for left in all_tree_shapes(left_n):
            for right in all_tree_shapes(right_n):
                words = {()}
                if left is not None:
                    words.update((0,) + w for w in left.words)
                if right is not None:
                    words.update((1,) + w for w in right.words)
                shapes.append(BinaryTree(frozenset(words)))
    return tuple(shapes)


def random_graph(n: int, rng, p: float = 0.5) -> Graph:
    edges = [
        (i, j)
        for i in range(1, n + 1)
        for j in range(i + 1, n + 1)
        if rng.random() < p
    ]
    return Graph.from_edges(n, edges)


def random_permutation(n: int, rng) -> Permutation:
    return Permutation.random(n, rng)


def empirical_counts(sampler, reps: int):
    counts: dict = {}
    for _ in range(reps):
        s = sampler()
        counts[s] = counts.get(s, 0) + 1
    return counts


def within_sigma(p_hat: float, p: float, reps: int, sigmas: float) -> bool:
    sd = (p * (1 - p) / reps) ** 0.5
    return abs(p_hat - p) <= sigmas * max(sd, 1e-12)


def frac(a, b=1) -> Fraction:
    return Fraction(a, b)
