"""Graph values, permutation action, and induced-embedding counting."""

import pytest
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from chainlab.errors import CapabilityError
from chainlab.graphs import (
    Graph,
    Permutation,
    edge_indicator,
    edges_into,
    embedding_count,
    format_graph_text,
    induced_prefix,
    parse_graph_text,
    permute,
    sampling_density,
    sampling_density_exact,
)
from chainlab.rng import stream

from helpers import all_graphs, random_graph, random_permutation

K2 = Graph.complete(2)
K3 = Graph.complete(3)
PATH3 = Graph.from_edges(3, [(1, 2), (2, 3)])
POINT = Graph.single_vertex()


@st.composite
def graphs(draw, max_n=6):
    n = draw(st.integers(min_value=1, max_value=max_n))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    picks = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(n, [p for p, b in zip(pairs, picks) if b])


class TestGraphValue:
    def test_from_edges_rejects_bad_pairs(self):
        with pytest.raises(ValueError):
            Graph.from_edges(3, [(2, 1)])
        with pytest.raises(ValueError):
            Graph.from_edges(3, [(1, 4)])
        with pytest.raises(ValueError):
            Graph.from_edges(3, [(1, 2), (1, 2)])

    def test_edge_count_and_edges(self):
        g = Graph.from_edges(4, [(1, 2), (2, 4)])
        assert g.edge_count == 2
        assert list(g.edges()) == [(1, 2), (2, 4)]
        assert g.validate() is g

    def test_complete_and_empty(self):
        assert Graph.complete(4).edge_count == 6
        assert Graph.empty(4).edge_count == 0


class TestInducedPrefix:
    def test_triangle_to_edge(self):
        assert induced_prefix(K3, 2) == K2

    def test_identity_case(self):
        g = random_graph(5, stream(1))
        assert induced_prefix(g, 5) == g

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            induced_prefix(K3, 0)
        with pytest.raises(ValueError):
            induced_prefix(K3, 4)

    def test_composition_on_random_graphs(self):
        # restricting to [2] then [1] equals restricting to [1] directly
        rng = stream(2)
        for _ in range(50):
            g = random_graph(5, rng)
            assert induced_prefix(induced_prefix(g, 3), 2) == induced_prefix(g, 2)
            assert induced_prefix(induced_prefix(g, 4), 3) == induced_prefix(g, 3)


class TestPermute:
    def test_identity(self):
        g = random_graph(4, stream(3))
        assert permute(g, Permutation.identity(4)) == g

    def test_direct_image(self):
        g = Graph.from_edges(3, [(1, 2)])
        pi = Permutation(3, (3, 2, 1))
        assert permute(g, pi) == Graph.from_edges(3, [(2, 3)])

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            permute(K3, Permutation.identity(4))

    def test_edge_count_preserved_and_roundtrip(self):
        rng = stream(4)
        for _ in range(100):
            g = random_graph(6, rng)
            pi = random_permutation(6, rng)
            h = permute(g, pi)
            assert h.edge_count == g.edge_count
            assert permute(h, pi.inverse()) == g

    @given(graphs(max_n=5), st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_permute_preserves_degree_multiset(self, g, pyrng):
        image = list(range(1, g.n + 1))
        pyrng.shuffle(image)
        pi = Permutation(g.n, tuple(image))
        h = permute(g, pi)
        assert sorted(g.degree(v) for v in range(1, g.n + 1)) == sorted(
            h.degree(v) for v in range(1, g.n + 1)
        )


class TestEmbeddingCount:
    def test_single_vertex(self):
        for g in (K3, PATH3, Graph.empty(5)):
            assert embedding_count(POINT, g) == g.n

    def test_edge_into_triangle(self):
        assert embedding_count(K2, K3) == 6

    def test_edge_into_path(self):
        # the two injections onto the non-adjacent outer pair fail
        assert embedding_count(K2, PATH3) == 4

    def test_larger_pattern_than_host(self):
        assert embedding_count(K3, K2) == 0

    def test_non_edges_must_match(self):
        # an edgeless pattern on 2 vertices counts non-adjacent ordered pairs
        assert embedding_count(Graph.empty(2), K3) == 0
        assert embedding_count(Graph.empty(2), PATH3) == 2

    def test_guard(self):
        with pytest.raises(CapabilityError):
            embedding_count(Graph.empty(9), Graph.empty(10))

    def test_brute_force_oracle(self):
        # compare with direct enumeration over all injections
        from itertools import permutations

        rng = stream(5)
        for _ in range(25):
            h = random_graph(3, rng)
            g = random_graph(5, rng)
            count = 0
            for img in permutations(range(1, 6), 3):
                ok = True
                for a in range(1, 4):
                    for b in range(a + 1, 4):
                        if h.has_edge(a, b) != g.has_edge(img[a - 1], img[b - 1]):
                            ok = False
                if ok:
                    count += 1
            assert embedding_count(h, g) == count


class TestSamplingDensity:
    def test_point(self):
        assert sampling_density(POINT, random_graph(6, stream(6))) == 1.0

    def test_edge_in_triangle(self):
        assert sampling_density_exact(K2, K3) == 1

    def test_edge_in_path(self):
        assert sampling_density_exact(K2, PATH3) == Fraction(2, 3)

    def test_pattern_too_large(self):
        with pytest.raises(ValueError):
            sampling_density(K3, K2)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_total_mass_one(self, m):
        # the sampled induced subgraph is always one of the labeled patterns
        hs = all_graphs(m)
        hosts = all_graphs(4) + [random_graph(5, stream(7)), random_graph(6, stream(8))]
        for g in hosts:
            total = sum(sampling_density_exact(h, g) for h in hs)
            assert total == 1


class TestEdgeIndicatorAndCounts:
    def test_indicator(self):
        assert edge_indicator(K3, 1, 2) == 1
        assert edge_indicator(Graph.empty(3), 1, 2) == 0
        assert edge_indicator(K2, 1, 3) == 0  # vertex 3 absent
        with pytest.raises(ValueError):
            edge_indicator(K3, 2, 2)

    def test_edges_into(self):
        assert edges_into(K3, 3) == 2
        assert edges_into(Graph.empty(5), 4) == 0
        with pytest.raises(ValueError):
            edges_into(K3, 1)
        with pytest.raises(ValueError):
            edges_into(K3, 4)

    def test_edges_into_sums_to_edge_count(self):
        rng = stream(9)
        for _ in range(50):
            g = random_graph(6, rng)
            assert sum(edges_into(g, j) for j in range(2, 7)) == g.edge_count
            assert all(edges_into(g, j) <= j - 1 for j in range(2, 7))


class TestTextFormat:
    def test_roundtrip(self):
        g = random_graph(6, stream(10))
        assert parse_graph_text(format_graph_text(g)) == g

    def test_rejects(self):
        with pytest.raises(ValueError):
            parse_graph_text("")
        with pytest.raises(ValueError):
            parse_graph_text("2 1\n2 1\n")  # i >= j
        with pytest.raises(ValueError):
            parse_graph_text("2 2\n1 2\n1 2\n")  # duplicate
        with pytest.raises(ValueError):
            parse_graph_text("2 1\n1 3\n")  # out of range
        with pytest.raises(ValueError):
            parse_graph_text("2 2\n1 2\n")  # wrong count
