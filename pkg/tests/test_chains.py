"""Chain steps, seeded trajectories, and their one-step laws."""

import math
from fractions import Fraction

import pytest

from chainlab.chains import (
    ChainSpec,
    RecordsState,
    UrnState,
    bst_chain_step,
    check_transition,
    entry_time,
    er_memory_step,
    er_relabel_step,
    polya_step,
    records_step,
    simulate,
    start_state,
    state_time,
    trajectory_from_jsonl,
    trajectory_to_jsonl,
    ua_step,
)
from chainlab.errors import CapabilityError
from chainlab.graphs import Graph, induced_prefix
from chainlab.martin import exact_conditional_oracle, exact_step_distribution, step_state
from chainlab.rng import stream
from chainlab.silhouette import BinaryTree, harmonic_number, records_distribution

from helpers import all_graphs, all_tree_shapes, within_sigma


class TestChainSpec:
    def test_theta_required_for_er(self):
        with pytest.raises(ValueError):
            ChainSpec("er-relabel")
        with pytest.raises(ValueError):
            ChainSpec("er-relabel", 1.0)
        with pytest.raises(ValueError):
            ChainSpec("bst", 0.5)
        with pytest.raises(ValueError):
            ChainSpec("boom")
        ChainSpec("er-memory", 0.0)
        ChainSpec("er-relabel", 0.25)

    def test_start_states(self):
        assert start_state(ChainSpec("polya")) == UrnState(0, 0)
        assert start_state(ChainSpec("records")) == RecordsState(1, 1)
        assert start_state(ChainSpec("bst")) == BinaryTree.root()
        assert start_state(ChainSpec("uniform-attachment")) == Graph.single_vertex()

    def test_state_validation(self):
        with pytest.raises(ValueError):
            UrnState(-1, 0)
        with pytest.raises(ValueError):
            RecordsState(2, 3)


class TestExactStepLaws:
    def test_polya_first_steps(self):
        d = exact_step_distribution(ChainSpec("polya"), UrnState(0, 0))
        assert d[UrnState(1, 0)] == Fraction(1, 2)
        d = exact_step_distribution(ChainSpec("polya"), UrnState(1, 0))
        assert d[UrnState(2, 0)] == Fraction(2, 3)

    def test_polya_two_step_enumeration(self):
        spec = ChainSpec("polya")
        for target in (UrnState(2, 0), UrnState(1, 1), UrnState(0, 2)):
            assert exact_conditional_oracle(spec, UrnState(0, 0), target) == Fraction(1, 3)

    def test_records_up_probability(self):
        d = exact_step_distribution(ChainSpec("records"), RecordsState(1, 1))
        assert d[RecordsState(2, 2)] == Fraction(1, 2)

    def test_records_all_up(self):
        assert exact_conditional_oracle(
            ChainSpec("records"), RecordsState(1, 1), RecordsState(3, 3)
        ) == Fraction(1, 6)

    def test_records_mean_matches_harmonic(self):
        for n in range(1, 13):
            dist = records_distribution(n)
            mean = sum(Fraction(k) * p for k, p in dist.items())
            assert mean == harmonic_number(n)

    def test_ua_first_edge(self):
        d = exact_step_distribution(ChainSpec("uniform-attachment"), Graph.single_vertex())
        assert d[Graph.complete(2)] == Fraction(1, 2)

    def test_ua_triangle(self):
        assert exact_conditional_oracle(
            ChainSpec("uniform-attachment"), Graph.single_vertex(), Graph.complete(3)
        ) == Fraction(2, 27)

    def test_er_memory_edge_cases(self):
        g2 = Graph.complete(2)
        rng = stream(0)
        g = er_memory_step(g2, 0.0, rng)
        assert g.edge_count == 1
        g = er_memory_step(g2, 1.0, rng)
        assert g.edge_count == 3

    def test_er_memory_two_new_edges(self):
        spec = ChainSpec("er-memory", Fraction(1, 3))
        d = exact_step_distribution(spec, Graph.complete(2))
        assert d[Graph.complete(3)] == Fraction(1, 9)

    def test_er_relabel_marginal_depends_only_on_edges(self):
        # 96 equally weighted outcomes collapse to an edge-count function
        spec = ChainSpec("er-relabel", Fraction(1, 2))
        dist = {}
        for g, w in exact_step_distribution(spec, Graph.single_vertex()).items():
            for h, q in exact_step_distribution(spec, g).items():
                dist[h] = dist.get(h, Fraction(0)) + w * q
        by_edges = {}
        for g in all_graphs(3):
            by_edges.setdefault(g.edge_count, set()).add(dist[g])
        assert all(len(vals) == 1 for vals in by_edges.values())
        # edge-count marginal is binomial(3, 1/2)
        for e, vals in by_edges.items():
            count = sum(1 for g in all_graphs(3) if g.edge_count == e)
            assert next(iter(vals)) * count == Fraction(math.comb(3, e), 8)

    def test_bst_uniform_choices(self):
        spec = ChainSpec("bst")
        root = BinaryTree.root()
        d = exact_step_distribution(spec, root)
        assert len(d) == 2 and all(p == Fraction(1, 2) for p in d.values())
        t = root.add((0,))
        d = exact_step_distribution(spec, t)
        assert len(d) == 3 and all(p == Fraction(1, 3) for p in d.values())

    def test_bst_shape_distribution_at_3(self):
        from chainlab.martin import exact_state_distribution

        spec = ChainSpec("bst")
        dist = exact_state_distribution(spec, BinaryTree.root(), 3)
        assert sum(dist.values()) == 1
        spines = [t for t in dist if t.height == 2]
        balanced = [t for t in dist if t.height == 1]
        assert len(balanced) == 1 and dist[balanced[0]] == Fraction(1, 3)
        assert len(spines) == 4 and all(dist[t] == Fraction(1, 6) for t in spines)


def _states_up_to_time_3(spec):
    if spec.kind == "polya":
        return [UrnState(0, 0), UrnState(1, 0), UrnState(0, 1), UrnState(2, 0), UrnState(1, 1), UrnState(0, 2)]
    if spec.kind == "records":
        return [RecordsState(1, 1), RecordsState(2, 1), RecordsState(2, 2),
                RecordsState(3, 1), RecordsState(3, 2), RecordsState(3, 3)]
    if spec.kind == "bst":
        out = []
        for n in (1, 2, 3):
            out.extend(all_tree_shapes(n))
        return out
    return all_graphs(1) + all_graphs(2) + all_graphs(3)


@pytest.mark.parametrize(
    "spec",
    [
        ChainSpec("polya"),
        ChainSpec("records"),
        ChainSpec("bst"),
        ChainSpec("uniform-attachment"),
        ChainSpec("er-memory", 0.3),
        ChainSpec("er-relabel", 0.5),
    ],
    ids=lambda s: s.kind,
)
def test_sampler_matches_exact_law(spec):
    """Empirical one-step distribution vs the exact law, 10^5 reps, 4 sigma."""
    reps = 100_000
    rng = stream(2024)
    for state in _states_up_to_time_3(spec):
        exact = exact_step_distribution(spec, state)
        counts: dict = {}
        for _ in range(reps):
            nxt = step_state(spec, state, rng)
            counts[nxt] = counts.get(nxt, 0) + 1
        assert set(counts) <= set(exact)
        for outcome, p in exact.items():
            assert within_sigma(counts.get(outcome, 0) / reps, float(p), reps, 4.0), (
                spec.kind,
                state,
                outcome,
            )


class TestSimulate:
    def test_trivial_horizon(self):
        tr = simulate(ChainSpec("bst"), 1, seed=5)
        assert tr.horizon == 1
        assert tr.state_at(1) == BinaryTree.root()

    def test_determinism(self):
        for spec in (ChainSpec("polya"), ChainSpec("uniform-attachment"), ChainSpec("er-relabel", 0.4)):
            a = simulate(spec, 40, seed=11)
            b = simulate(spec, 40, seed=11)
            assert a.state_at(40) == b.state_at(40)
            assert trajectory_to_jsonl(a) == trajectory_to_jsonl(b)

    def test_ua_transitions_legal(self):
        spec = ChainSpec("uniform-attachment")
        tr = simulate(spec, 200, seed=3)
        states = list(tr.iter_states())
        assert all(check_transition(spec, states[t], states[t + 1]) for t in range(199))

    def test_time_grading(self):
        for spec in (
            ChainSpec("polya"),
            ChainSpec("records"),
            ChainSpec("bst"),
            ChainSpec("uniform-attachment"),
            ChainSpec("er-memory", 0.6),
            ChainSpec("er-relabel", 0.6),
        ):
            tr = simulate(spec, 25, seed=7)
            for t, s in enumerate(tr.iter_states(), start=1):
                assert state_time(spec, s) == t

    def test_er_memory_perfect_memory(self):
        tr = simulate(ChainSpec("er-memory", 0.5), 60, seed=9)
        final = tr.state_at(60)
        for m in (1, 7, 30, 59):
            assert induced_prefix(final, m) == tr.state_at(m)

    def test_memory_guard(self):
        with pytest.raises(CapabilityError):
            simulate(ChainSpec("uniform-attachment"), 100, seed=0, max_pairs=10)

    def test_polya_proportion_settles(self):
        # a.s.-convergence diagnostic: proportion fluctuation after 10^4 steps
        ok = 0
        for r in range(20):
            tr = simulate(ChainSpec("polya"), 20_000, seed=1000 + r)
            reds = 0
            lo, hi = 1.0, 0.0
            for t, d in enumerate(tr.deltas, start=2):
                reds += d
                if t >= 10_000:
                    prop = (reds + 1) / (t + 1)
                    lo, hi = min(lo, prop), max(hi, prop)
            ok += (hi - lo) < 0.05
        assert ok >= 19


class TestEntryTime:
    def test_found_and_not_yet(self):
        spec = ChainSpec("uniform-attachment")
        tr = simulate(spec, 12, seed=21)
        t12 = entry_time(tr, (1, 2))
        if t12 is not None:
            assert not tr.state_at(t12 - 1).has_edge(1, 2)
            assert tr.state_at(t12).has_edge(1, 2)
        far = entry_time(tr, (11, 12))
        assert far is None or 12 >= far >= 12

    def test_malformed_pair(self):
        tr = simulate(ChainSpec("uniform-attachment"), 5, seed=2)
        with pytest.raises(ValueError):
            entry_time(tr, (3, 3))
        with pytest.raises(ValueError):
            entry_time(simulate(ChainSpec("polya"), 5, seed=2), (1, 2))

    def test_corrected_tail_via_monte_carlo(self):
        # P(pair {1,3} absent at time 5) = (j-1)/n = 2/5; 2*10^4 runs, 4 sigma
        reps = 20_000
        spec = ChainSpec("uniform-attachment")
        misses = 0
        for r in range(reps):
            tr = simulate(spec, 5, seed=50_000 + r)
            t = entry_time(tr, (1, 3))
            misses += t is None or t > 5
        assert within_sigma(misses / reps, 2 / 5, reps, 4.0)


class TestTransitionCheckers:
    def test_polya_records(self):
        assert check_transition(ChainSpec("polya"), UrnState(1, 1), UrnState(2, 1))
        assert not check_transition(ChainSpec("polya"), UrnState(1, 1), UrnState(2, 2))
        assert check_transition(ChainSpec("records"), RecordsState(3, 2), RecordsState(4, 2))
        assert not check_transition(ChainSpec("records"), RecordsState(3, 2), RecordsState(4, 4))

    def test_bst(self):
        root = BinaryTree.root()
        t = root.add((1,))
        assert check_transition(ChainSpec("bst"), root, t)
        assert not check_transition(ChainSpec("bst"), root, t.add((1, 0)))

    def test_er_relabel_small(self):
        spec = ChainSpec("er-relabel", 0.5)
        rng = stream(33)
        g = Graph.from_edges(3, [(1, 2)])
        for _ in range(10):
            h = er_relabel_step(g, 0.5, rng)
            assert check_transition(spec, g, h)
        # a 4-vertex graph whose prefix cannot match: complete graph from empty
        assert not check_transition(spec, Graph.empty(3), Graph.complete(4))


class TestJsonlRoundTrip:
    @pytest.mark.parametrize(
        "spec",
        [
            ChainSpec("polya"),
            ChainSpec("records"),
            ChainSpec("bst"),
            ChainSpec("uniform-attachment"),
            ChainSpec("er-memory", 0.7),
            ChainSpec("er-relabel", 0.7),
        ],
        ids=lambda s: s.kind,
    )
    def test_roundtrip(self, spec):
        tr = simulate(spec, 15, seed=77)
        back = trajectory_from_jsonl(trajectory_to_jsonl(tr))
        assert back.spec == ChainSpec(spec.kind, float(spec.theta) if spec.theta is not None else None)
        assert back.seed == tr.seed
        assert back.horizon == tr.horizon
        for n in range(1, 16):
            assert back.state_at(n) == tr.state_at(n)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            trajectory_from_jsonl("")
        tr = simulate(ChainSpec("bst"), 4, seed=1)
        lines = trajectory_to_jsonl(tr).splitlines()
        swapped = "\n".join([lines[0], lines[2], lines[1]])
        with pytest.raises(ValueError):
            trajectory_from_jsonl(swapped)


class TestPublicStepFunctions:
    def test_steps_move_one_slice(self):
        rng = stream(8)
        assert polya_step(UrnState(3, 1), rng).time == 6
        assert records_step(RecordsState(4, 2), rng).n == 5
        assert ua_step(Graph.complete(3), rng).n == 4
        assert er_memory_step(Graph.complete(3), 0.5, rng).n == 4
        assert er_relabel_step(Graph.complete(3), 0.5, rng).n == 4
        assert bst_chain_step(BinaryTree.root(), rng).size == 2

    def test_er_theta_validation(self):
        rng = stream(8)
        with pytest.raises(ValueError):
            er_memory_step(Graph.complete(2), 1.5, rng)
        with pytest.raises(ValueError):
            er_relabel_step(Graph.complete(2), 1.0, rng)
