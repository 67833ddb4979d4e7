import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import ListRerooter
from rootlts.costs import CmaxCost, CtildeCost, RootedCost, dop_cost, sop_cost
from rootlts.domains.sokoban import REFERENCE_BRANCH_COUNTS, clue_count_estimate
from rootlts.domains.trees import ChainEnv, ClueTreeSpec, DChain, FiniteTree, LeftRightTree, gen_clue_tree, random_proper_tree
from rootlts.rerooting import ClueIndicator, ExponentialClue, Robust, StaticRerooter, UniformClue
from rootlts.search import ContractViolation, derive_rng, run_search
from rootlts.verify import (
    BoundKind,
    PathTrace,
    SubtaskDecomposition,
    bound_max_segment,
    bound_robust,
    bound_root_only,
    bound_running_max,
    bound_segments,
    check_bounds,
    check_lower_bound_sanity,
    check_self_counting,
    check_tree_to_path,
    composition_costs,
    inverse_distribution_cost,
    max_segment_bound_value,
    min_decomposition,
    min_decomposition_exhaustive,
    reference_solution_numbers,
    running_max_violations,
    sample_decompositions,
    segment_bound_value,
)


def uniform_binary(depth: int) -> FiniteTree:
    t = FiniteTree()
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for n in frontier:
            t.arity[n] = 2
            nxt += [t.add(n, Fraction(1, 2)), t.add(n, Fraction(1, 2))]
        frontier = nxt
    for n in frontier:
        t.arity[n] = 2
    return t


# --- self-counting ----------------------------------------------------------


def test_one_plus_dop_self_counting_on_small_binary_tree():
    t = uniform_binary(3)
    pp, d = t.path_prob(), t.depths()
    cost = [1 + d[n] / pp[n] for n in range(len(t))]
    rep = check_self_counting(cost, t, thetas=[7])
    assert rep.ok and rep.thetas_checked == 1
    assert check_self_counting(cost, t).ok


def test_sop_count_is_exact_on_uniform_tree():
    t = uniform_binary(3)
    sop = t.sop()
    assert sum(c <= 7 for c in sop) == 7
    assert check_self_counting(sop, t, thetas=[7], lower_bound=True).ok


def test_violation_is_reported():
    t = uniform_binary(2)
    rep = check_self_counting([Fraction(1)] * len(t), t, thetas=[1, 2])
    assert not rep.ok
    assert rep.violations[0] == (1, 7, "upper")


@pytest.mark.parametrize("seed", range(10))
def test_sop_two_sided_bounds_on_random_trees(seed):
    tree, theta = random_proper_tree(seed, 300)
    rep = check_self_counting(tree.sop(), tree, lower_bound=True, theta_max=theta)
    assert rep.ok, rep.violations[:3]


@pytest.mark.parametrize("seed", range(10))
def test_composition_of_inverse_distributions(seed):
    tree, _ = random_proper_tree(seed, 100)
    rng = derive_rng(seed, 2)
    k = int(rng.integers(2, 5))
    bases = [inverse_distribution_cost(len(tree), seed * 10 + i) for i in range(k)]
    raw = [int(x) for x in rng.integers(1, 10, size=k)]
    weights = [Fraction(r, sum(raw) + int(rng.integers(0, 3))) for r in raw]
    for b in bases:
        assert check_self_counting(b, tree).ok
    assert check_self_counting(composition_costs(bases, weights), tree).ok


# --- bound formulas --------------------------------------------------------


def test_segment_bound_with_trivial_decomposition_is_root_only_bound():
    assert segment_bound_value([0, 3.5], [1.0], [100.0]) == pytest.approx(350.0)
    assert max_segment_bound_value(3.5, [1.0], [100.0]) == pytest.approx(350.0)


def test_three_clue_reference_vector():
    v = max_segment_bound_value(3.83, [1, 1 / 9, 1 / 2, 1 / 2], [733, 31, 229, 393])
    assert v == pytest.approx(3010.38)
    assert v <= 3011


def test_bound_ladder_is_exact():
    n = reference_solution_numbers()
    assert n.segment_end_sop == (733, 7213, 795181, 195879469)
    assert n.segment_costs == (31, 229, 393)
    assert n.clue_counts == (1143408, 125496, 3024)
    assert (n.bound_all_clues, n.bound_skip_first, n.bound_last_clue_only) == (141782592, 114954336, 4753728)
    assert n.bound_no_split == 4 * 195879469
    assert n.telescoping_ok
    assert 7213 - 1 == 732 + 30 * 216


def reference_trace() -> PathTrace:
    """Synthetic trace along the 25-move reference path with 1/M_z clue weights."""
    flat = [b for g in REFERENCE_BRANCH_COUNTS for b in g]
    L = len(flat)
    clue_pos = list(itertools.accumulate(len(g) for g in REFERENCE_BRANCH_COUNTS))[:-1]
    weights = [0.0] * (L + 1)
    weights[0] = 1
    for z, pos in enumerate(clue_pos, 1):
        weights[pos] = Fraction(1, clue_count_estimate(89, z))
    steps = tuple(range(1, L + 2))  # any increasing steps; only T matters here
    return PathTrace(
        T=L + 1,
        steps=steps,
        cond_probs=(Fraction(1),) + tuple(Fraction(1, b) for b in flat),
        weights=tuple(weights),
        cum_before=tuple(range(L + 1)),
        cum_before_T=4,
    )


def test_min_decomposition_skips_numerous_clue_types():
    tr = reference_trace()
    d, rep = min_decomposition(tr)
    assert rep.bound_value == 4753728
    assert d.steps == (1, 19, 26)
    ladder = {
        int(bound_max_segment(tr, tr.decomposition(p)).bound_value)
        for p in ([0, 25], [0, 9, 13, 18, 25], [0, 13, 18, 25], [0, 18, 25])
    }
    assert ladder == {4 * 195879469, 141782592, 114954336, 4753728}


def test_min_decomposition_without_weighted_interior():
    run = run_search(ChainEnv([0.5] * 6), RootedCost(), ClueIndicator(), 10)
    tr = PathTrace.from_run(run)
    d, _ = min_decomposition(tr)
    assert d.steps == (1, run.T)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 12), st.integers(0, 10**6))
def test_min_decomposition_matches_exhaustive(m, seed):
    rng = derive_rng(seed, 0)
    probs = [float(x) for x in rng.uniform(0.2, 1.0, size=m - 1)]
    weights = [1.0] + [float(x) for x in rng.choice([0.05, 0.2, 0.5, 1.0], size=m - 1)]
    run = run_search(ChainEnv(probs), RootedCost(), ListRerooter(weights), m)
    tr = PathTrace.from_run(run)
    d, rep = min_decomposition(tr)
    _, rep2 = min_decomposition_exhaustive(tr)
    assert rep.bound_value == pytest.approx(rep2.bound_value, rel=1e-12)


def segmented_chain(segment_costs):
    """Probability-1 chain with a clue at the start of every segment."""
    clue_depths, depth = [], 0
    for c in segment_costs:
        clue_depths.append(depth)
        depth += c - 1
    return ChainEnv([1.0] * depth, goal_depth=depth, clue_depths=clue_depths)


def test_two_bounds_on_constructed_scenario():
    A, B, C = 10, 40, 20
    env = segmented_chain([A, A, B, A, C, A])
    run = run_search(env, RootedCost(), ClueIndicator(), 10_000)
    tr = PathTrace.from_run(run)
    d = tr.decomposition(tr.weighted_positions())
    assert d.m == 7
    seg = bound_segments(tr, d)
    mx = bound_max_segment(tr, d)
    assert seg.bound_value == pytest.approx(3 * B + 2 * C + A)
    assert mx.bound_value == pytest.approx(6 * B)
    assert seg.holds and mx.holds and seg.bound_value <= mx.bound_value
    assert run.T == 95


def test_bounds_on_clue_tree_runs():
    for s in range(15):
        a, q = 3 + s % 3, 4 + 4 * (s % 3)
        run = run_search(gen_clue_tree(ClueTreeSpec(a, q, s)), RootedCost(), ClueIndicator(), 10**6)
        tr = PathTrace.from_run(run)
        for d in sample_decompositions(tr):
            seg, mx = bound_segments(tr, d), bound_max_segment(tr, d)
            assert seg.holds and mx.holds
            assert seg.bound_value <= mx.bound_value * (1 + 1e-12)
        full = tr.decomposition(tr.weighted_positions())
        assert bound_max_segment(tr, full).bound_value < run.count_at("clue", run.T) * 2 ** (a + 1)
        eq = bound_root_only(tr)
        triv = bound_max_segment(tr, SubtaskDecomposition((1, run.T)))
        assert eq.bound_value == pytest.approx(triv.bound_value)
        assert eq.bound_kind is BoundKind.ROOT_ONLY


def test_robust_bounds_on_clue_trees():
    for s in range(10):
        a, q = 3, 6
        env = gen_clue_tree(ClueTreeSpec(a, q, s))
        run = run_search(env, RootedCost(), Robust(ClueIndicator()), 10**6)
        tr = PathTrace.from_run(run)
        qT = run.count_at("clue", run.T)
        for d in sample_decompositions(tr):
            assert bound_robust(tr, d).holds
        single = bound_robust(tr, SubtaskDecomposition((1, run.T)))
        lam = tr.segment_cost(0, len(tr.steps) - 1)
        assert single.bound_value == pytest.approx((1 + math.log(tr.input_cum_before_T)) * lam)
        full = tr.decomposition(tr.weighted_positions())
        q_last = run.count_at("clue", full.steps[-2])
        assert bound_robust(tr, full).bound_value <= (1 + math.log(qT)) * q_last * 2 ** (a + 1)


def test_robust_exponential_bound():
    for s in range(10):
        a, q = 4, 8
        run = run_search(gen_clue_tree(ClueTreeSpec(a, q, s)), RootedCost(), Robust(ExponentialClue()), 10**6)
        tr = PathTrace.from_run(run)
        assert all(r.holds for r in check_bounds(tr, robust=True))
        assert run.T <= (2 * math.log(2) + 1) * run.count_at("clue", run.T) * 2 ** (a + 1)


def test_bound_contract_errors():
    run = run_search(DChain(4), RootedCost(), ClueIndicator(), 10**4)
    tr = PathTrace.from_run(run)
    with pytest.raises(ContractViolation):
        SubtaskDecomposition((2, 5))
    with pytest.raises(ContractViolation):
        bound_segments(tr, SubtaskDecomposition((1, 2, run.T)))  # step 2 is off the path or unweighted
    with pytest.raises(ContractViolation):
        bound_robust(tr, SubtaskDecomposition((1, run.T)))


def test_trace_requires_solution_or_node():
    run = run_search(DChain(6), RootedCost(), ClueIndicator(), 3)
    with pytest.raises(ContractViolation):
        PathTrace.from_run(run)
    assert PathTrace.from_run(run, run.visit_order[-1]).T == 3


# --- run properties -------------------------------------------------------


def test_tree_to_path_on_rooted_runs():
    for s in range(5):
        run = run_search(gen_clue_tree(ClueTreeSpec(4, 8, s)), RootedCost(), ClueIndicator(), 10**6)
        rep = check_tree_to_path(run, pairs=100, seed=s)
        assert rep.ok and rep.pairs == 100


def test_tree_to_path_monotone_case():
    from rootlts.baselines import lts_search

    run = lts_search(LeftRightTree(0.3), "sop", budget=300)
    assert check_tree_to_path(run, pairs=100).ok


def test_chain_scenario_tail_descends_from_last_clue():
    env = segmented_chain([10, 10, 40, 10, 20, 10])
    run = run_search(env, RootedCost(), ClueIndicator(), 10_000)
    t4 = run.signal_steps["clue"][3]
    anchor = run.visit_order[t4 - 1]
    for t in range(t4 + 1, run.T + 1):
        assert anchor in run.path(run.visit_order[t - 1])


def test_running_max_cost_counts_visits():
    for s in range(5):
        spec = ClueTreeSpec(3, 5, s)
        w = UniformClue(spec.q).weight_of
        run = run_search(gen_clue_tree(spec), CmaxCost(w), StaticRerooter(w), 3000)
        assert running_max_violations(run) == []
        assert bound_running_max(run).holds


def test_running_max_on_ctilde_order():
    for s in range(5):
        spec = ClueTreeSpec(3, 5, s)
        w = UniformClue(spec.q).weight_of
        run = run_search(gen_clue_tree(spec), CtildeCost(w), StaticRerooter(w), 3000)
        running = -math.inf
        for t in range(1, run.steps + 1):
            running = max(running, run.node_at(t).log_cost)
            assert t <= math.exp(running) * (1 + 1e-12)


class MinOfTwo:
    """log min(lambda/pi / w1, (1 + d/pi) / w2); monotone along paths."""

    monotone = True

    def __init__(self, w1, w2):
        self.lw1, self.lw2 = math.log(w1), math.log(w2)

    def root(self, node):
        return min(-self.lw1, -self.lw2), None

    def child(self, parent, child, nodes):
        one_plus_dop = math.log1p(math.exp(dop_cost(child)))
        return min(sop_cost(child) - self.lw1, one_plus_dop - self.lw2), None


def test_monotone_composition_shares_search_time():
    from rootlts.rerooting import NullRerooter

    run = run_search(LeftRightTree(0.25), MinOfTwo(0.6, 0.4), NullRerooter(), 2000)
    for t in range(1, run.steps + 1):
        assert t <= math.exp(run.node_at(t).log_cost) * (1 + 1e-12)


def test_lower_bound_sanity_small():
    rep = check_lower_bound_sanity(3, 4, 500)
    assert 20 <= rep.mean_T <= 320 and rep.ok
    assert check_lower_bound_sanity(1, 1, 20).mean_T >= 2
