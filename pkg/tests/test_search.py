import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import ExplicitTree, ListRerooter
from rootlts.costs import BreadthCost, RootedCost, SlendernessCost
from rootlts.domains.trees import BinaryTree, ChainEnv, DChain, LeftRightTree, depth_of
from rootlts.rerooting import NullRerooter, RewardRerooter
from rootlts.search import (
    ContractViolation,
    KahanSum,
    NodeNotFound,
    NumericFault,
    StopReason,
    derive_rng,
    reconstruct_path,
    run_search,
)


def test_dchain_rooted_run_within_budget_bound():
    run = run_search(DChain(4), RootedCost(), RewardRerooter(), 10_000)
    assert run.solved
    assert run.T <= (4 + 1) * 2**4


def test_goal_at_root():
    env = ChainEnv([], goal_depth=0)
    run = run_search(env, SlendernessCost(), NullRerooter(), 10)
    assert run.T == 1
    assert run.visit_order == [0]
    assert run.stop_reason is StopReason.GOAL


def test_binary_tree_leaf_rank_matches_sorted_costs():
    for leaf in range(8, 16):
        env = BinaryTree(goal=leaf, max_depth=3)
        run = run_search(env, SlendernessCost(), NullRerooter(), 100)
        # lambda/pi = 2^(d+1) - 1 under the uniform policy; heap order = insertion order
        ranked = sorted(range(1, 16), key=lambda k: (Fraction(2 ** (depth_of(k) + 1) - 1), k))
        assert run.T == ranked.index(leaf) + 1


def test_budget_and_empty_stops():
    run = run_search(BinaryTree(), SlendernessCost(), NullRerooter(), 7)
    assert run.stop_reason is StopReason.BUDGET and run.steps == 7 and not run.solved
    run = run_search(BinaryTree(max_depth=2), SlendernessCost(), NullRerooter(), 100)
    assert run.stop_reason is StopReason.EMPTY and run.steps == 7


def test_budget_zero_rejected():
    with pytest.raises(ValueError):
        run_search(BinaryTree(), SlendernessCost(), NullRerooter(), 0)


class NanCost(SlendernessCost):
    def child(self, parent, child, nodes):
        return (math.nan, None) if child.depth == 2 else super().child(parent, child, nodes)


def test_nan_cost_raises_numeric_fault_with_node_id():
    with pytest.raises(NumericFault) as e:
        run_search(BinaryTree(), NanCost(), NullRerooter(), 100)
    assert e.value.node_id is not None


def test_negative_weight_is_numeric_fault():
    with pytest.raises(NumericFault):
        run_search(BinaryTree(), RootedCost(), ListRerooter([1.0, -1.0]), 10)


def test_bad_probability_is_contract_violation():
    env = ExplicitTree({0: [(1, 1.5)]})
    with pytest.raises(ContractViolation):
        run_search(env, SlendernessCost(), NullRerooter(), 10)


def test_reconstruct_path():
    run = run_search(ChainEnv([1.0] * 5), SlendernessCost(), NullRerooter(), 10)
    assert reconstruct_path(run, 0) == [0]
    assert reconstruct_path(run, 2) == [0, 1, 2]
    with pytest.raises(NodeNotFound):
        reconstruct_path(run, 99)


def test_root_weight_defaults_to_one():
    run = run_search(BinaryTree(), RootedCost(), NullRerooter(), 3)
    assert run.weights[0] == 1.0
    assert run.cum_weight_before(1) == 0.0
    assert run.cum_weight_before(2) == 1.0


def test_record_invariants_and_monotone_order():
    run = run_search(LeftRightTree(0.3), SlendernessCost(), NullRerooter(), 400)
    costs = run.visit_costs()
    assert all(a <= b for a, b in zip(costs, costs[1:]))
    for rec in run.nodes:
        assert 1.0 <= rec.slenderness <= rec.depth + 1 + 1e-12
        if rec.parent is None:
            assert rec.depth == 0 and rec.log_path_prob == 0.0 and rec.slenderness == 1.0
        else:
            par = run.nodes[rec.parent]
            assert rec.log_path_prob == pytest.approx(par.log_path_prob + rec.log_cond_prob)
            assert rec.slenderness == pytest.approx(par.slenderness * math.exp(rec.log_cond_prob) + 1)
    for t in range(2, run.steps + 1):
        rec = run.node_at(t)
        assert run.nodes[rec.parent].visit_step < t
    # lambda/pi self-counting on the visit order
    for t in range(1, run.steps + 1):
        rec = run.node_at(t)
        assert t <= rec.slenderness / math.exp(rec.log_path_prob) * (1 + 1e-12)


def test_cumulative_weights_consistent():
    rng = derive_rng(1, 0)
    ws = [float(x) for x in rng.uniform(0, 1, size=50)]
    run = run_search(BinaryTree(), RootedCost(), ListRerooter(ws), 50)
    prefix = run.cum_weight_prefix
    assert all(a <= b for a, b in zip(prefix, prefix[1:]))
    for t in range(1, 51):
        assert run.cum_weight_upto(t) - run.cum_weight_upto(t - 1) == pytest.approx(run.weight_at(t))


def test_determinism():
    a = run_search(DChain(6), RootedCost(), RewardRerooter(), 5000, seed=3)
    b = run_search(DChain(6), RootedCost(), RewardRerooter(), 5000, seed=3)
    assert a.visit_order == b.visit_order
    assert a.cum_weight_prefix == b.cum_weight_prefix


def test_fifo_ties_give_breadth_first_order():
    run = run_search(BinaryTree(max_depth=3), BreadthCost(), NullRerooter(), 100)
    assert [run.nodes[i].state for i in run.visit_order] == list(range(1, 16))


def test_observe_at_generation_counts_earlier():
    env = ExplicitTree({0: [(1, 0.5), (2, 0.5)], 1: [(3, 1.0)]}, clues={2})
    late = run_search(env, BreadthCost(), NullRerooter(), 100)
    early = run_search(env, BreadthCost(), NullRerooter(), 100, observe_at_generation=True)
    assert late.signal_steps["clue"] == [3]
    assert early.signal_steps["clue"] == [1]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=1, max_size=200))
def test_kahan_matches_fsum(xs):
    k = KahanSum()
    for x in xs:
        k.add(x)
    assert k.value == pytest.approx(math.fsum(xs), rel=1e-15, abs=1e-9)
