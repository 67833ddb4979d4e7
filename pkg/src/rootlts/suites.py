"""Verification battery behind ``rootlts verify``.

Each suite returns rows ``{"suite", "check", "passed", "detail"}``.
"""
from __future__ import annotations

import math
from typing import Callable

from .costs import CmaxCost, RootedCost, naive_crlts_cost, rooted_sop_cost
from .domains.trees import ClueTreeSpec, DChain, LeftRightTree, gen_clue_tree, random_proper_tree
from .rerooting import ClueIndicator, RewardRerooter, StaticRerooter, UniformClue
from .search import derive_rng, run_search
from .verify import (
    PathTrace,
    check_bounds,
    check_self_counting,
    check_tree_to_path,
    running_max_violations,
    reference_solution_numbers,
)


def _row(suite: str, check: str, passed: bool, detail) -> dict:
    return {"suite": suite, "check": check, "passed": bool(passed), "detail": detail}


def suite_sokoban_reference(seed: int) -> list[dict]:
    n = reference_solution_numbers()
    s = "sokoban-reference"
    return [
        _row(s, "segment-end costs", n.segment_end_sop == (733, 7213, 795181, 195879469), list(n.segment_end_sop)),
        _row(s, "rooted segment costs", n.segment_costs == (31, 229, 393), list(n.segment_costs)),
        _row(s, "clue count estimates", n.clue_counts == (1143408, 125496, 3024), list(n.clue_counts)),
        _row(
            s,
            "decomposition bounds",
            (n.bound_all_clues, n.bound_skip_first, n.bound_last_clue_only) == (141782592, 114954336, 4753728),
            [n.bound_no_split, n.bound_all_clues, n.bound_skip_first, n.bound_last_clue_only],
        ),
        _row(s, "telescoping chain", n.telescoping_ok, n.telescoping_ok),
    ]


def suite_sccf(seed: int, trees: int = 20) -> list[dict]:
    bad = 0
    for k in range(trees):
        tree, theta = random_proper_tree(seed + k, 200)
        rep = check_self_counting(tree.sop(), tree, lower_bound=True, theta_max=theta)
        bad += not rep.ok
    return [_row("sccf", f"slenderness self-counting on {trees} random trees", bad == 0, {"failing_trees": bad})]


def suite_telescoping(seed: int, samples: int = 200) -> list[dict]:
    rng = derive_rng(seed, 5)
    worst = 0.0
    for _ in range(samples):
        L = int(rng.integers(2, 30))
        probs = [float(x) for x in rng.uniform(0.05, 1.0, size=L)]
        i, j = sorted(int(x) for x in rng.integers(0, L + 1, size=2))
        pa, pb = math.prod(probs[:i]), math.prod(probs[:j])
        lhs = (rooted_sop_cost(probs[i:]) - 1) / pa
        rhs = (rooted_sop_cost(probs[i:j]) - 1) / pa + (rooted_sop_cost(probs[j:]) - 1) / pb
        if lhs:
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return [_row("telescoping", "max relative error", worst <= 1e-9, worst)]


def suite_incremental(seed: int, nodes: int = 500) -> list[dict]:
    rng = derive_rng(seed, 9)
    choices = (0.0, 0.3, 1.0)

    class RandomWeights:
        def weight(self, ctx):
            return choices[int(rng.integers(3))]

    env = LeftRightTree(0.3)
    run = run_search(env, RootedCost(), RandomWeights(), nodes)
    worst = 0.0
    for rec in run.nodes[1:]:
        ref = naive_crlts_cost(rec.id, run.nodes)
        worst = max(worst, abs(rec.log_cost - ref) / max(1.0, abs(ref)))
    return [_row("incremental", "ancestor sets match direct evaluation", worst <= 1e-9, worst)]


def suite_bounds(seed: int, runs: int = 20) -> list[dict]:
    failed = checked = 0
    ttp_bad = 0
    for k in range(runs):
        env = gen_clue_tree(ClueTreeSpec(3 + k % 3, 4 + 4 * (k % 3), seed + k))
        run = run_search(env, RootedCost(), ClueIndicator(), 10**6)
        reports = check_bounds(PathTrace.from_run(run))
        checked += len(reports)
        failed += sum(not r.holds for r in reports)
        ttp_bad += not check_tree_to_path(run, 100, seed + k).ok
    for D in range(2, 11):
        run = run_search(DChain(D), RootedCost(), RewardRerooter(), 10**6)
        reports = check_bounds(PathTrace.from_run(run))
        checked += len(reports)
        failed += sum(not r.holds for r in reports)
    return [
        _row("bounds", "segment bounds on every sampled decomposition", failed == 0, {"checked": checked, "failed": failed}),
        _row("bounds", "tree-to-path equality", ttp_bad == 0, {"failing_runs": ttp_bad}),
    ]


def suite_cmax(seed: int, runs: int = 10) -> list[dict]:
    bad = 0
    for k in range(runs):
        spec = ClueTreeSpec(3, 4, seed + k)
        env = gen_clue_tree(spec)
        weight_of = UniformClue(spec.q).weight_of
        run = run_search(env, CmaxCost(weight_of), StaticRerooter(weight_of), 2000)
        bad += bool(running_max_violations(run))
    return [_row("cmax", "t <= cmax(n_t) at every step", bad == 0, {"failing_runs": bad})]


SUITES: dict[str, Callable[[int], list[dict]]] = {
    "sokoban-reference": suite_sokoban_reference,
    "sccf": suite_sccf,
    "telescoping": suite_telescoping,
    "incremental": suite_incremental,
    "bounds": suite_bounds,
    "cmax": suite_cmax,
}


def run_suites(names, seed: int = 0) -> list[dict]:
    rows = []
    for n in names:
        rows.extend(SUITES[n](seed))
    return rows

