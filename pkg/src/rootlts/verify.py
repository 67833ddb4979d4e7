"""Oracles and bound evaluators for checking search guarantees on real runs.

Bounds are evaluated from a :class:`PathTrace`, the data a run leaves along
the root-to-target path: visit steps, conditional probabilities, weights and
cumulative weights.  The underlying formulas are exposed as pure functions
over plain numbers, so hand-made traces can be checked too; they are exact
when given ``Fraction``/``int`` inputs.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .costs import rooted_sop_cost
from .domains.sokoban import REFERENCE_BRANCH_COUNTS, clue_count_estimate
from .domains.trees import FiniteTree
from .search import ContractViolation, SearchRun, derive_rng, reconstruct_path

Number = float | Fraction | int


def _sum(xs: Iterable[Number]) -> Number:
    xs = list(xs)
    if all(isinstance(x, (int, Fraction)) for x in xs):
        return sum(xs, Fraction(0))
    return math.fsum(float(x) for x in xs)


def _le_ulp(T: int, bound: Number) -> bool:
    """T <= bound, with the bound rounded up by one ulp when it is a float."""
    if isinstance(bound, (int, Fraction)):
        return T <= bound
    return T <= math.nextafter(float(bound), math.inf)


# --- bound formulas ---------------------------------------------------------


def segment_bound_value(cum_before: Sequence[Number], weights: Sequence[Number], segs: Sequence[Number]) -> Number:
    """Segment bound: sum_j (W_{<T_{j+1}} - W_{<T_j}) * max_{i >= j} segs[i] / weights[i].

    ``cum_before`` has m entries (W_{<T_1} .. W_{<T_m}); ``weights`` and
    ``segs`` have m - 1 entries, one per segment.
    """
    m = len(cum_before)
    if len(weights) != m - 1 or len(segs) != m - 1:
        raise ValueError("need m cumulative weights and m - 1 segments")
    ratios = [s / w for s, w in zip(segs, weights)]
    suffix = ratios[:]
    for j in range(m - 3, -1, -1):
        suffix[j] = max(suffix[j], suffix[j + 1])
    return _sum((cum_before[j + 1] - cum_before[j]) * suffix[j] for j in range(m - 1))


def max_segment_bound_value(cum_before_T: Number, weights: Sequence[Number], segs: Sequence[Number]) -> Number:
    """max_i W_{<T} / w_{T_i} * segs[i]."""
    if not segs or len(weights) != len(segs):
        raise ValueError("need one weight per segment")
    return max(cum_before_T / w * s for w, s in zip(weights, segs))


def robust_bound_value(
    input_cum_before_T: float,
    input_w1: float,
    input_cum_upto: Sequence[float],
    input_weights: Sequence[float],
    segs: Sequence[Number],
) -> float:
    """(1 + ln(W~_{<T} / w~_1)) * max_i W~_{<=T_i} / w~_{T_i} * segs[i]."""
    if input_w1 <= 0:
        raise ValueError("first input weight must be positive")
    factor = 1.0 + math.log(max(input_cum_before_T, input_w1) / input_w1)
    return factor * max(float(c) / w * float(s) for c, w, s in zip(input_cum_upto, input_weights, segs))


# --- traces and decompositions ---------------------------------------------


class BoundKind(str, Enum):
    SEGMENT = "segment"
    MAX_SEGMENT = "max-segment"
    ROOT_ONLY = "root-only"
    ROBUST = "robust"
    RUNNING_MAX = "running-max"


@dataclass(frozen=True)
class SubtaskDecomposition:
    """Visit steps T_1 = 1 < T_2 < ... < T_m of an ancestor chain ending at the target."""

    steps: tuple[int, ...]

    def __post_init__(self) -> None:
        s = self.steps
        if len(s) < 2 or s[0] != 1 or any(a >= b for a, b in zip(s, s[1:])):
            raise ContractViolation(f"not an increasing step chain from 1: {s}")

    @property
    def m(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class BoundReport:
    T_actual: int
    bound_value: float
    bound_kind: BoundKind
    decomposition: SubtaskDecomposition | None
    holds: bool

    @classmethod
    def make(cls, T: int, bound: Number, kind: BoundKind, decomp=None) -> "BoundReport":
        return cls(T, float(bound), kind, decomp, _le_ulp(T, bound))

    def to_dict(self) -> dict:
        return {
            "kind": self.bound_kind.value,
            "T": self.T_actual,
            "bound": self.bound_value,
            "holds": self.holds,
            "decomposition": list(self.decomposition.steps) if self.decomposition else None,
        }


@dataclass(frozen=True)
class PathTrace:
    """What the bounds need from the root-to-target path of a run.

    All per-node sequences are indexed by position on the path (root first).
    ``cond_probs[0]`` is unused (1 for the root).
    """

    T: int
    steps: tuple[int, ...]
    cond_probs: tuple[Number, ...]
    weights: tuple[float, ...]
    cum_before: tuple[float, ...]
    cum_before_T: float
    input_weights: tuple[float, ...] | None = None
    input_cum_upto: tuple[float, ...] | None = None
    input_cum_before_T: float | None = None
    input_w1: float | None = None
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.steps[-1] != self.T or self.steps[0] != 1:
            raise ContractViolation("path must run from step 1 to the target step")
        self._index.update({s: i for i, s in enumerate(self.steps)})

    @classmethod
    def from_run(cls, run: SearchRun, node_id: int | None = None) -> "PathTrace":
        if node_id is None:
            if run.solution is None:
                raise ContractViolation("run has no solution; pass a visited node id")
            node_id = run.solution[0]
        path = reconstruct_path(run, node_id)
        recs = [run.nodes[i] for i in path]
        if any(r.visit_step is None for r in recs):
            raise ContractViolation(f"node {node_id} or one of its ancestors was not visited")
        steps = tuple(r.visit_step for r in recs)
        T = steps[-1]
        kw = {}
        if run.input_weights is not None:
            kw = dict(
                input_weights=tuple(run.input_weights[s - 1] for s in steps),
                input_cum_upto=tuple(run.cum_input_upto(s) for s in steps),
                input_cum_before_T=run.cum_input_before(T),
                input_w1=run.input_weights[0],
            )
        return cls(
            T=T,
            steps=steps,
            cond_probs=tuple(math.exp(r.log_cond_prob) for r in recs),
            weights=tuple(r.reroot_weight for r in recs),
            cum_before=tuple(run.cum_weight_before(s) for s in steps),
            cum_before_T=run.cum_weight_before(T),
            **kw,
        )

    def positions(self, decomp: SubtaskDecomposition) -> list[int]:
        try:
            pos = [self._index[s] for s in decomp.steps]
        except KeyError as e:
            raise ContractViolation(f"step {e.args[0]} is not on the target's path") from None
        if pos[-1] != len(self.steps) - 1:
            raise ContractViolation("decomposition must end at the target")
        return pos

    def segment_cost(self, i: int, j: int) -> Number:
        """lambda/pi of path node j rooted at path node i."""
        return rooted_sop_cost(list(self.cond_probs[i + 1 : j + 1]))

    def segments(self, pos: Sequence[int]) -> list[Number]:
        return [self.segment_cost(a, b) for a, b in zip(pos, pos[1:])]

    def weighted_positions(self) -> list[int]:
        """Path positions usable as decomposition points (root and target always)."""
        last = len(self.steps) - 1
        return [i for i in range(last + 1) if i in (0, last) or self.weights[i] > 0]

    def decomposition(self, pos: Sequence[int]) -> SubtaskDecomposition:
        return SubtaskDecomposition(tuple(self.steps[i] for i in pos))


def _check_weights(trace: PathTrace, pos: Sequence[int]) -> list[float]:
    w = [trace.weights[i] for i in pos[:-1]]
    if any(x <= 0 for x in w):
        raise ContractViolation("every decomposition point but the last needs a positive weight")
    return w


def bound_segments(trace: PathTrace, decomp: SubtaskDecomposition) -> BoundReport:
    pos = trace.positions(decomp)
    w = _check_weights(trace, pos)
    cum = [trace.cum_before[i] for i in pos]
    return BoundReport.make(trace.T, segment_bound_value(cum, w, trace.segments(pos)), BoundKind.SEGMENT, decomp)


def bound_max_segment(trace: PathTrace, decomp: SubtaskDecomposition) -> BoundReport:
    pos = trace.positions(decomp)
    w = _check_weights(trace, pos)
    return BoundReport.make(trace.T, max_segment_bound_value(trace.cum_before_T, w, trace.segments(pos)), BoundKind.MAX_SEGMENT, decomp)


def bound_root_only(trace: PathTrace) -> BoundReport:
    d = SubtaskDecomposition((1, trace.T)) if trace.T > 1 else None
    lam = trace.segment_cost(0, len(trace.steps) - 1)
    return BoundReport.make(trace.T, trace.cum_before_T / trace.weights[0] * lam, BoundKind.ROOT_ONLY, d)


def bound_robust(trace: PathTrace, decomp: SubtaskDecomposition) -> BoundReport:
    if trace.input_weights is None:
        raise ContractViolation("trace has no input-weight record; run with a transforming rerooter")
    pos = trace.positions(decomp)
    iw = [trace.input_weights[i] for i in pos[:-1]]
    if any(x <= 0 for x in iw):
        raise ContractViolation("every decomposition point but the last needs a positive input weight")
    value = robust_bound_value(
        trace.input_cum_before_T,
        trace.input_w1,
        [trace.input_cum_upto[i] for i in pos[:-1]],
        iw,
        trace.segments(pos),
    )
    return BoundReport.make(trace.T, value, BoundKind.ROBUST, decomp)


def bound_running_max(run: SearchRun, step: int | None = None) -> BoundReport:
    """t <= cmax(n_t) for a run ordered by the cmax cost (log costs in the records)."""
    t = run.steps if step is None else step
    return BoundReport.make(t, math.exp(run.node_at(t).log_cost), BoundKind.RUNNING_MAX)


def running_max_violations(run: SearchRun) -> list[int]:
    return [t for t in range(1, run.steps + 1) if not bound_running_max(run, t).holds]


def sample_decompositions(trace: PathTrace) -> list[SubtaskDecomposition]:
    """{1, T}, all weighted path nodes, and every single-skip variant of the latter."""
    if trace.T == 1:
        return []
    full = trace.weighted_positions()
    out = {(0, full[-1]), tuple(full)}
    for k in range(1, len(full) - 1):
        out.add(tuple(full[:k] + full[k + 1 :]))
    return [trace.decomposition(p) for p in sorted(out)]


def min_decomposition(trace: PathTrace) -> tuple[SubtaskDecomposition, BoundReport]:
    """Decomposition minimizing the max-of-segments bound, preferring fewer segments.

    Minimax dynamic program over the weighted path nodes.
    """
    cand = trace.weighted_positions()
    k = len(cand)
    best: list[tuple[Number, int] | None] = [None] * k
    back = [0] * k
    best[0] = (0, 0)
    for j in range(1, k):
        for i in range(j):
            if best[i] is None:
                continue
            ratio = trace.segment_cost(cand[i], cand[j]) / trace.weights[cand[i]]
            val = (max(best[i][0], ratio), best[i][1] + 1)
            if best[j] is None or val < best[j]:
                best[j] = val
                back[j] = i
    chain = [k - 1]
    while chain[-1] != 0:
        chain.append(back[chain[-1]])
    pos = [cand[i] for i in reversed(chain)]
    d = trace.decomposition(pos)
    return d, bound_max_segment(trace, d)


def min_decomposition_exhaustive(trace: PathTrace) -> tuple[SubtaskDecomposition, BoundReport]:
    """Reference for :func:`min_decomposition` by enumerating all subsets."""
    cand = trace.weighted_positions()
    inner = cand[1:-1]
    best = None
    for r in range(len(inner) + 1):
        for sub in itertools.combinations(inner, r):
            pos = [cand[0], *sub, cand[-1]]
            segs = trace.segments(pos)
            val = max(s / trace.weights[i] for s, i in zip(segs, pos))
            if best is None or val < best[0]:
                best = (val, pos)
    d = trace.decomposition(best[1])
    return d, bound_max_segment(trace, d)


def check_bounds(trace: PathTrace, robust: bool = False) -> list[BoundReport]:
    """Segment and max-segment bounds (plus the robust bound) on every sampled decomposition, and the root-only bound."""
    if trace.T == 1:
        return []
    reports = [bound_root_only(trace)]
    decomps = sample_decompositions(trace)
    decomps.append(min_decomposition(trace)[0])
    for d in decomps:
        reports.append(bound_segments(trace, d))
        reports.append(bound_max_segment(trace, d))
        if robust:
            reports.append(bound_robust(trace, d))
    return reports


# --- self-counting ----------------------------------------------------------


@dataclass
class SelfCountingReport:
    thetas_checked: int = 0
    violations: list[tuple[Number, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_self_counting(
    cost: Sequence[Number] | Callable[[int], Number],
    tree: FiniteTree,
    thetas: Iterable[Number] | None = None,
    lower_bound: bool = False,
    theta_max: Number | None = None,
) -> SelfCountingReport:
    """Check |{n : cost(n) <= theta}| <= theta over a grid of theta.

    With ``lower_bound`` also check the count exceeds (theta - 1)/B, B the
    average number of children (``tree.arity``) of the selected nodes.  The
    default grid is every distinct cost up to ``theta_max`` plus midpoints.
    Costs are compared exactly when they are Fractions.
    """
    n = len(tree)
    costs = [cost(i) for i in range(n)] if callable(cost) else list(cost)
    order = sorted(range(n), key=costs.__getitem__)
    sorted_costs = [costs[i] for i in order]
    if thetas is None:
        distinct = sorted(set(c for c in sorted_costs if theta_max is None or c <= theta_max))
        grid = list(distinct)
        grid += [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
        thetas = sorted(grid)
    # prefix sums of arity in cost order
    arity_prefix = [0]
    for i in order:
        arity_prefix.append(arity_prefix[-1] + tree.arity[i])
    report = SelfCountingReport()
    for th in thetas:
        cnt = bisect.bisect_right(sorted_costs, th)
        report.thetas_checked += 1
        if cnt > th:
            report.violations.append((th, cnt, "upper"))
        if lower_bound and cnt > 0:
            B = Fraction(arity_prefix[cnt], cnt)
            if not cnt > (th - 1) / B:
                report.violations.append((th, cnt, "lower"))
    return report


def composition_costs(bases: Sequence[Sequence[Number]], weights: Sequence[Number]) -> list[Number]:
    """min_i c_i(n) / w_i per node, skipping zero weights."""
    n = len(bases[0])
    out = []
    for k in range(n):
        out.append(min(b[k] / w for b, w in zip(bases, weights) if w > 0))
    return out


def inverse_distribution_cost(n: int, seed: int) -> list[Fraction]:
    """1/p(n) for a random distribution p over n nodes; self-counting by construction."""
    rng = derive_rng(seed, 11)
    raw = [int(x) for x in rng.integers(1, 50, size=n)]
    total = sum(raw) + int(rng.integers(0, 50))  # leave some mass off the tree
    return [Fraction(total, r) for r in raw]


# --- run properties ---------------------------------------------------------


def visit_count_violations(run: SearchRun) -> list[int]:
    """Steps t with t > lambda/pi(n_t) (empty for LTS with lambda/pi)."""
    out = []
    for t in range(1, run.steps + 1):
        rec = run.node_at(t)
        lam_pi = math.exp(math.log(rec.slenderness) - rec.log_path_prob)
        if t > math.nextafter(lam_pi, math.inf) * (1 + 1e-12):
            out.append(t)
    return out


@dataclass
class TreeToPathReport:
    pairs: int = 0
    max_abs_err: float = 0.0
    violations: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_tree_to_path(run: SearchRun, pairs: int = 100, seed: int = 0, tol: float = 1e-9) -> TreeToPathReport:
    """For sampled visited n_j < n_t: max cost over visits in (j, t] equals max over the path below n_j.

    Costs are the log-costs stored at insertion.
    """
    rep = TreeToPathReport()
    if run.steps < 2:
        return rep
    costs = run.visit_costs()
    rng = derive_rng(seed, 3)
    for _ in range(pairs):
        t = int(rng.integers(2, run.steps + 1))
        path = reconstruct_path(run, run.visit_order[t - 1])
        k = int(rng.integers(0, len(path) - 1))
        j = run.nodes[path[k]].visit_step
        lhs = max(costs[j:t])
        rhs = max(run.nodes[p].log_cost for p in path[k + 1 :])
        err = abs(lhs - rhs)
        rep.pairs += 1
        rep.max_abs_err = max(rep.max_abs_err, err)
        if err > tol * max(1.0, abs(rhs)):
            rep.violations.append((j, t))
    return rep


@dataclass
class LowerBoundSanity:
    a: int
    q: int
    trials: int
    mean_T: float
    max_T: int
    lower: float
    upper: float
    per_instance_ok: bool

    @property
    def ok(self) -> bool:
        return self.lower <= self.mean_T <= self.upper and self.per_instance_ok


def check_lower_bound_sanity(a: int, q: int, trials: int, seed: int = 0) -> LowerBoundSanity:
    """Mean visits of rootlts with known-q clue weights over seeded clue trees."""
    from .costs import RootedCost
    from .domains.trees import ClueTreeSpec, gen_clue_tree
    from .rerooting import UniformClue
    from .search import run_search

    Ts = []
    ok = True
    cap = q * (2 ** (a + 1) - 1)
    for s in range(trials):
        env = gen_clue_tree(ClueTreeSpec(a, q, seed + s))
        run = run_search(env, RootedCost(), UniformClue(q), cap + 1)
        if run.T is None:
            ok = False
            Ts.append(cap + 1)
            continue
        ok &= run.T <= cap
        Ts.append(run.T)
    return LowerBoundSanity(
        a, q, trials, math.fsum(Ts) / trials, max(Ts), (q + 1) * 2 ** (a - 1), 4 * (q + 1) * 2**a, ok
    )


# --- reference-solution arithmetic ----------------------------------------


def branch_counts_sop(counts: Sequence[int]) -> int:
    """Exact lambda/pi of the node reached through a path with these child counts."""
    v = rooted_sop_cost([Fraction(1, b) for b in counts])
    return int(v) if v.denominator == 1 else v


@dataclass(frozen=True)
class ReferenceSolutionNumbers:
    segment_end_sop: tuple[int, ...]
    segment_costs: tuple[int, ...]
    clue_counts: tuple[int, ...]
    bound_no_split: int
    bound_all_clues: int
    bound_skip_first: int
    bound_last_clue_only: int
    telescoping_ok: bool


def reference_solution_numbers(
    groups: Sequence[Sequence[int]] = REFERENCE_BRANCH_COUNTS, n_cells: int = 89, cum_weight: int = 4
) -> ReferenceSolutionNumbers:
    """Exact costs and bounds along a solution split at its clue nodes.

    ``groups`` are the per-action child counts between consecutive clue nodes;
    clue weights are 1/M_z with M_z the clue-count estimate.
    """
    flat: list[int] = []
    ends = []
    for g in groups:
        flat.extend(g)
        ends.append(branch_counts_sop(flat))
    segs = [branch_counts_sop(g) for g in groups[1:]]
    M = [clue_count_estimate(n_cells, z) for z in range(1, len(groups))]
    W = cum_weight
    no_split = W * ends[-1]
    all_clues = max_segment_bound_value(W, [1] + [Fraction(1, m) for m in M], [ends[0]] + segs)
    skip_first = max_segment_bound_value(W, [1] + [Fraction(1, m) for m in M[1:]], [ends[1]] + segs[1:])
    last_only = max_segment_bound_value(W, [1, Fraction(1, M[-1])], [ends[-2], segs[-1]])
    # (lam/pi(n | a) - 1)/pi(a) telescopes over consecutive clue nodes from the root
    tele = True
    acc = Fraction(ends[0] - 1)
    prob = Fraction(1)
    for b in groups[0]:
        prob /= b
    for g, end in zip(groups[1:], ends[1:]):
        acc += (branch_counts_sop(g) - 1) / prob
        tele &= acc == end - 1
        for b in g:
            prob /= b
    return ReferenceSolutionNumbers(
        tuple(ends), tuple(segs), tuple(M), int(no_split), int(all_clues), int(skip_first), int(last_only), tele
    )
