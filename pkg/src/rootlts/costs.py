"""Cost functions for best-first search.

All models return costs in natural-log space: BFS only needs the order of
costs, and path probabilities underflow long before slenderness does.
Slenderness-like quantities (``lambda``, ``lambda_prime``) stay in linear
space since they are bounded by depth + 1.

Models
------
``SlendernessCost``   lambda(n) / pi(n), the LTS cost.
``DepthCost``         d(n) / pi(n), the original LTS cost.
``BreadthCost``       depth; plain breadth-first order under FIFO ties.
``RootedCost``        the rerooted compound cost (min over weighted strict
                      ancestors a of (lambda/pi(n | a) - 1) / w_a), updated
                      incrementally through filtered ancestor sets.
``CtildeCost`` / ``CmaxCost``  test-only variants with a self term, for
                      rerooters whose weights are known at generation time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .search import ContractViolation, NodeRecord, Signal

NEG_INF = float("-inf")


def _logsumexp(xs: Sequence[float]) -> float:
    m = max(xs)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def slenderness_update(lambda_parent: float, cond_prob: float) -> float:
    """Slenderness of a child: ``lambda_parent * cond_prob + 1``."""
    if not 0 < cond_prob <= 1:
        raise ValueError(f"cond_prob must be in (0, 1], got {cond_prob}")
    if lambda_parent < 1:
        raise ValueError(f"slenderness is at least 1, got {lambda_parent}")
    return lambda_parent * cond_prob + 1


def sop_cost(node: NodeRecord) -> float:
    """log(lambda/pi(n))."""
    return math.log(node.slenderness) - node.log_path_prob


def dop_cost(node: NodeRecord) -> float:
    """log(d/pi(n)); the root is mapped to 0."""
    if node.depth == 0:
        return 0.0
    return math.log(node.depth) - node.log_path_prob


def rooted_sop_cost(path_cond_probs: Sequence[float | Fraction]) -> float | Fraction:
    """lambda/pi(n | n_a) from the conditional probabilities below n_a.

    This is the sum, over every prefix of the path (the empty prefix
    included), of the inverse product of the prefix.  Exact when every input
    is a ``Fraction``.
    """
    if path_cond_probs and all(isinstance(p, Fraction) for p in path_cond_probs):
        lam, prob = Fraction(1), Fraction(1)
        for p in path_cond_probs:
            if not 0 < p <= 1:
                raise ValueError(f"probability {p} outside (0, 1]")
            lam = lam * p + 1
            prob *= p
        return lam / prob
    lam, log_prob = 1.0, 0.0
    for p in path_cond_probs:
        if not 0 < p <= 1:
            raise ValueError(f"probability {p} outside (0, 1]")
        lam = lam * p + 1
        log_prob += math.log(p)
    return math.exp(math.log(lam) - log_prob)


def log_rooted_sop(log_cond_probs: Sequence[float]) -> float:
    """log lambda/pi(n | n_a) from log conditional probabilities."""
    lam, log_prob = 1.0, 0.0
    for lp in log_cond_probs:
        lam = lam * math.exp(lp) + 1
        log_prob += lp
    return math.log(lam) - log_prob


# --- ancestor sets ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class AncestorCostEntry:
    """A weighted ancestor ``a`` of node ``n`` with its rooted cost towards n.

    ``lambda_prime`` is c_a(n) * pi(n | a) and satisfies the recursion
    ``lambda_prime(child) = lambda_prime(n) * pi(child | n) + 1``.
    """

    ancestor: int
    lambda_prime: float
    log_rel_prob: float
    log_weight: float

    @property
    def log_cost(self) -> float:
        """log(c_a(n) / w_a); -inf when n is a itself."""
        if self.lambda_prime == 0.0:
            return NEG_INF
        return math.log(self.lambda_prime) - self.log_rel_prob - self.log_weight

    def descend(self, cond_prob: float, log_cond_prob: float) -> "AncestorCostEntry":
        return AncestorCostEntry(
            self.ancestor,
            self.lambda_prime * cond_prob + 1.0,
            self.log_rel_prob + log_cond_prob,
            self.log_weight,
        )


AncestorSet = tuple[AncestorCostEntry, ...]


def ancestor_set_update(
    parent_set: AncestorSet,
    parent: NodeRecord,
    cond_prob: float,
    parent_weight: float | None = None,
) -> tuple[float, AncestorSet]:
    """Cost of a child of ``parent`` and the ancestor set handed down to it.

    Candidates are the parent's retained set plus the parent itself when its
    weight is positive.  The returned cost is the minimum over candidates.
    A candidate ``b`` is dropped when the argmin ``a*`` dominates it, i.e.
    when ``pi(a*)/w_a* <= pi(b)/w_b``: then ``a*`` stays at least as cheap as
    ``b`` on every descendant.  The test is run in the relative form
    ``1/(w pi(child | .))``, which needs less precision.
    """
    if parent_weight is None:
        parent_weight = parent.reroot_weight
    if parent_weight is None or parent.visit_step is None:
        raise ContractViolation(f"parent {parent.id} has not been visited")
    if not 0 < cond_prob <= 1:
        raise ValueError(f"cond_prob must be in (0, 1], got {cond_prob}")
    lp = math.log(cond_prob)
    cands = [e.descend(cond_prob, lp) for e in parent_set]
    if parent_weight > 0:
        cands.append(AncestorCostEntry(parent.id, 1.0, lp, math.log(parent_weight)))
    if not cands:
        raise ContractViolation(f"no weighted ancestor above node {parent.id}'s child")
    costs = [e.log_cost for e in cands]
    best = min(range(len(cands)), key=costs.__getitem__)
    star = cands[best]
    pivot = -star.log_weight - star.log_rel_prob
    kept = tuple(
        e for i, e in enumerate(cands) if i == best or pivot > -e.log_weight - e.log_rel_prob
    )
    return costs[best], kept


# --- cost models -----------------------------------------------------------


class SlendernessCost:
    name = "lts-sop"
    monotone = True

    def root(self, node: NodeRecord) -> tuple[float, None]:
        return 0.0, None

    def child(self, parent: NodeRecord, child: NodeRecord, nodes) -> tuple[float, None]:
        return sop_cost(child), None


class DepthCost:
    name = "lts-dop"
    monotone = True

    def root(self, node: NodeRecord) -> tuple[float, None]:
        return 0.0, None

    def child(self, parent: NodeRecord, child: NodeRecord, nodes) -> tuple[float, None]:
        return dop_cost(child), None


class BreadthCost:
    name = "bfs"
    monotone = True

    def root(self, node: NodeRecord) -> tuple[float, None]:
        return 0.0, None

    def child(self, parent: NodeRecord, child: NodeRecord, nodes) -> tuple[float, None]:
        return float(child.depth), None


class RootedCost:
    """The rerooted compound cost, with incremental ancestor sets.

    With ``check_naive`` set, every child cost is compared with the direct
    O(depth^2) evaluation and a mismatch raises :class:`ContractViolation`.
    """

    name = "rootlts"
    monotone = False

    def __init__(self, check_naive: bool = False, rtol: float = 1e-9):
        self.check_naive = check_naive
        self.rtol = rtol

    def root(self, node: NodeRecord) -> tuple[float, AncestorSet]:
        return crlts_root_cost(), ()

    def child(self, parent: NodeRecord, child: NodeRecord, nodes) -> tuple[float, AncestorSet]:
        cost, aset = ancestor_set_update(parent.attachment, parent, math.exp(child.log_cond_prob))
        if self.check_naive:
            ref = _naive_on_path(_path(parent.id, nodes) + [child], None)
            if not math.isclose(cost, ref, rel_tol=self.rtol, abs_tol=self.rtol):
                raise ContractViolation(f"incremental cost {cost} != naive {ref} at node {child.id}")
        return cost, aset


def crlts_root_cost() -> float:
    return 0.0


WeightFn = Callable[[Signal], float]


class CtildeCost:
    """min over weighted ancestors-or-self a of lambda/pi(n | a) / w_a.

    Needs weights known at generation time, given by ``weight_of(signal)``;
    the search must use the same weights (``rerooting.StaticRerooter``).
    The attachment holds (log_weight, lambda, log_rel_prob) for every
    weighted ancestor-or-self, unfiltered.
    """

    name = "ctilde"
    monotone = False

    def __init__(self, weight_of: WeightFn):
        self.weight_of = weight_of

    def _own(self, node: NodeRecord, carried):
        w = self.weight_of(node.signal)
        if node.parent is None and w == 0:
            w = 1.0
        entries = list(carried)
        if w > 0:
            entries.append((math.log(w), 1.0, 0.0))
        if not entries:
            raise ContractViolation(f"no weighted ancestor-or-self for node {node.id}")
        cost = min(math.log(lam) - lr - lw for lw, lam, lr in entries)
        return cost, tuple(entries)

    def root(self, node: NodeRecord):
        return self._own(node, ())

    def child(self, parent: NodeRecord, child: NodeRecord, nodes):
        return self._own(child, _carry(parent.attachment, child))


def _carry(entries, child: NodeRecord):
    p = math.exp(child.log_cond_prob)
    return [(lw, lam * p + 1.0, lr + child.log_cond_prob) for lw, lam, lr in entries]


class CmaxCost(CtildeCost):
    """Running maximum of the c-tilde cost along the path; monotone."""

    name = "cmax"
    monotone = True

    def root(self, node: NodeRecord):
        return self._own(node, ())

    def child(self, parent: NodeRecord, child: NodeRecord, nodes):
        own, entries = self._own(child, _carry(parent.attachment, child))
        return max(parent.log_cost, own), entries


# --- naive oracles (test support) -----------------------------------------


def _path(node_id: int, records: Sequence[NodeRecord]) -> list[NodeRecord]:
    out = []
    cur: int | None = node_id
    while cur is not None:
        out.append(records[cur])
        cur = records[cur].parent
    out.reverse()
    return out


def _weight(rec: NodeRecord, weights: Mapping[int, float] | None) -> float:
    w = weights[rec.id] if weights is not None else rec.reroot_weight
    if w is None:
        raise ContractViolation(f"node {rec.id} has no weight")
    if rec.parent is None and w == 0:
        w = 1.0
    return w


def _log_rooted_terms(path: list[NodeRecord], start: int, end: int) -> list[float]:
    # log(1/pi(m | path[start])) for start <= m <= end
    base = path[start].log_path_prob
    return [base - path[k].log_path_prob for k in range(start, end + 1)]


def naive_crlts_cost(
    node_id: int, records: Sequence[NodeRecord], weights: Mapping[int, float] | None = None
) -> float:
    """Direct evaluation of the rerooted cost by summation over the path."""
    return _naive_on_path(_path(node_id, records), weights)


def _naive_on_path(path: list[NodeRecord], weights: Mapping[int, float] | None) -> float:
    if len(path) == 1:
        return 0.0
    best = math.inf
    last = len(path) - 1
    for i in range(last):
        w = _weight(path[i], weights)
        if w <= 0:
            continue
        # lambda/pi(n | a) - 1 sums the terms strictly below a
        val = _logsumexp(_log_rooted_terms(path, i, last)[1:]) - math.log(w)
        best = min(best, val)
    if best == math.inf:
        raise ContractViolation(f"no weighted strict ancestor for node {path[-1].id}")
    return best


def ctilde_cost(
    node_id: int, records: Sequence[NodeRecord], weights: Mapping[int, float] | None = None
) -> float:
    path = _path(node_id, records)
    last = len(path) - 1
    best = math.inf
    for i in range(last + 1):
        w = _weight(path[i], weights)
        if w <= 0:
            continue
        best = min(best, _logsumexp(_log_rooted_terms(path, i, last)) - math.log(w))
    if best == math.inf:
        raise ContractViolation(f"no weighted ancestor-or-self for node {node_id}")
    return best


def cmax_cost(
    node_id: int, records: Sequence[NodeRecord], weights: Mapping[int, float] | None = None
) -> float:
    return max(ctilde_cost(r.id, records, weights) for r in _path(node_id, records))
