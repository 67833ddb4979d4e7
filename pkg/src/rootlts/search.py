"""Best-first search engine with rerooting weights and full run tracing.

The engine is generic over three collaborators:

* an :class:`Environment` that generates children with conditional policy
  probabilities and exposes goal tests and signals (clues, rewards),
* a cost model (see :mod:`rootlts.costs`) that assigns a log-cost to every
  generated node at insertion time,
* a rerooter (see :mod:`rootlts.rerooting`) that assigns a nonnegative weight
  to every visited node.

Costs are computed once, when a node is inserted in the queue.  At that point
every ancestor of the node has been visited and weighted, so costs that depend
on ancestor weights are fully determined.  Ties are broken FIFO.
"""
from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np


class SearchError(Exception):
    """Base class for search failures."""


class NumericFault(SearchError, ArithmeticError):
    """A cost or weight came out as NaN (or otherwise unusable)."""

    def __init__(self, message: str, node_id: int | None = None):
        super().__init__(message)
        self.node_id = node_id


class ContractViolation(SearchError, RuntimeError):
    """A precondition of an operation does not hold."""


class NodeNotFound(SearchError, LookupError):
    pass


@dataclass(frozen=True)
class Signal:
    """What a node tells the search when it is reached.

    ``clue_type`` is set for typed clues (Sokoban: number of boxes on goals);
    ``clue`` is the generic membership bit and is implied by ``clue_type``.
    """

    clue: bool = False
    clue_type: int | None = None
    reward: float = 0.0

    def kinds(self) -> list[str]:
        out = []
        if self.clue or self.clue_type is not None:
            out.append("clue")
        if self.clue_type is not None:
            out.append(f"clue{self.clue_type}")
        if self.reward:
            out.append("reward")
        return out

    @property
    def is_clue(self) -> bool:
        return self.clue or self.clue_type is not None


NO_SIGNAL = Signal()


@runtime_checkable
class Environment(Protocol):
    """State generator consumed by :func:`run_search`.

    ``expand`` must be deterministic and return children in a fixed order.
    Conditional probabilities of the children of a state sum to at most 1, and
    to exactly 1 when ``proper`` is true.
    """

    proper: bool

    def root(self) -> Any: ...

    def expand(self, state: Any) -> Sequence[tuple[Any, float]]: ...

    def is_goal(self, state: Any) -> bool: ...

    def signal(self, parent: Any | None, state: Any) -> Signal: ...


@dataclass(slots=True)
class NodeRecord:
    id: int
    parent: int | None
    depth: int
    log_cond_prob: float
    log_path_prob: float
    slenderness: float
    state: Any
    signal: Signal = NO_SIGNAL
    log_cost: float = 0.0
    attachment: Any = None
    visit_step: int | None = None
    reroot_weight: float | None = None

    @property
    def visited(self) -> bool:
        return self.visit_step is not None

    def mark_visited(self, step: int, weight: float) -> None:
        if self.visit_step is not None:
            raise ContractViolation(f"node {self.id} visited twice")
        self.visit_step = step
        self.reroot_weight = weight


@dataclass(frozen=True)
class VisitContext:
    """Everything a rerooter may look at when node ``node`` is visited at ``step``."""

    node: NodeRecord
    step: int
    counters: Mapping[str, int]
    cum_weight: float

    @property
    def signal(self) -> Signal:
        return self.node.signal


class Rerooter(Protocol):
    def weight(self, ctx: VisitContext) -> float: ...


class StopReason(str, Enum):
    GOAL = "goal"
    BUDGET = "budget"
    EMPTY = "empty"


class KahanSum:
    """Neumaier-compensated running sum."""

    __slots__ = ("total", "_comp")

    def __init__(self, start: float = 0.0):
        self.total = float(start)
        self._comp = 0.0

    def add(self, x: float) -> float:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self._comp += (self.total - t) + x
        else:
            self._comp += (x - t) + self.total
        self.total = t
        return self.value

    @property
    def value(self) -> float:
        return self.total + self._comp


@dataclass
class SearchRun:
    nodes: list[NodeRecord]
    visit_order: list[int] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    cum_weight_prefix: list[float] = field(default_factory=list)
    input_weights: list[float] | None = None
    signal_steps: dict[str, list[int]] = field(default_factory=dict)
    solution: tuple[int, int] | None = None
    stop_reason: StopReason = StopReason.EMPTY
    peak_queue: int = 0

    @property
    def steps(self) -> int:
        return len(self.visit_order)

    @property
    def solved(self) -> bool:
        return self.solution is not None

    @property
    def T(self) -> int | None:
        return None if self.solution is None else self.solution[1]

    def node_at(self, step: int) -> NodeRecord:
        return self.nodes[self.visit_order[step - 1]]

    def weight_at(self, step: int) -> float:
        return self.weights[step - 1]

    def cum_weight_before(self, step: int) -> float:
        """W_{<step}: total weight of the visits strictly before ``step``."""
        return 0.0 if step <= 1 else self.cum_weight_prefix[step - 2]

    def cum_weight_upto(self, step: int) -> float:
        return 0.0 if step < 1 else self.cum_weight_prefix[step - 1]

    def cum_input_before(self, step: int) -> float:
        if self.input_weights is None:
            raise ContractViolation("run carries no input-weight trace")
        return math.fsum(self.input_weights[: step - 1])

    def cum_input_upto(self, step: int) -> float:
        if self.input_weights is None:
            raise ContractViolation("run carries no input-weight trace")
        return math.fsum(self.input_weights[:step])

    def count_at(self, kind: str, step: int) -> int:
        """Number of ``kind`` signals observed up to and including ``step``."""
        return bisect_right(self.signal_steps.get(kind, []), step)

    def visit_costs(self) -> list[float]:
        return [self.nodes[i].log_cost for i in self.visit_order]

    def path(self, node_id: int) -> list[int]:
        return reconstruct_path(self, node_id)


def reconstruct_path(run: SearchRun, node_id: int) -> list[int]:
    """Node ids from the root down to ``node_id`` (inclusive)."""
    if not 0 <= node_id < len(run.nodes):
        raise NodeNotFound(f"unknown node id {node_id}")
    path = []
    cur: int | None = node_id
    while cur is not None:
        path.append(cur)
        cur = run.nodes[cur].parent
    path.reverse()
    return path


def derive_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent counter-based (Philox) stream number ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(seed & (2**64 - 1), spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def _slenderness(parent_lambda: float, p: float) -> float:
    return parent_lambda * p + 1.0


def run_search(
    env: Environment,
    cost_model: Any,
    rerooter: Rerooter,
    budget: int,
    seed: int = 0,
    observe_at_generation: bool | None = None,
    stop_at_goal: bool = True,
) -> SearchRun:
    """Best-first search on ``env`` ordered by ``cost_model``, weighted by ``rerooter``.

    Visits at most ``budget`` nodes.  At each visit the rerooter is queried
    (a zero weight at the root is replaced by 1, so rooted costs stay finite),
    then the children are generated and pushed with their insertion-time cost.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if observe_at_generation is None:
        observe_at_generation = bool(getattr(env, "observe_at_generation", False))
    reset = getattr(rerooter, "reset", None)
    if reset is not None:
        reset(seed)

    nodes: list[NodeRecord] = []
    run = SearchRun(nodes=nodes)
    counters: dict[str, int] = {}
    cum = KahanSum()

    def observe(rec: NodeRecord, step: int) -> None:
        for kind in rec.signal.kinds():
            counters[kind] = counters.get(kind, 0) + 1
            run.signal_steps.setdefault(kind, []).append(step)

    root_state = env.root()
    root = NodeRecord(0, None, 0, 0.0, 0.0, 1.0, root_state, env.signal(None, root_state))
    root.log_cost, root.attachment = cost_model.root(root)
    nodes.append(root)
    if observe_at_generation:
        observe(root, 1)
    heap: list[tuple[float, int]] = [(root.log_cost, 0)]
    t = 0
    while heap:
        if t >= budget:
            run.stop_reason = StopReason.BUDGET
            break
        _, nid = heapq.heappop(heap)
        rec = nodes[nid]
        t += 1
        if not observe_at_generation:
            observe(rec, t)
        w = float(rerooter.weight(VisitContext(rec, t, counters, cum.value)))
        if math.isnan(w) or w < 0:
            raise NumericFault(f"rerooter returned {w} at step {t}", nid)
        if t == 1 and w == 0.0:
            w = 1.0
        rec.mark_visited(t, w)
        run.visit_order.append(nid)
        run.weights.append(w)
        run.cum_weight_prefix.append(cum.add(w))
        if env.is_goal(rec.state):
            run.solution = (nid, t)
            if stop_at_goal:
                run.stop_reason = StopReason.GOAL
                break
        for child_state, p in env.expand(rec.state):
            if not 0.0 < p <= 1.0:
                raise ContractViolation(f"conditional probability {p} outside (0, 1]")
            cid = len(nodes)
            lp = math.log(p)
            child = NodeRecord(
                cid,
                nid,
                rec.depth + 1,
                lp,
                rec.log_path_prob + lp,
                _slenderness(rec.slenderness, p),
                child_state,
                env.signal(rec.state, child_state),
            )
            child.log_cost, child.attachment = cost_model.child(rec, child, nodes)
            if math.isnan(child.log_cost):
                raise NumericFault(f"cost model returned NaN for node {cid}", cid)
            nodes.append(child)
            if observe_at_generation:
                observe(child, t)
            heapq.heappush(heap, (child.log_cost, cid))
        if len(heap) > run.peak_queue:
            run.peak_queue = len(heap)
    else:
        run.stop_reason = StopReason.EMPTY
    inputs = getattr(rerooter, "inputs", None)
    if inputs is not None:
        run.input_weights = list(inputs)
    return run
