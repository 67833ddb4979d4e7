"""Synthetic tree environments.

Binary trees use heap numbering for states: the root is 1 and the children
of ``k`` are ``2k`` (left) and ``2k + 1`` (right), so depth is
``k.bit_length() - 1``.  Trees are expanded lazily; nothing infinite is ever
materialized.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from ..search import NO_SIGNAL, Signal, derive_rng

ROOT = 1


def depth_of(k: int) -> int:
    return k.bit_length() - 1


def is_ancestor_or_self(a: int, n: int) -> bool:
    shift = depth_of(n) - depth_of(a)
    return shift >= 0 and n >> shift == a


def subtree(k: int, depth: int) -> Iterable[int]:
    """All nodes of relative depth <= ``depth`` below ``k`` (inclusive)."""
    for d in range(depth + 1):
        base = k << d
        yield from range(base, base + (1 << d))


class BinaryTree:
    """Perfect infinite binary tree, uniform policy, optional goal/clues/rewards."""

    proper = True
    observe_at_generation = False

    def __init__(
        self,
        goal: int | None = None,
        clues: Iterable[int] = (),
        rewards: dict[int, float] | None = None,
        max_depth: int | None = None,
    ):
        self.goal = goal
        self.clues = frozenset(clues)
        self.rewards = dict(rewards or {})
        self.max_depth = max_depth
        if max_depth is not None:
            self.proper = False

    def root(self) -> int:
        return ROOT

    def expand(self, state: int) -> list[tuple[int, float]]:
        if self.max_depth is not None and depth_of(state) >= self.max_depth:
            return []
        return [(2 * state, 0.5), (2 * state + 1, 0.5)]

    def is_goal(self, state: int) -> bool:
        return state == self.goal

    def signal(self, parent: int | None, state: int) -> Signal:
        clue = state in self.clues
        reward = self.rewards.get(state, 0.0)
        if not clue and not reward:
            return NO_SIGNAL
        return Signal(clue=clue, reward=reward)


@dataclass(frozen=True)
class ClueTreeSpec:
    a: int
    q: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.a < 1 or self.q < 1:
            raise ValueError("clue trees need a >= 1 and q >= 1")


class ClueTree(BinaryTree):
    """Binary tree with q clue nodes, each within depth ``a`` of a clue ancestor.

    Placement: the root is a clue; every further clue picks a uniformly random
    already-placed clue as anchor, a uniform relative depth in [1, a] and a
    uniform descent path (redrawn if it lands on an existing clue).  The goal
    is uniform over the nodes within relative depth ``a`` of some clue.
    """

    def __init__(self, spec: ClueTreeSpec):
        rng = derive_rng(spec.seed, 0)
        placed = [ROOT]
        seen = {ROOT}
        while len(placed) < spec.q:
            anchor = placed[int(rng.integers(len(placed)))]
            off = int(rng.integers(1, spec.a + 1))
            node = (anchor << off) | int(rng.integers(1 << off))
            if node not in seen:
                seen.add(node)
                placed.append(node)
        region: set[int] = set()
        for c in placed:
            region.update(subtree(c, spec.a))
        self.region = sorted(region)
        goal = self.region[int(rng.integers(len(self.region)))]
        super().__init__(goal=goal, clues=placed)
        self.spec = spec
        self.clue_order = placed

    @property
    def n_qa(self) -> int:
        return len(self.region)


def gen_clue_tree(spec: ClueTreeSpec) -> ClueTree:
    return ClueTree(spec)


class DChain(BinaryTree):
    """Binary tree whose rightmost depth-D node is the goal (reward 1).

    The left child at depth i of the rightmost chain carries reward (D - i)/D.
    """

    def __init__(self, D: int):
        if D < 2:
            raise ValueError("D must be >= 2")
        rewards = {}
        for i in range(1, D + 1):
            rewards[(1 << (i + 1)) - 2] = (D - i) / D
        goal = (1 << (D + 1)) - 1
        rewards[goal] = 1.0
        super().__init__(goal=goal, rewards=rewards)
        self.D = D


def d_chain_env(D: int) -> DChain:
    return DChain(D)


class MisleadingReward(BinaryTree):
    """Reward alpha at the root's left child; goal (reward 1) under the right child.

    By default the goal is the rightmost node of depth ``goal_depth``.
    """

    def __init__(self, alpha: float, goal_depth: int, goal: int | None = None):
        if not 0 <= alpha < 1:
            raise ValueError("alpha must be in [0, 1)")
        if goal_depth < 2:
            raise ValueError("goal depth must be >= 2")
        if goal is None:
            goal = (1 << (goal_depth + 1)) - 1
        if depth_of(goal) != goal_depth or not is_ancestor_or_self(3, goal):
            raise ValueError("goal must descend from the root's right child at goal_depth")
        rewards = {goal: 1.0}
        if alpha > 0:
            rewards[2] = alpha
        super().__init__(goal=goal, rewards=rewards)
        self.alpha = alpha
        self.goal_depth = goal_depth


def misleading_reward_env(alpha: float, goal_depth: int) -> MisleadingReward:
    return MisleadingReward(alpha, goal_depth)


class ChainEnv:
    """Single path; the node at depth i has one child with probability cond_probs[i].

    The chain ends after ``len(cond_probs)`` edges.  Clue depths and rewards
    can be attached for bound-evaluation scenarios.
    """

    observe_at_generation = False

    def __init__(
        self,
        cond_probs: Sequence[float],
        goal_depth: int | None = None,
        clue_depths: Iterable[int] = (),
    ):
        for p in cond_probs:
            if not 0 < p <= 1:
                raise ValueError(f"probability {p} outside (0, 1]")
        self.cond_probs = list(cond_probs)
        self.goal_depth = len(self.cond_probs) if goal_depth is None else goal_depth
        self.clue_depths = frozenset(clue_depths)
        self.proper = all(p == 1 for p in self.cond_probs)

    def root(self) -> int:
        return 0

    def expand(self, d: int) -> list[tuple[int, float]]:
        if d >= len(self.cond_probs):
            return []
        return [(d + 1, self.cond_probs[d])]

    def is_goal(self, d: int) -> bool:
        return d == self.goal_depth

    def signal(self, parent: int | None, d: int) -> Signal:
        return Signal(clue=True) if d in self.clue_depths else NO_SIGNAL


def chain_env(cond_probs: Sequence[float], goal_depth: int | None = None) -> ChainEnv:
    return ChainEnv(cond_probs, goal_depth)


class DepthArityTree:
    """Uniform policy; nodes at depth d have ``arities[d]`` children.

    Nodes deeper than the arity list are leaves.  States are child-index tuples.
    """

    observe_at_generation = False

    def __init__(self, arities: Sequence[int], goal: tuple[int, ...] | None = None):
        if any(k < 1 for k in arities):
            raise ValueError("arities must be >= 1")
        self.arities = list(arities)
        self.goal = goal
        self.proper = False  # leaves at the bottom

    def root(self) -> tuple[int, ...]:
        return ()

    def expand(self, state: tuple[int, ...]) -> list[tuple[tuple[int, ...], float]]:
        d = len(state)
        if d >= len(self.arities):
            return []
        k = self.arities[d]
        return [(state + (i,), 1.0 / k) for i in range(k)]

    def is_goal(self, state) -> bool:
        return state == self.goal

    def signal(self, parent, state) -> Signal:
        return NO_SIGNAL


def depth_arity_env(arities: Sequence[int], goal: tuple[int, ...] | None = None) -> DepthArityTree:
    return DepthArityTree(arities, goal)


class LeftRightTree(BinaryTree):
    """Binary tree with left probability p and right probability 1 - p."""

    def __init__(self, p: float, goal: int | None = None, max_depth: int | None = None):
        if not 0 < p < 1:
            raise ValueError("p must be in (0, 1)")
        super().__init__(goal=goal, max_depth=max_depth)
        self.p = p

    def expand(self, state: int) -> list[tuple[int, float]]:
        if self.max_depth is not None and depth_of(state) >= self.max_depth:
            return []
        return [(2 * state, self.p), (2 * state + 1, 1 - self.p)]


def node_from_moves(moves: str) -> int:
    """Heap index reached from the root by a string of 'l'/'r' moves."""
    k = ROOT
    for m in moves:
        k = 2 * k + (m == "r")
    return k


@dataclass
class FiniteTree:
    """Explicit finite tree with exact (Fraction) conditional probabilities.

    Node 0 is the root.  ``arity`` records the number of children each node
    has in the underlying (possibly infinite) tree, which may exceed the
    number of children kept when the tree is a truncation.
    """

    parent: list[int | None] = field(default_factory=lambda: [None])
    cond_prob: list[Fraction] = field(default_factory=lambda: [Fraction(1)])
    children: list[list[int]] = field(default_factory=lambda: [[]])
    arity: list[int] = field(default_factory=lambda: [0])

    def __len__(self) -> int:
        return len(self.parent)

    def add(self, parent: int, p: Fraction) -> int:
        i = len(self.parent)
        self.parent.append(parent)
        self.cond_prob.append(p)
        self.children.append([])
        self.arity.append(0)
        self.children[parent].append(i)
        return i

    def path_prob(self) -> list[Fraction]:
        out = [Fraction(1)] * len(self)
        for i in range(1, len(self)):
            out[i] = out[self.parent[i]] * self.cond_prob[i]
        return out

    def depths(self) -> list[int]:
        out = [0] * len(self)
        for i in range(1, len(self)):
            out[i] = out[self.parent[i]] + 1
        return out

    def sop(self) -> list[Fraction]:
        """Exact lambda/pi of every node, via lambda/pi(child) = lambda/pi(parent) + 1/pi(child)."""
        pp = self.path_prob()
        out = [Fraction(1)] * len(self)
        for i in range(1, len(self)):
            out[i] = out[self.parent[i]] + 1 / pp[i]
        return out


def random_proper_tree(seed: int, theta_max: Fraction | int, max_arity: int = 4, max_nodes: int = 10_000):
    """Random proper-policy tree truncated to lambda/pi <= theta_max, plus children.

    Arity is uniform in [1, max_arity]; probabilities are normalized random
    small integers, so all costs are exact rationals.  Every kept node of cost
    <= theta_max has all its children in the tree.  Returns the tree and the
    truncation threshold actually used (lowered if ``max_nodes`` would be hit).
    """
    rng = derive_rng(seed, 7)
    theta_max = Fraction(theta_max)
    tree = FiniteTree()
    sop = [Fraction(1)]
    pp = [Fraction(1)]
    frontier = [0]
    while frontier:
        nxt = []
        for n in frontier:
            if sop[n] > theta_max:
                continue
            k = int(rng.integers(1, max_arity + 1))
            raw = [int(x) for x in rng.integers(1, 6, size=k)]
            tot = sum(raw)
            tree.arity[n] = k
            for r in raw:
                p = Fraction(r, tot)
                c = tree.add(n, p)
                pp.append(pp[n] * p)
                sop.append(sop[n] + 1 / pp[c])
                nxt.append(c)
            if len(tree) > max_nodes:
                return random_proper_tree(seed, theta_max * 3 / 4, max_arity, max_nodes)
        frontier = nxt
    return tree, theta_max
