"""Comparison searchers: LTS, breadth-first search and PUCT."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .costs import BreadthCost, DepthCost, SlendernessCost
from .rerooting import NullRerooter
from .search import Environment, SearchRun, run_search

DEFAULT_C_PUCT = 2.0


def lts_search(env: Environment, variant: str = "sop", budget: int = 1_000_000, seed: int = 0) -> SearchRun:
    """Levin tree search with cost lambda/pi (``sop``) or d/pi (``dop``)."""
    models = {"sop": SlendernessCost, "dop": DepthCost}
    if variant not in models:
        raise ValueError(f"unknown LTS variant {variant!r}")
    return run_search(env, models[variant](), NullRerooter(), budget, seed)


def bfs_breadth(env: Environment, budget: int = 1_000_000, seed: int = 0) -> SearchRun:
    """Plain breadth-first search (FIFO within a depth)."""
    return run_search(env, BreadthCost(), NullRerooter(), budget, seed)


@dataclass
class PuctNodeStats:
    prior: float
    state: Any
    reward: float = 0.0
    visit_count: int = 0
    reward_sum: float = 0.0
    children: list["PuctNodeStats"] | None = None

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / self.visit_count if self.visit_count else 0.0


@dataclass
class PuctResult:
    root: PuctNodeStats
    iterations: int
    goal_iteration: int | None = None
    nodes: int = 0
    accounting_ok: bool = True
    root_child_visits: list[int] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.goal_iteration is not None


def puct_score(child: PuctNodeStats, parent_visits: int, c_puct: float) -> float:
    """X(child) + c_puct * prior * sqrt(m(parent)) / (m(child) + 1)."""
    return child.mean_reward + c_puct * child.prior * math.sqrt(parent_visits) / (child.visit_count + 1)


def puct_search(
    env: Environment,
    c_puct: float = DEFAULT_C_PUCT,
    iterations: int = 100_000,
    seed: int = 0,
    stop_at_goal: bool = True,
) -> PuctResult:
    """Tree-only MCTS with the AlphaZero selection rule.

    Each iteration descends from the root by maximal score (first child on
    ties) until it reaches a node never traversed before; that node is the one
    visited by the iteration.  The first iteration visits the root.  The value
    backed up into a node is the total reward found on the traversed path from
    that node down, so every node's mean reward stays an average of returns.
    Deterministic: ``seed`` is accepted for interface symmetry only.
    """
    if c_puct <= 0:
        raise ValueError("c_puct must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    root_state = env.root()
    root = PuctNodeStats(1.0, root_state, env.signal(None, root_state).reward)
    result = PuctResult(root, 0, nodes=1)
    for it in range(1, iterations + 1):
        path = [root]
        node = root
        while node.visit_count > 0:
            if node.children is None:
                node.children = [
                    PuctNodeStats(p, s, env.signal(node.state, s).reward)
                    for s, p in env.expand(node.state)
                ]
                result.nodes += len(node.children)
            if not node.children:
                break
            best = max(range(len(node.children)), key=lambda i: (puct_score(node.children[i], node.visit_count, c_puct), -i))
            node = node.children[best]
            path.append(node)
        ret = 0.0
        for n in reversed(path):
            ret += n.reward
            n.visit_count += 1
            n.reward_sum += ret
        result.iterations = it
        if root.children is not None:
            total = sum(c.visit_count for c in root.children)
            if total != root.visit_count - 1:
                result.accounting_ok = False
        if env.is_goal(node.state) and result.goal_iteration is None and node.visit_count == 1:
            result.goal_iteration = it
            if stop_at_goal:
                break
    result.root_child_visits = [c.visit_count for c in root.children or []]
    return result
