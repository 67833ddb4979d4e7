"""Small environments and rerooters shared by the tests."""
from __future__ import annotations

from rootlts.search import NO_SIGNAL, Signal


class ExplicitTree:
    """Finite tree given as {node: [(child, p), ...]} with optional clue set."""

    observe_at_generation = False

    def __init__(self, children, goal=None, clues=(), proper=False):
        self.children = children
        self.goal = goal
        self.clues = set(clues)
        self.proper = proper

    def root(self):
        return 0

    def expand(self, s):
        return list(self.children.get(s, []))

    def is_goal(self, s):
        return s == self.goal

    def signal(self, parent, s):
        return Signal(clue=True) if s in self.clues else NO_SIGNAL


class ListRerooter:
    """Weights taken in visit order from a list (0 once exhausted)."""

    def __init__(self, weights):
        self.weights = list(weights)

    def weight(self, ctx):
        return self.weights[ctx.step - 1] if ctx.step <= len(self.weights) else 0.0


class RandomRerooter:
    def __init__(self, rng, choices=(0.0, 0.3, 1.0)):
        self.rng = rng
        self.choices = choices

    def weight(self, ctx):
        return self.choices[int(self.rng.integers(len(self.choices)))]
