"""Rerooters and rerooting-weight schemes.

A rerooter maps a :class:`~rootlts.search.VisitContext` to a nonnegative
weight.  Plain schemes read the visited node's signal and the signal counters.
Transforming schemes (``Robust``, ``FTransform``) wrap an *input* scheme,
accumulate its raw weights and emit a reparameterized weight; they keep the
raw trace in ``inputs`` so the run can be checked against input-weight bounds.

Stateful rerooters implement ``reset(seed)``, called by ``run_search``.
"""
from __future__ import annotations

import math
from typing import Callable, Mapping

from .search import ContractViolation, KahanSum, Signal, VisitContext

EXP_CLUE_CAP = 1000  # 2**q overflows binary64 past q = 1023


def uniform_clue_weight(is_clue: bool, q: int) -> float:
    if q < 1:
        raise ValueError("q must be >= 1")
    return 1.0 / q if is_clue else 0.0


def per_count_weight(is_clue: bool, q_t: int) -> float:
    """1/q_t on clues, where q_t counts clues seen so far, current included."""
    if not is_clue:
        return 0.0
    if q_t < 1:
        raise ValueError("q_t must count the current clue")
    return 1.0 / q_t


def robust_weight(raw: float, cum_raw: float) -> float:
    """raw / cum_raw, with cum_raw including ``raw``; 0 when cum_raw is 0."""
    if cum_raw == 0:
        return 0.0
    if cum_raw < raw:
        raise ValueError("cumulative input weight must include the current weight")
    return raw / cum_raw


def f_transform_weight(f: Callable[[float], float], cum_now: float, cum_prev: float) -> float:
    w = f(cum_now) - f(cum_prev)
    if w < 0:
        if w > -1e-15 * max(1.0, abs(f(cum_now))):
            return 0.0
        raise ContractViolation(f"f decreases on [{cum_prev}, {cum_now}]")
    return w


def exponential_clue_weight(is_clue: bool, q_t: int) -> float:
    if not is_clue:
        return 0.0
    return 2.0 ** min(q_t, EXP_CLUE_CAP)


def inv_log_f(x: float) -> float:
    """f(x) = -1/ln(e + x); total transformed weight stays below 1."""
    return -1.0 / math.log(math.e + x)


def sqrt_f(x: float) -> float:
    return math.sqrt(x)


def log1p_f(alpha: float) -> Callable[[float], float]:
    def f(x: float) -> float:
        return math.log1p(alpha * x)

    return f


def f_transform(name: str, alpha: float = 1.0) -> Callable[[float], float]:
    if name == "inv-log":
        return inv_log_f
    if name == "sqrt":
        return sqrt_f
    if name == "log1p":
        return log1p_f(alpha)
    raise ValueError(f"unknown f-transform {name!r}")


# --- rerooters --------------------------------------------------------------


class NullRerooter:
    """Weight 0 everywhere; the engine then gives the root weight 1 (plain LTS)."""

    name = "none"

    def weight(self, ctx: VisitContext) -> float:
        return 0.0


class StaticRerooter:
    """Weight as a function of the visited node's own signal only."""

    def __init__(self, weight_of: Callable[[Signal], float], name: str = "static"):
        self.weight_of = weight_of
        self.name = name

    def weight(self, ctx: VisitContext) -> float:
        return self.weight_of(ctx.signal)


class ClueIndicator(StaticRerooter):
    """w = 1 on clue nodes."""

    def __init__(self) -> None:
        super().__init__(lambda s: 1.0 if s.is_clue else 0.0, "clue")


class UniformClue(StaticRerooter):
    """w = 1/q on clue nodes, with q the known total number of clues."""

    def __init__(self, q: int):
        if q < 1:
            raise ValueError("q must be >= 1")
        self.q = q
        super().__init__(lambda s: uniform_clue_weight(s.is_clue, q), "uniform-clue")


class RewardRerooter(StaticRerooter):
    """w = observed reward; the root gets ``root_weight``."""

    def __init__(self, root_weight: float = 1.0):
        super().__init__(lambda s: s.reward, "reward")
        self.root_weight = root_weight

    def weight(self, ctx: VisitContext) -> float:
        if ctx.step == 1:
            return self.root_weight
        return ctx.signal.reward


class PerCount:
    """w = 1/q_t on clue nodes."""

    name = "per-count"

    def weight(self, ctx: VisitContext) -> float:
        s = ctx.signal
        return per_count_weight(s.is_clue, ctx.counters.get("clue", 0))


class PerTypeCount:
    """w = 1/(offset + q_{z,t}) on clue nodes of type z.

    ``scale`` optionally divides by a per-type factor (e.g. ln(1 + M_z)).
    """

    name = "per-count-by-type"

    def __init__(self, offset: int = 1, scale: Mapping[int, float] | None = None):
        self.offset = offset
        self.scale = dict(scale or {})

    def weight(self, ctx: VisitContext) -> float:
        z = ctx.signal.clue_type
        if z is None:
            return 0.0
        q = ctx.counters.get(f"clue{z}", 0)
        return 1.0 / ((self.offset + q) * self.scale.get(z, 1.0))


class PerTypeEstimate:
    """w = 1/M_z on clue nodes of type z, with M_z an estimated clue count."""

    name = "per-type-estimate"

    def __init__(self, counts: Mapping[int, float]):
        self.counts = dict(counts)

    def weight(self, ctx: VisitContext) -> float:
        z = ctx.signal.clue_type
        if z is None or z not in self.counts:
            return 0.0
        return 1.0 / self.counts[z]


class ExponentialClue:
    """w = 2**q_t on clue nodes (input weights for ``Robust``)."""

    name = "exponential-clue"

    def weight(self, ctx: VisitContext) -> float:
        s = ctx.signal
        return exponential_clue_weight(s.is_clue, ctx.counters.get("clue", 0))


class _Transforming:
    def __init__(self, inner) -> None:
        self.inner = inner
        self.reset()

    def reset(self, seed: int | None = None) -> None:
        self.inputs: list[float] = []
        self._cum = KahanSum()
        inner_reset = getattr(self.inner, "reset", None)
        if inner_reset is not None:
            inner_reset(seed)

    def _take(self, ctx: VisitContext) -> tuple[float, float, float]:
        raw = float(self.inner.weight(ctx))
        if raw < 0 or math.isnan(raw):
            raise ValueError(f"input weight {raw} is not a nonnegative number")
        if ctx.step == 1 and raw == 0.0:
            raw = 1.0  # the root always carries input weight
        prev = self._cum.value
        self.inputs.append(raw)
        return raw, prev, self._cum.add(raw)


class Robust(_Transforming):
    """w_t = raw_t / (sum of raw weights up to t)."""

    name = "robust"

    def weight(self, ctx: VisitContext) -> float:
        raw, _, cum = self._take(ctx)
        return robust_weight(raw, cum)


class FTransform(_Transforming):
    """w_t = f(cum raw up to t) - f(cum raw before t), for nondecreasing f."""

    name = "f-transform"

    def __init__(self, inner, f: Callable[[float], float]):
        self.f = f
        super().__init__(inner)

    def weight(self, ctx: VisitContext) -> float:
        _, prev, cum = self._take(ctx)
        return f_transform_weight(self.f, cum, prev)


def make_rerooter(scheme: str, **params):
    """Build a rerooter from a scheme name as used on the command line."""
    q = params.get("q")
    base = {
        "none": NullRerooter,
        "clue": ClueIndicator,
        "per-count": PerCount,
        "per-count-by-type": PerTypeCount,
        "reward": RewardRerooter,
        "exponential-clue": ExponentialClue,
    }
    if scheme in base:
        return base[scheme]()
    if scheme == "uniform-clue":
        if q is None:
            raise ValueError("uniform-clue needs q")
        return UniformClue(int(q))
    if scheme == "robust-clue":
        return Robust(ClueIndicator())
    if scheme == "robust-exponential":
        return Robust(ExponentialClue())
    if scheme.startswith("f-"):
        return FTransform(ClueIndicator(), f_transform(scheme[2:], float(params.get("alpha", 1.0))))
    raise ValueError(f"unknown weight scheme {scheme!r}")
