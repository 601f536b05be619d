"""Power allocation over a finite set of fading states.

Layers are indexed by ascending gain.  ``T[i]`` is the cumulative power
of layer ``i`` and everything above it, so ``T[0]`` is the full budget and
the per-layer power is ``T[i] - T[i+1]`` with ``T[M] = 0`` implied.

The optimizer runs the two-layer KKT step from the top layer downward,
carrying an equivalent probability weight ``W`` that summarizes all layers
above the current one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fading import TabulatedDiscrete

__all__ = [
    "DiscreteLayering",
    "layer_rate",
    "expected_distortion_of_allocation",
    "unconstrained_step",
    "weight_update",
    "solve_discrete",
    "brute_force_oracle",
    "coordinate_descent",
]

LN2 = math.log(2.0)
# relative slack before a non-monotone candidate counts as a violation
MONOTONE_RTOL = 1e-10


@dataclass
class DiscreteLayering:
    """Solved allocation for ``M`` layers (ascending gain order)."""

    gains: np.ndarray
    probs: np.ndarray
    cumulative: np.ndarray
    b: float
    budget: float
    weights: np.ndarray | None = None
    flags: set = field(default_factory=set)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.probs = np.asarray(self.probs, dtype=float)
        T = np.clip(np.asarray(self.cumulative, dtype=float), 0.0, None)
        if T.shape != self.gains.shape:
            raise ValueError("one cumulative power per layer is required")
        if T.size and T[0] > self.budget + 1e-12:
            raise ValueError(f"cumulative power {T[0]!r} exceeds the budget {self.budget!r}")
        # tiny negative layer powers from round-off are clamped away
        self.cumulative = np.minimum.accumulate(T)

    @property
    def M(self) -> int:
        return self.gains.size

    @property
    def powers(self) -> np.ndarray:
        """Per-layer powers ``P_i = T_i - T_{i+1}``."""
        return self.cumulative - np.append(self.cumulative[1:], 0.0)

    @property
    def rates(self) -> np.ndarray:
        """Per-layer rates in bits per channel use."""
        above = np.append(self.cumulative[1:], 0.0)
        return layer_rate(self.gains, self.powers, above)

    @property
    def expected_distortion(self) -> float:
        return expected_distortion_of_allocation(self, self.b)


def layer_rate(gain, power, interference):
    """``log2(1 + g P / (1 + g I))`` with higher layers treated as noise."""
    gain = np.asarray(gain, dtype=float)
    out = np.log1p(gain * power / (1.0 + gain * interference)) / LN2
    return float(out) if out.ndim == 0 else out


def _log_ratios(gains, T):
    # ln((1 + g_j T_j) / (1 + g_j T_{j+1})), the natural-log layer rates
    above = np.append(T[1:], 0.0)
    return np.log1p(gains * T) - np.log1p(gains * above)


def _expected_distortion(gains, probs, T, b):
    cum = np.cumsum(_log_ratios(gains, T))
    return float(np.dot(probs, np.exp(-b * cum)))


def expected_distortion_of_allocation(layering: DiscreteLayering, b: float) -> float:
    """Average of ``2^(-b R_rlz)`` over the states, products taken in log-space."""
    return _expected_distortion(layering.gains, layering.probs, layering.cumulative, b)


def unconstrained_step(g_low, p_low, g_high, w_high, b):
    """Cumulative power for the upper of two adjacent layers.

    Minimizes ``(1 + g_low T)^b [p_low + (1 + g_high T)^(-b) w_high]`` over
    ``T >= 0``.  Returns ``math.inf`` when ``g_low == 0``: a zero-gain lower
    layer never profits from power, so the caller pushes everything up.
    """
    if not p_low > 0 or not w_high > 0 or not b > 0:
        raise ValueError("p_low, w_high and b must be positive")
    if not g_high > g_low >= 0:
        raise ValueError("need g_high > g_low >= 0")
    if g_low == 0:
        return math.inf
    bracket = w_high * (g_high - g_low) / (g_low * p_low)
    if bracket <= 1.0:
        return 0.0
    return (bracket ** (1.0 / (1.0 + b)) - 1.0) / g_high


def weight_update(g_low, p_low, g_high, w_high, T, b):
    """Weight of the lower layer once the upper one holds cumulative power ``T``."""
    if T < 0:
        raise ValueError("cumulative power must be nonnegative")
    return (1.0 + g_low * T) ** b * (p_low + (1.0 + g_high * T) ** (-b) * w_high)


def solve_discrete(states: TabulatedDiscrete, budget: float, b: float) -> DiscreteLayering:
    """Minimum expected distortion allocation over discrete fading states.

    Candidates come from :func:`unconstrained_step` top-down and the final
    allocation is ``T_i = min(candidate_i, T_{i-1})`` with ``T_0 = budget``.

    The closed form assumes the candidates grow toward the lower layers.
    When a layer's candidate falls below the one above it, that upper layer
    gets zero power: its probability is pooled into the current lower layer
    and the step is redone against the next powered layer.  Such results
    are flagged ``"monotonicity_fallback"`` and polished with
    :func:`coordinate_descent`, whichever is lower wins.
    """
    if not isinstance(states, TabulatedDiscrete):
        raise TypeError("solve_discrete needs TabulatedDiscrete states; discretize first")
    if budget < 0:
        raise ValueError("power budget must be nonnegative")
    if not b > 0:
        raise ValueError("bandwidth ratio must be positive")
    g = np.asarray(states.gains)
    p = np.asarray(states.probs)
    M = g.size
    cand = np.full(M, np.nan)
    W = np.zeros(M)
    W[-1] = p[-1]
    flags = set()
    # powered layers above the current one: [index, pooled probability]
    stack = [[M - 1, p[-1]]]
    exhausted_at = -1
    for i in range(M - 2, -1, -1):
        p_eff = p[i]
        while True:
            up = stack[-1][0]
            u = unconstrained_step(g[i], p_eff, g[up], W[up], b)
            above = cand[stack[-2][0]] if len(stack) > 1 else 0.0
            if u < budget and u < above - MONOTONE_RTOL * max(above, 1.0):
                flags.add("monotonicity_fallback")
                p_eff += stack.pop()[1]
                continue
            break
        cand[up] = u
        t = min(u, budget)
        # with t clamped, D_i = (1 + g_i T_i)^(-b) W_i still holds at T_i = budget
        W[i] = weight_update(g[i], p_eff, g[up], W[up], t, b)
        stack.append([i, p_eff])
        if u >= budget:
            exhausted_at = i
            break
    for j in range(exhausted_at - 1, -1, -1):
        W[j] = weight_update(g[j], p[j], g[j + 1], W[j + 1], budget, b)

    T = np.empty(M)
    T[0] = budget
    level = 0.0
    powered = {idx for idx, _ in stack}
    for j in range(M - 1, 0, -1):
        if j in powered and j > exhausted_at:
            level = min(cand[j], budget)
        T[j] = budget if j <= exhausted_at else level
    if M > 1 and T[-1] >= budget:
        flags.add("exhausted_at_top")
    layering = DiscreteLayering(g, p, T, b, budget, weights=W, flags=flags)
    if "monotonicity_fallback" in flags:
        polished = coordinate_descent(layering)
        if polished.expected_distortion < layering.expected_distortion:
            polished.weights = None
            layering = polished
        layering.flags = flags | {"coordinate_descent"}
    return layering


def coordinate_descent(layering: DiscreteLayering, tol: float = 1e-12, max_sweeps: int = 100_000):
    """Projected coordinate descent on the cumulative powers.

    Each cumulative power enters the objective through two adjacent layers
    only, so the 1-D minimum has the same closed form as the KKT step,
    clamped to ``[T_{j+1}, T_{j-1}]``.
    """
    g, p, b = layering.gains, layering.probs, layering.b
    T = layering.cumulative.copy()
    M = g.size
    best = _expected_distortion(g, p, T, b)
    for _ in range(max_sweeps):
        for j in range(1, M):
            lr = _log_ratios(g, T)
            prefix = np.concatenate(([0.0], np.cumsum(lr)))
            # tail sum of layers above j, relative to layer j's product
            tail = p[j:] * np.exp(-b * (prefix[j + 1 :] - prefix[j + 1]))
            w = (1.0 + g[j] * (T[j + 1] if j + 1 < M else 0.0)) ** b * tail.sum()
            u = unconstrained_step(g[j - 1], p[j - 1], g[j], w, b) if w > 0 else 0.0
            lo = T[j + 1] if j + 1 < M else 0.0
            T[j] = min(max(u, lo), T[j - 1])
        value = _expected_distortion(g, p, T, b)
        if best - value < tol:
            best = min(best, value)
            break
        best = value
    return DiscreteLayering(g, p, T, b, layering.budget, flags={"coordinate_descent"})


def brute_force_oracle(
    states: TabulatedDiscrete, budget: float, b: float, grid_points: int = 2000
) -> DiscreteLayering:
    """Exhaustive grid search over ``budget >= T_2 >= ... >= T_M >= 0``."""
    M = states.M
    if M > 4:
        raise ValueError(f"brute force is limited to M <= 4 layers, got {M}")
    g = np.asarray(states.gains)
    p = np.asarray(states.probs)
    if M == 1:
        return DiscreteLayering(g, p, [budget], b, budget)
    grid = np.linspace(0.0, budget, grid_points)
    ln_top = np.log1p(g[0] * budget)

    def objective(cols):
        # cols: cumulative powers T_2..T_M broadcast against each other
        total = 0.0
        log_prod = ln_top - np.log1p(g[0] * cols[0])
        total = total + p[0] * np.exp(-b * log_prod)
        for k in range(1, M):
            above = cols[k] if k < M - 1 else 0.0
            log_prod = log_prod + np.log1p(g[k] * cols[k - 1]) - np.log1p(g[k] * above)
            total = total + p[k] * np.exp(-b * log_prod)
        return total

    best_val, best_T = math.inf, None
    if M == 2:
        vals = objective([grid])
        k = int(np.argmin(vals))
        best_val, best_T = vals[k], [grid[k]]
    elif M == 3:
        t3 = grid[None, :]
        for t2 in grid:
            vals = objective([np.full_like(t3, t2), t3])
            vals = np.where(t3 <= t2, vals, np.inf)
            k = int(np.argmin(vals))
            if vals.flat[k] < best_val:
                best_val, best_T = vals.flat[k], [t2, grid[k]]
    else:
        t3 = grid[:, None]
        t4 = grid[None, :]
        for t2 in grid:
            vals = objective([np.full(np.broadcast(t3, t4).shape, t2), t3 + 0 * t4, t4 + 0 * t3])
            vals = np.where((t3 <= t2) & (t4 <= t3), vals, np.inf)
            k = int(np.argmin(vals))
            if vals.flat[k] < best_val:
                i3, i4 = np.unravel_index(k, vals.shape)
                best_val, best_T = vals.flat[k], [t2, grid[i3], grid[i4]]
    return DiscreteLayering(g, p, [budget, *best_T], b, budget, flags={"brute_force"})
