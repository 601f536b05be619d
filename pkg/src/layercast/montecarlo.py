"""Monte Carlo estimates of expected distortion under a solved allocation.

Samples are drawn in fixed-size blocks, block ``k`` using the ``k``-th child
of the run's ``SeedSequence``.  The estimate therefore does not depend on
how many workers process the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import realized_rate
from .continuum import ContinuumSolution
from .discrete_opt import DiscreteLayering
from .fading import Erlang, TabulatedDiscrete

__all__ = [
    "McEstimate",
    "RNG_ALGORITHM",
    "make_rng",
    "sample_gain",
    "realized_distortion",
    "estimate_expected_distortion",
]

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int
    algorithm: str = RNG_ALGORITHM


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sample_gain(model, rng: np.random.Generator, size=None):
    """Erlang gain as ``mean`` times the average of ``L`` unit exponentials."""
    if isinstance(model, Erlang):
        shape = (() if size is None else (size if isinstance(size, tuple) else (size,)))
        draws = rng.standard_exponential(shape + (model.L,))
        return model.mean * draws.mean(axis=-1)
    if isinstance(model, TabulatedDiscrete):
        return rng.choice(np.asarray(model.gains), size=size, p=np.asarray(model.probs))
    raise TypeError(f"cannot sample from {type(model).__name__}")


class _RealizedDistortion:
    # precomputed lookup so large sample batches are a single interp/searchsorted

    def __init__(self, solution, b):
        self.b = b
        if isinstance(solution, DiscreteLayering):
            self.kind = "discrete"
            self.gains = solution.gains
            self.cum_nats = np.cumsum(np.log(2.0) * solution.rates)
        elif isinstance(solution, ContinuumSolution):
            self.kind = "continuum"
            grid = solution.grid
            self.grid = grid
            self.cum_nats = np.asarray(realized_rate(grid, solution.cumulative, solution.rho, grid))
        else:
            raise TypeError(f"unsupported solution type {type(solution).__name__}")

    def __call__(self, g):
        g = np.asarray(g, dtype=float)
        if self.kind == "discrete":
            idx = np.searchsorted(self.gains, g, side="right") - 1
            nats = np.where(idx >= 0, self.cum_nats[np.maximum(idx, 0)], 0.0)
        else:
            nats = np.interp(g, self.grid, self.cum_nats, left=0.0, right=self.cum_nats[-1])
        return np.exp(-self.b * nats)


def realized_distortion(solution, b: float, g):
    """Distortion ``exp(-b R(g))`` at gain ``g`` (``R`` in nats), i.e. ``2^(-b R_bits)``."""
    out = _RealizedDistortion(solution, b)(g)
    return float(out) if out.ndim == 0 else out


def estimate_expected_distortion(
    config, solution, n_samples: int, seed: int, workers: int = 1
) -> McEstimate:
    """Sample mean and standard error of the realized distortion."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    evaluate = _RealizedDistortion(solution, config.b)
    n_blocks = math.ceil(n_samples / BLOCK_SIZE)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [min(BLOCK_SIZE, n_samples - k * BLOCK_SIZE) for k in range(n_blocks)]

    def block(k):
        d = evaluate(sample_gain(config.fading, make_rng(children[k]), sizes[k]))
        return d.sum(), np.square(d).sum()

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(k) for k in range(n_blocks)]
    s = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return McEstimate(mean, math.sqrt(var / n_samples), n_samples, int(seed))
