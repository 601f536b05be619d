"""Reference curves: CSIT bound, infinite diversity, capacity-maximizing
allocation, realized rate / expected capacity and the distortion exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import fading
from .fading import Erlang, FadingModel

__all__ = [
    "ChannelConfig",
    "csit_expected_distortion",
    "infinite_diversity_distortion",
    "capacity_max_cumulative_power",
    "capacity_max_power_density",
    "realized_rate",
    "expected_capacity",
    "distortion_exponent_fit",
    "InsufficientSpanError",
    "db_to_linear",
]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelConfig:
    """Power budget ``P`` (linear), bandwidth ratio ``b`` and fading model."""

    P: float
    b: float
    fading: FadingModel

    def __post_init__(self):
        if not self.P >= 0:
            raise ValueError("power budget must be nonnegative")
        if not self.b > 0:
            raise ValueError("bandwidth ratio must be positive")

    @classmethod
    def from_db(cls, snr_db: float, b: float, model: FadingModel) -> "ChannelConfig":
        return cls(db_to_linear(snr_db), b, model)


class InsufficientSpanError(ValueError):
    pass


def csit_expected_distortion(config: ChannelConfig) -> float:
    """``E[(1 + g P)^(-b)]``: all power on the realized layer."""
    model = config.fading
    fading._require_erlang(model, "csit_expected_distortion")
    if config.P == 0:
        return 1.0
    P, b = config.P, config.b

    def integrand(g):
        return math.exp(float(fading.log_pdf(model, g)) - b * math.log1p(g * P))

    # break points at the (1 + g P) roll-off scale and at the bulk of the density
    top = fading.truncation_point(model)
    knots = sorted({0.0, top, model.mean, 4.0 * model.mean, *(c / P for c in (1.0, 10.0, 100.0))})
    knots = [k for k in knots if k <= top]
    return math.fsum(
        integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        for lo, hi in zip(knots[:-1], knots[1:])
    )


def infinite_diversity_distortion(config: ChannelConfig) -> float:
    """``(1 + mean P)^(-b)``: the gain is deterministic at its mean."""
    mean = config.fading.mean if isinstance(config.fading, Erlang) else float(
        np.dot(config.fading.gains, config.fading.probs)
    )
    return (1.0 + mean * config.P) ** (-config.b)


def capacity_max_cumulative_power(model: Erlang, g):
    """``(1 - F - g f) / (g^2 f)``, clamped at 0 above the idle boundary."""
    g = np.asarray(g, dtype=float)
    f = np.asarray(fading.pdf(model, g))
    if np.any(g <= 0) or np.any(f <= 0):
        raise ValueError("capacity-maximizing profile needs g > 0 with f(g) > 0")
    out = np.maximum((np.asarray(fading.sf(model, g)) - g * f) / (g * g * f), 0.0)
    return float(out) if out.ndim == 0 else out


def capacity_max_power_density(model: Erlang, g):
    """``-d/dg`` of the capacity-maximizing cumulative power, zero where it is idle."""
    g = np.asarray(g, dtype=float)
    U = np.asarray(capacity_max_cumulative_power(model, g))
    shape = (model.L + 1) / g - model.rate
    out = np.where(U > 0, shape * (U + 1.0 / g), 0.0)
    return float(out) if out.ndim == 0 else out


def realized_rate(grid, cumulative, rho, g):
    """Rate in nats decodable at gain ``g``: ``int_0^g s rho / (1 + s T) ds``.

    Trapezoid rule on the supplied nodes.  Nodes where ``rho`` is zero
    contribute nothing, so a profile sampled with its region boundaries as
    nodes integrates each region separately.
    """
    grid = np.asarray(grid, dtype=float)
    integrand = grid * np.asarray(rho, dtype=float) / (1.0 + grid * np.asarray(cumulative, dtype=float))
    active = np.asarray(rho) > 0
    # do not let the trapezoid bridge an active node with an idle one
    seg_ok = active[1:] & active[:-1]
    pieces = np.where(seg_ok, 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(grid), 0.0)
    cum = np.concatenate(([0.0], np.cumsum(pieces)))
    out = np.interp(g, grid, cum, left=0.0, right=cum[-1])
    return float(out) if np.ndim(out) == 0 else out


def expected_capacity(model: Erlang, grid, cumulative, rho) -> float:
    """``E[R_rlz]`` in nats, as ``int (1 - F(s)) s rho / (1 + s T) ds`` on the grid."""
    grid = np.asarray(grid, dtype=float)
    rho = np.asarray(rho, dtype=float)
    integrand = np.asarray(fading.sf(model, grid)) * grid * rho / (1.0 + grid * np.asarray(cumulative))
    active = rho > 0
    seg_ok = active[1:] & active[:-1]
    h = np.diff(grid)
    return float(np.sum(np.where(seg_ok, 0.5 * (integrand[1:] + integrand[:-1]) * h, 0.0)))


def distortion_exponent_fit(sweep, min_span_db: float = 20.0) -> float:
    """Least-squares slope of ``-ln E[D]`` against ``ln P`` over the top half of the sweep."""
    pts = sorted((float(P), float(d)) for P, d in sweep)
    if len(pts) < 4:
        raise InsufficientSpanError("need at least 4 sweep points")
    P = np.array([p for p, _ in pts])
    D = np.array([d for _, d in pts])
    if np.any(P <= 0) or np.any(D <= 0):
        raise ValueError("powers and distortions must be positive")
    logP = np.log(P)
    if 10 * np.log10(P[-1] / P[0]) < min_span_db - 1e-9:
        raise InsufficientSpanError(f"sweep spans less than {min_span_db:g} dB")
    mid = 0.5 * (logP[0] + logP[-1])
    top = logP >= mid - 1e-12
    slope, _ = np.polyfit(logP[top], -np.log(D[top]), 1)
    return float(slope)
