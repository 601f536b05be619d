"""Channel power-gain distributions.

Two kinds ship: the Erlang family (average of ``L`` iid Rayleigh power
gains, ``L = 1`` being plain Rayleigh) and tabulated discrete states.
Densities are evaluated in log-space so large diversity orders do not
overflow the ``(L-1)!`` normalizer.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import special

__all__ = [
    "Erlang",
    "TabulatedDiscrete",
    "FadingModel",
    "FadingKindError",
    "pdf",
    "log_pdf",
    "cdf",
    "sf",
    "log_density_slope",
    "discretize",
    "truncation_point",
    "parse_model",
    "load_states_csv",
]

# tail mass beyond the truncation point must stay below this
TAIL_TOLERANCE = 1e-15


class FadingKindError(TypeError):
    """Raised when an operation needs a density but gets discrete states."""


@dataclass(frozen=True)
class Erlang:
    """Erlang-``L`` power gain with mean ``mean``.

    ``L = 1`` is Rayleigh fading, ``f(g) = exp(-g/mean)/mean``.
    """

    L: int = 1
    mean: float = 1.0
    _log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"diversity order must be a positive integer, got {self.L!r}")
        if not self.mean > 0 or not math.isfinite(self.mean):
            raise ValueError(f"mean gain must be positive and finite, got {self.mean!r}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "mean", float(self.mean))
        rate = self.L / self.mean
        object.__setattr__(self, "_log_norm", self.L * math.log(rate) - math.lgamma(self.L))
        tail = float(special.gammaincc(self.L, rate * truncation_point(self)))
        if tail >= TAIL_TOLERANCE:
            raise ValueError(f"truncated tail mass {tail:.3e} exceeds {TAIL_TOLERANCE:g}")

    @property
    def rate(self) -> float:
        return self.L / self.mean

    def describe(self) -> str:
        return f"erlang:L={self.L},mean={self.mean!r}"


@dataclass(frozen=True)
class TabulatedDiscrete:
    """Finite set of fading states ``gains[i]`` with probabilities ``probs[i]``."""

    gains: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        gains = tuple(float(g) for g in self.gains)
        probs = tuple(float(p) for p in self.probs)
        if len(gains) == 0 or len(gains) != len(probs):
            raise ValueError("gains and probs must be non-empty and of equal length")
        if gains[0] < 0:
            raise ValueError("gains must be nonnegative")
        if any(b <= a for a, b in zip(gains, gains[1:])):
            raise ValueError("gains must be strictly ascending")
        if any(not p > 0 for p in probs):
            raise ValueError("probabilities must be positive")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "probs", probs)

    @property
    def M(self) -> int:
        return len(self.gains)

    def describe(self) -> str:
        return f"discrete:M={self.M}"


FadingModel = Union[Erlang, TabulatedDiscrete]


def _require_erlang(model, op):
    if not isinstance(model, Erlang):
        raise FadingKindError(f"{op} needs a continuous density; got {type(model).__name__}")


def _check_gain(g):
    arr = np.asarray(g, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("channel gain must be >= 0")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def truncation_point(model: FadingModel) -> float:
    """Upper end of the support used for quadrature and scans."""
    if isinstance(model, Erlang):
        return model.mean * (50.0 / model.L + 50.0)
    return model.gains[-1]


def log_pdf(model: FadingModel, g):
    """Natural log of the Erlang density; ``-inf`` where the density is 0."""
    _require_erlang(model, "log_pdf")
    g = _check_gain(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        if model.L == 1:
            out = model._log_norm - model.rate * g
        else:
            out = model._log_norm + (model.L - 1) * np.log(g) - model.rate * g
    return _out(out)


def pdf(model: FadingModel, g):
    """Erlang density ``(L/m)^L g^(L-1) exp(-L g/m) / (L-1)!``."""
    return _out(np.exp(log_pdf(model, g)))


def cdf(model: FadingModel, g):
    """Probability that the gain is at most ``g``."""
    g = _check_gain(g)
    if isinstance(model, Erlang):
        return _out(special.gammainc(model.L, model.rate * g))
    gains = np.asarray(model.gains)
    cum = np.concatenate(([0.0], np.cumsum(model.probs)))
    cum[-1] = 1.0
    idx = np.searchsorted(gains, g, side="right")
    return _out(cum[idx])


def sf(model: FadingModel, g):
    """Survival function ``1 - F(g)``, accurate in the upper tail."""
    g = _check_gain(g)
    if isinstance(model, Erlang):
        return _out(special.gammaincc(model.L, model.rate * g))
    return _out(1.0 - np.asarray(cdf(model, g)))


def log_density_slope(model: FadingModel, g):
    """Exact ``f'(g)/f(g) = (L-1)/g - L/mean``."""
    _require_erlang(model, "log_density_slope")
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0):
        raise ValueError("log_density_slope is undefined at g <= 0")
    return _out((model.L - 1) / g - model.rate)


def discretize(model: FadingModel, delta: float, gamma_max: float) -> TabulatedDiscrete:
    """Quantize an Erlang model onto states ``0, delta, 2 delta, ...``.

    Each state takes the mass of ``[g_i, g_i + delta)``, the last one the
    whole tail beyond it, so a receiver whose gain falls in a bin decodes
    exactly the layers at or below the bin's lower edge.
    """
    _require_erlang(model, "discretize")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not gamma_max > delta:
        raise ValueError("gamma_max must exceed delta")
    n = int(math.ceil(gamma_max / delta - 1e-9))
    gains = np.arange(n + 1) * delta
    F = np.asarray(cdf(model, gains))
    probs = np.empty(n + 1)
    probs[:-1] = np.diff(F)
    probs[-1] = sf(model, gains[-1])
    keep = probs > 0
    gains, probs = gains[keep], probs[keep]
    probs[-1] += 1.0 - math.fsum(probs)
    return TabulatedDiscrete(tuple(gains), tuple(probs))


def load_states_csv(path) -> TabulatedDiscrete:
    """Read ``gamma,probability`` rows (header row required)."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["gamma", "probability"]:
            raise ValueError(f"{path}: expected header 'gamma,probability'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r and any(c.strip() for c in r)]
    rows.sort()
    return TabulatedDiscrete(tuple(r[0] for r in rows), tuple(r[1] for r in rows))


def parse_model(text: str) -> FadingModel:
    """Parse ``erlang:L=<int>,mean=<float>`` or ``discrete:@<csv path>``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind in ("erlang", "rayleigh"):
        params = {"L": "1", "mean": "1"}
        for item in filter(None, rest.split(",")):
            key, eq, value = item.partition("=")
            if not eq or key.strip() not in params:
                raise ValueError(f"bad erlang parameter {item!r}")
            params[key.strip()] = value.strip()
        if kind == "rayleigh" and params["L"] != "1":
            raise ValueError("rayleigh implies L=1")
        return Erlang(L=int(params["L"]), mean=float(params["mean"]))
    if kind == "discrete":
        if not rest.startswith("@"):
            raise ValueError("discrete model must be given as discrete:@<path>")
        return load_states_csv(rest[1:])
    raise ValueError(f"unknown fading model {text!r}")
