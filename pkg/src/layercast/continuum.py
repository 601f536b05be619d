"""Continuum-limit power distribution for a continuous fading density.

The optimal cumulative power ``T*(g)`` has three regions: zero above the
idle boundary ``gamma_o``, the unconstrained solution ``U(g)`` on
``[gamma_P, gamma_o]`` and the full budget ``P`` below ``gamma_P``.

``U`` and the cumulative distortion ``D`` are computed from their integral
solutions by adaptive quadrature.  The RK4 integrators of the underlying
linear ODEs are kept as an independent cross-check.

Integrals are taken in ``t = ln(s)`` with the kernel powers evaluated
through ``phi(s) = ln(s^2 f(s))`` so nothing overflows for large ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import fading
from .fading import Erlang

__all__ = [
    "ContinuumSolution",
    "SolverError",
    "NoRootError",
    "BracketError",
    "StepUnderflowError",
    "idle_boundary_residual",
    "solve_gamma_o",
    "cumulative_power_U",
    "cumulative_power_U_ode",
    "cumulative_power_profile",
    "power_density_rho",
    "solve_gamma_P",
    "distortion_profile_D",
    "distortion_profile_D_ode",
    "distortion_profile",
    "weight_W",
    "min_expected_distortion",
    "output_grid",
]

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200
SCAN_POINTS = 4096
GRID_POINTS = 2048
MAX_RK4_STEPS = 1 << 22


class SolverError(RuntimeError):
    """Base class for continuum solver failures."""


class NoRootError(SolverError):
    pass


class BracketError(SolverError):
    pass


class StepUnderflowError(SolverError):
    pass


@dataclass
class ContinuumSolution:
    """Optimal power distribution sampled on an ascending gain grid.

    ``cumulative`` is the three-region ``T*``; ``rho`` is ``-dT*/dg`` and is
    zero outside the active region.
    """

    model: Erlang
    b: float
    P: float
    gamma_o: float
    gamma_P: float
    expected_distortion: float
    grid: np.ndarray
    cumulative: np.ndarray
    rho: np.ndarray
    distortion: np.ndarray
    weight: np.ndarray
    flags: set = field(default_factory=set)

    @property
    def active(self) -> np.ndarray:
        return (self.grid >= self.gamma_P) & (self.grid <= self.gamma_o)


def _check(model, b):
    fading._require_erlang(model, "continuum solver")
    if not b > 0:
        raise ValueError("bandwidth ratio must be positive")


def _phi(model: Erlang, s: float) -> float:
    # ln(s^2 f(s))
    return (model.L + 1) * math.log(s) + model._log_norm - model.rate * s


def _log_f(model: Erlang, s: float) -> float:
    return model._log_norm + (model.L - 1) * math.log(s) - model.rate * s


def _shape(model: Erlang, s: float) -> float:
    # 2/s + f'(s)/f(s)
    return (model.L + 1) / s - model.rate


def _quad(fun, a, b):
    if a == b:
        return 0.0
    val, _ = integrate.quad(fun, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
    return val


def idle_boundary_residual(model: Erlang, g):
    """``g f(g) + F(g) - 1``; its root is the upper edge of the active region."""
    g = np.asarray(g, dtype=float)
    return g * np.asarray(fading.pdf(model, g)) - np.asarray(fading.sf(model, g))


def solve_gamma_o(model: Erlang, flags: set | None = None) -> float:
    """Idle boundary ``gamma_o``: scan a log grid for sign changes, then Brent.

    With several sign changes the largest root is returned and
    ``"multiple_gamma_o_roots"`` is added to ``flags``.
    """
    fading._require_erlang(model, "solve_gamma_o")
    grid = np.geomspace(1e-6 * model.mean, fading.truncation_point(model), SCAN_POINTS)
    vals = idle_boundary_residual(model, grid)
    sgn = np.sign(vals)
    nz = np.flatnonzero(sgn)
    changes = [(nz[k], nz[k + 1]) for k in range(nz.size - 1) if sgn[nz[k]] != sgn[nz[k + 1]]]
    if not changes:
        raise NoRootError(f"no sign change of g f(g) + F(g) - 1 for {model}")
    if len(changes) > 1 and flags is not None:
        flags.add("multiple_gamma_o_roots")
    lo, hi = changes[-1]
    return optimize.brentq(
        lambda x: float(idle_boundary_residual(model, x)),
        grid[lo],
        grid[hi],
        xtol=1e-300,
        rtol=1e-15,
        maxiter=500,
    )


def _U_integrand(model, a, phi_ref):
    def f(t):
        s = math.exp(t)
        return _shape(model, s) * math.exp(a * (_phi(model, s) - phi_ref))

    return f


def cumulative_power_U(model: Erlang, b: float, g: float, gamma_o: float) -> float:
    """Unconstrained cumulative power ``U(g)`` for ``0 < g <= gamma_o``."""
    _check(model, b)
    if not 0 < g <= gamma_o * (1 + 1e-15):
        raise ValueError(f"U is defined on (0, gamma_o]; got g={g!r}")
    if g >= gamma_o:
        return 0.0
    a = 1.0 / (1.0 + b)
    integral = _quad(_U_integrand(model, a, _phi(model, g)), math.log(g), math.log(gamma_o))
    return a * integral


def _descending(grid, gamma_o):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) >= 0) or grid[0] > gamma_o * (1 + 1e-15):
        raise ValueError("grid must be strictly descending and start at or below gamma_o")
    return grid


def cumulative_power_profile(model: Erlang, b: float, grid, gamma_o: float) -> np.ndarray:
    """``U`` on a descending grid, accumulating quadrature piecewise from ``gamma_o``."""
    _check(model, b)
    grid = _descending(grid, gamma_o)
    a = 1.0 / (1.0 + b)
    phi_o = _phi(model, gamma_o)
    fun = _U_integrand(model, a, phi_o)
    knots = np.log(np.concatenate(([gamma_o], grid)))
    pieces = [_quad(fun, lo, hi) for hi, lo in zip(knots[:-1], knots[1:])]
    acc = np.cumsum(pieces)
    phis = np.array([_phi(model, x) for x in grid])
    return a * acc * np.exp(a * (phi_o - phis))


def _rk4_profile(rhs, grid, y0, x0, tol, min_step):
    # integrate dy/dx = rhs(x, y) through the nodes of ``grid`` starting at (x0, y0);
    # each interval is refined by step doubling until two passes agree to
    # ``tol`` (relative once |y| exceeds 1, since U grows without bound as g -> 0)
    out = np.empty(grid.size)
    x, y = x0, y0
    for k, target in enumerate(grid):
        if target == x:
            out[k] = y
            continue
        n = 4
        prev = _rk4_run(rhs, x, y, target, n)
        while True:
            n *= 2
            if abs(target - x) / n < min_step or n > MAX_RK4_STEPS:
                raise StepUnderflowError(
                    f"RK4 step fell below {min_step:g} on [{target:g}, {x:g}]"
                )
            cur = _rk4_run(rhs, x, y, target, n)
            if abs(cur - prev) < tol * max(1.0, abs(cur)):
                break
            prev = cur
        x, y = target, cur
        out[k] = y
    return out


def _rk4_run(rhs, x, y, target, n):
    h = (target - x) / n
    for _ in range(n):
        k1 = rhs(x, y)
        k2 = rhs(x + h / 2, y + h * k1 / 2)
        k3 = rhs(x + h / 2, y + h * k2 / 2)
        k4 = rhs(x + h, y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        x = x + h
    return y


def cumulative_power_U_ode(model: Erlang, b: float, grid, gamma_o: float, tol: float = 1e-10):
    """``U`` on a descending grid by RK4 on ``U' = -(2/g + f'/f)(U + 1/g)/(1+b)``."""
    _check(model, b)
    grid = _descending(grid, gamma_o)
    if grid[-1] < 1e-8 * model.mean:
        raise StepUnderflowError("grid must stay above 1e-8 * mean gain")

    def rhs(g, u):
        return -_shape(model, g) / (1.0 + b) * (u + 1.0 / g)

    return _rk4_profile(rhs, grid, 0.0, gamma_o, tol, 1e-12 * model.mean)


def power_density_rho(model: Erlang, b: float, g, U_at_g):
    """Power density ``-dU/dg`` on the active region, from the ODE right-hand side."""
    _check(model, b)
    g = np.asarray(g, dtype=float)
    shape = (model.L + 1) / g - model.rate
    out = shape / (1.0 + b) * (np.asarray(U_at_g, dtype=float) + 1.0 / g)
    return float(out) if out.ndim == 0 else out


def solve_gamma_P(model: Erlang, b: float, P: float, gamma_o: float) -> float:
    """Lower edge of the active region, where ``U(gamma_P) = P``."""
    _check(model, b)
    if not P > 0:
        raise ValueError("power budget must be positive")
    floor = 1e-3 * model.mean
    while cumulative_power_U(model, b, floor, gamma_o) <= P:
        floor *= 0.1
        if floor < 1e-12 * model.mean:
            raise BracketError(
                f"U(g) <= P={P:g} down to g={floor * 10:g}; cannot bracket gamma_P "
                f"for {model}, b={b:g}"
            )
    if floor >= gamma_o:
        raise BracketError("gamma_o lies below the initial bracket floor")
    return optimize.brentq(
        lambda g: cumulative_power_U(model, b, g, gamma_o) - P,
        floor,
        gamma_o,
        xtol=1e-300,
        rtol=1e-12,
        maxiter=500,
    )


def _D_integrand(model, c, psi_ref):
    def f(t):
        s = math.exp(t)
        return s * math.exp(_log_f(model, s) - c * (_phi(model, s) - psi_ref))

    return f


def distortion_profile_D(model: Erlang, b: float, g: float, gamma_o: float) -> float:
    """Cumulative distortion of the layers at and above ``g`` (active region)."""
    _check(model, b)
    if not 0 < g <= gamma_o * (1 + 1e-15):
        raise ValueError(f"D is evaluated on the active region (0, gamma_o]; got g={g!r}")
    c = b / (1.0 + b)
    psi = _phi(model, g)
    boundary = gamma_o * math.exp(_log_f(model, gamma_o) + c * (psi - _phi(model, gamma_o)))
    if g >= gamma_o:
        return boundary
    return _quad(_D_integrand(model, c, psi), math.log(g), math.log(gamma_o)) + boundary


def distortion_profile(model: Erlang, b: float, grid, gamma_o: float) -> np.ndarray:
    """``D`` on a descending grid by piecewise quadrature from ``gamma_o``."""
    _check(model, b)
    grid = _descending(grid, gamma_o)
    c = b / (1.0 + b)
    psi_o = _phi(model, gamma_o)
    fun = _D_integrand(model, c, psi_o)
    knots = np.log(np.concatenate(([gamma_o], grid)))
    acc = np.cumsum([_quad(fun, lo, hi) for hi, lo in zip(knots[:-1], knots[1:])])
    psis = np.array([_phi(model, x) for x in grid])
    start = gamma_o * math.exp(_log_f(model, gamma_o))
    return (acc + start) * np.exp(c * (psis - psi_o))


def distortion_profile_D_ode(model: Erlang, b: float, grid, gamma_o: float, tol: float = 1e-10):
    """``D`` by RK4 on ``D' = b/(1+b) (2/g + f'/f) D - f`` from ``D(gamma_o) = gamma_o f(gamma_o)``."""
    _check(model, b)
    grid = _descending(grid, gamma_o)
    if grid[-1] < 1e-8 * model.mean:
        raise StepUnderflowError("grid must stay above 1e-8 * mean gain")
    c = b / (1.0 + b)

    def rhs(g, d):
        return c * _shape(model, g) * d - math.exp(_log_f(model, g))

    d0 = gamma_o * math.exp(_log_f(model, gamma_o))
    return _rk4_profile(rhs, grid, d0, gamma_o, tol, 1e-12 * model.mean)


def weight_W(model: Erlang, b: float, g, U_at_g, gamma_o: float | None = None):
    """Equivalent weight of the layers at and above ``g``.

    Active region: ``g f(g) (1 + g U)^(1+b)``.  Above ``gamma_o`` (or wherever
    ``U_at_g`` is 0 and no boundary is given) no power is spent and the
    weight is the plain tail probability ``1 - F(g)``.
    """
    _check(model, b)
    g = np.asarray(g, dtype=float)
    U = np.asarray(U_at_g, dtype=float)
    active = g * np.asarray(fading.pdf(model, g)) * (1.0 + g * U) ** (1.0 + b)
    idle = np.asarray(fading.sf(model, g))
    if gamma_o is None:
        out = np.where(U > 0, active, idle)
    else:
        out = np.where(g < gamma_o, active, idle)
    return float(out) if out.ndim == 0 else out


def output_grid(model: Erlang, gamma_P: float, gamma_o: float, n: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced presentation grid with both region boundaries as exact nodes."""
    lo = max(gamma_P / 2.0, 1e-6 * model.mean)
    grid = np.geomspace(lo, 1.5 * gamma_o, n)
    grid = np.union1d(grid, [gamma_P, gamma_o])
    return grid


def min_expected_distortion(config, grid_points: int = GRID_POINTS) -> ContinuumSolution:
    """Solve for ``gamma_o``, ``gamma_P``, the profiles and ``E[D]* = F(gamma_P) + D(gamma_P)``.

    ``grid_points=0`` skips the profiles (summary values only).
    """
    model, b, P = config.fading, config.b, config.P
    _check(model, b)
    if P < 0:
        raise ValueError("power budget must be nonnegative")
    flags = set()
    try:
        gamma_o = solve_gamma_o(model, flags)
        if P == 0:
            gamma_P = gamma_o
        else:
            gamma_P = solve_gamma_P(model, b, P, gamma_o)
    except SolverError as exc:
        raise type(exc)(f"{exc} [config: {config}]") from exc
    d_P = distortion_profile_D(model, b, gamma_P, gamma_o)
    ed = float(fading.cdf(model, gamma_P)) + d_P

    if grid_points <= 0:
        empty = np.empty(0)
        return ContinuumSolution(model, b, P, gamma_o, gamma_P, ed, empty, empty, empty, empty, empty, flags)

    grid = output_grid(model, gamma_P, gamma_o, grid_points)
    below = grid < gamma_P
    above = grid > gamma_o
    act = ~below & ~above
    desc = grid[act][::-1]

    T = np.zeros_like(grid)
    T[below] = P
    U_act = cumulative_power_profile(model, b, desc, gamma_o)[::-1]
    U_act[-1] = 0.0
    U_act[0] = P
    T[act] = U_act
    rho = np.zeros_like(grid)
    rho[act] = power_density_rho(model, b, grid[act], U_act)

    D = np.empty_like(grid)
    D[act] = distortion_profile(model, b, desc, gamma_o)[::-1]
    D[below] = float(fading.cdf(model, gamma_P)) - np.asarray(fading.cdf(model, grid[below])) + d_P
    D[above] = fading.sf(model, grid[above])

    W = np.empty_like(grid)
    W[act] = weight_W(model, b, grid[act], U_act, gamma_o)
    W[above] = fading.sf(model, grid[above])
    W[below] = (1.0 + grid[below] * P) ** b * D[below]

    if np.any(np.diff(U_act) > 1e-12 * max(P, 1.0)):
        flags.add("non_monotone_U")
    if np.any(rho[act] < 0):
        flags.add("negative_rho")
    return ContinuumSolution(model, b, P, gamma_o, gamma_P, ed, grid, T, rho, D, W, flags)
