import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from layercast import fading
from layercast.baselines import (
    ChannelConfig,
    InsufficientSpanError,
    capacity_max_cumulative_power,
    capacity_max_power_density,
    csit_expected_distortion,
    db_to_linear,
    distortion_exponent_fit,
    expected_capacity,
    infinite_diversity_distortion,
    realized_rate,
)
from layercast.continuum import min_expected_distortion
from layercast.fading import Erlang


def e_times_E1_at_one():
    # E1(1) = -euler_gamma + sum_{k>=1} (-1)^(k+1) / (k k!)
    s = math.fsum((-1) ** (k + 1) / (k * math.factorial(k)) for k in range(1, 30))
    return math.e * (s - 0.57721566490153286061)


def test_csit_exponential_integral(rayleigh):
    val = csit_expected_distortion(ChannelConfig(1.0, 1.0, rayleigh))
    assert val == pytest.approx(e_times_E1_at_one(), abs=1e-9)
    assert val == pytest.approx(0.5963474, abs=1e-6)


def test_csit_b2_closed_form(rayleigh):
    # E[(1+g)^-2] = 1 - e E1(1) for unit-mean Rayleigh
    val = csit_expected_distortion(ChannelConfig(1.0, 2.0, rayleigh))
    assert val == pytest.approx(1 - e_times_E1_at_one(), abs=1e-9)


@pytest.mark.parametrize("snr_db", [-20, 0, 20, 40, 60])
def test_csit_matches_sampled_average(snr_db):
    m = Erlang(2, 1.0)
    cfg = ChannelConfig.from_db(snr_db, 1.5, m)
    rng = np.random.default_rng(7)
    g = rng.gamma(2, 0.5, 400_000)
    mc = np.mean((1 + g * cfg.P) ** -1.5)
    se = np.std((1 + g * cfg.P) ** -1.5) / math.sqrt(g.size)
    assert abs(csit_expected_distortion(cfg) - mc) < 5 * se + 1e-12


def test_csit_zero_power(rayleigh):
    assert csit_expected_distortion(ChannelConfig(0.0, 2.0, rayleigh)) == 1.0


def test_infinite_diversity_examples(rayleigh):
    assert infinite_diversity_distortion(ChannelConfig(1.0, 2.0, rayleigh)) == pytest.approx(0.25)
    assert infinite_diversity_distortion(ChannelConfig(9.0, 1.0, Erlang(3, 1.0))) == pytest.approx(0.1)
    d = fading.TabulatedDiscrete((1.0, 3.0), (0.5, 0.5))
    assert infinite_diversity_distortion(ChannelConfig(1.0, 1.0, d)) == pytest.approx(1 / 3)


def test_db_to_linear():
    assert db_to_linear(0) == 1.0
    assert db_to_linear(30) == pytest.approx(1000.0)
    with pytest.raises(ValueError):
        ChannelConfig(-1.0, 1.0, Erlang(1, 1.0))
    with pytest.raises(ValueError):
        ChannelConfig(1.0, 0.0, Erlang(1, 1.0))


def test_capacity_max_examples():
    assert capacity_max_cumulative_power(Erlang(1, 1.0), 0.5) == pytest.approx(2.0)
    assert capacity_max_cumulative_power(Erlang(2, 1.0), 0.5) == pytest.approx(2.0)
    assert capacity_max_cumulative_power(Erlang(1, 1.0), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert capacity_max_cumulative_power(Erlang(1, 1.0), 3.0) == 0.0
    with pytest.raises(ValueError):
        capacity_max_cumulative_power(Erlang(1, 1.0), 0.0)


def test_capacity_max_density_is_derivative():
    m = Erlang(3, 1.0)
    h = 1e-6
    for g in (0.3, 0.5, 0.6):
        fd = -(capacity_max_cumulative_power(m, g + h) - capacity_max_cumulative_power(m, g - h)) / (2 * h)
        assert capacity_max_power_density(m, g) == pytest.approx(fd, rel=1e-6)
    assert capacity_max_power_density(m, 5.0) == 0.0


def test_realized_rate_linear_profile():
    # T(s) = P (1 - s/c) on [0, c], rho = P / c
    P, c = 3.0, 1.2
    grid = np.linspace(1e-9, c, 20001)
    T = P * (1 - grid / c)
    rho = np.full_like(grid, P / c)
    for g in (0.3, 0.8, c):
        exact = integrate.quad(lambda s: s * P / c / (1 + s * P * (1 - s / c)), 0, g, epsabs=1e-13)[0]
        assert realized_rate(grid, T, rho, g) == pytest.approx(exact, abs=1e-6)
    assert realized_rate(grid, T, rho, 2 * c) == realized_rate(grid, T, rho, c)
    assert realized_rate(grid, T, rho, 0.0) == 0.0


def test_realized_rate_thin_ramps_reduce_to_layers():
    # three narrow linear ramps approximate three discrete layers
    gains = np.array([0.5, 1.0, 2.0])
    T = np.array([3.0, 1.5, 0.5])
    width = 1e-4
    nodes, cum, dens = [1e-6], [T[0]], [0.0]
    for k, gk in enumerate(gains):
        hi = T[k + 1] if k + 1 < 3 else 0.0
        xs = np.linspace(gk - width, gk, 2001)
        # idle separators keep the trapezoid from bridging two ramps
        nodes += [gk - 2 * width]
        cum += [T[k]]
        dens += [0.0]
        nodes += list(xs)
        cum += list(T[k] + (hi - T[k]) * (xs - xs[0]) / width)
        dens += [(T[k] - hi) / width] * xs.size
    nodes += [3.0]
    cum += [0.0]
    dens += [0.0]
    got = realized_rate(np.array(nodes), np.array(cum), np.array(dens), 2.5)
    above = np.append(T[1:], 0.0)
    want = np.sum(np.log1p(gains * T) - np.log1p(gains * above))
    assert got == pytest.approx(want, abs=1e-3)


def test_small_b_distortion_capacity_identity(rayleigh):
    for b in (1e-2, 1e-3):
        sol = min_expected_distortion(ChannelConfig(1.0, b, rayleigh), grid_points=8192)
        ec = expected_capacity(rayleigh, sol.grid, sol.cumulative, sol.rho)
        assert abs(sol.expected_distortion - (1 - b * ec)) <= 5 * b * b


def test_expected_capacity_matches_mean_realized_rate():
    m = Erlang(2, 1.0)
    sol = min_expected_distortion(ChannelConfig(3.0, 1.0, m), grid_points=4096)
    ec = expected_capacity(m, sol.grid, sol.cumulative, sol.rho)
    rates = realized_rate(sol.grid, sol.cumulative, sol.rho, sol.grid)
    # E[R(G)] by integrating the density against the rate curve
    f = fading.pdf(m, sol.grid)
    direct = np.trapezoid(f * rates, sol.grid) + rates[-1] * fading.sf(m, sol.grid[-1])
    assert ec == pytest.approx(direct, rel=1e-4)


def test_capacity_profile_beats_distortion_profile_on_capacity(rayleigh):
    P = 10.0
    sol = min_expected_distortion(ChannelConfig(P, 2.0, rayleigh), grid_points=4096)
    g = np.geomspace(1e-3, 1.5, 8192)
    Ucap = capacity_max_cumulative_power(rayleigh, g)
    inside = (Ucap > 0) & (Ucap < P)
    T = np.minimum(Ucap, P)
    rho = np.where(inside, capacity_max_power_density(rayleigh, g), 0.0)
    ec_cap = expected_capacity(rayleigh, g, T, rho)
    ec_opt = expected_capacity(rayleigh, sol.grid, sol.cumulative, sol.rho)
    assert ec_cap > ec_opt


def test_exponent_fit_synthetic():
    P = db_to_linear(np.arange(0, 41, 5.0))
    sweep = list(zip(P, 3.0 * P**-1.5))
    assert distortion_exponent_fit(sweep) == pytest.approx(1.5, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.01, 100.0))
def test_exponent_fit_power_law(slope, scale):
    P = db_to_linear(np.arange(0, 31, 2.0))
    sweep = list(zip(P, scale * P**-slope))
    assert distortion_exponent_fit(sweep) == pytest.approx(slope, rel=1e-9)


def test_exponent_fit_span_errors():
    P = db_to_linear(np.arange(0, 11, 2.0))
    with pytest.raises(InsufficientSpanError):
        distortion_exponent_fit(list(zip(P, P**-1.0)))
    with pytest.raises(InsufficientSpanError):
        distortion_exponent_fit([(1.0, 1.0), (1000.0, 1e-3)])


@pytest.mark.parametrize("L", [1, 2, 4])
@pytest.mark.parametrize("snr_db", [0, 10, 20, 30])
def test_bound_ordering(L, snr_db):
    cfg = ChannelConfig.from_db(snr_db, 2.0, Erlang(L, 1.0))
    opt = min_expected_distortion(cfg, grid_points=0).expected_distortion
    csit = csit_expected_distortion(cfg)
    ideal = infinite_diversity_distortion(cfg)
    assert ideal <= csit <= opt <= 1.0


def test_diversity_beats_csit_at_high_snr():
    cfg2 = ChannelConfig.from_db(30, 2.0, Erlang(2, 1.0))
    cfg1 = ChannelConfig.from_db(30, 2.0, Erlang(1, 1.0))
    assert min_expected_distortion(cfg2, 0).expected_distortion < csit_expected_distortion(cfg1)
