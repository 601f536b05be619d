"""Acceptance criteria, one test per criterion.

Each test records a ``[PASS]``/``[FAIL]`` line through the ``report``
fixture before asserting.  Run this file directly to get the lines
without pytest's summary machinery.
"""

import math
import time

import numpy as np

from layercast import fading
from layercast.baselines import (
    ChannelConfig,
    capacity_max_cumulative_power,
    csit_expected_distortion,
    db_to_linear,
    distortion_exponent_fit,
    expected_capacity,
    infinite_diversity_distortion,
)
from layercast.continuum import (
    cumulative_power_profile,
    cumulative_power_U_ode,
    distortion_profile,
    distortion_profile_D_ode,
    min_expected_distortion,
    solve_gamma_o,
    solve_gamma_P,
)
from layercast.discrete_opt import brute_force_oracle, solve_discrete
from layercast.fading import Erlang, TabulatedDiscrete
from layercast.montecarlo import estimate_expected_distortion

SWEEP_DB = np.arange(0.0, 40.0 + 1e-9, 5.0)


class _Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def _finish(report, tag, ok, detail, clock, budget):
    fast = clock.seconds < budget
    detail = f"{detail}; runtime {clock.seconds:.2f}s (< {budget:g}s: {fast})"
    return report(tag, ok and fast, detail)


def test_c01_rayleigh_boundary(report):
    with _Clock() as clock:
        errs = {m: abs(solve_gamma_o(Erlang(1, m)) - m) / m for m in (0.5, 1.0, 2.5)}
    ok = max(errs.values()) <= 1e-8
    detail = "max rel err " + ", ".join(f"{m}: {e:.1e}" for m, e in errs.items())
    assert _finish(report, "C1 Rayleigh idle boundary equals mean", ok, detail, clock, 1.0)


def test_c02_erlang2_boundary(report):
    with _Clock() as clock:
        got = solve_gamma_o(Erlang(2, 1.0))
    want = (1.0 + math.sqrt(5.0)) / 4.0
    err = abs(got - want)
    assert _finish(report, "C2 Erlang-2 idle boundary closed form", err <= 1e-10,
                   f"got {got!r}, want {want!r}, |err| {err:.1e}", clock, 1.0)


def test_c03_quadrature_vs_rk4(report):
    worst = 0.0
    with _Clock() as clock:
        for L in (1, 2, 4):
            m = Erlang(L, 1.0)
            g0 = solve_gamma_o(m)
            for b in (0.5, 1.0, 2.0):
                gp = solve_gamma_P(m, b, 10.0, g0)
                grid = np.geomspace(g0, gp, 120)
                du = np.abs(cumulative_power_profile(m, b, grid, g0) - cumulative_power_U_ode(m, b, grid, g0))
                dd = np.abs(distortion_profile(m, b, grid, g0) - distortion_profile_D_ode(m, b, grid, g0))
                worst = max(worst, du.max(), dd.max())
    assert _finish(report, "C3 quadrature vs RK4 profiles", worst <= 1e-8,
                   f"sup |diff| over U and D = {worst:.2e} (tol 1e-8)", clock, 10.0)


def test_c04_discrete_converges(report):
    m = Erlang(1, 1.0)
    with _Clock() as clock:
        cont = min_expected_distortion(ChannelConfig(1.0, 2.0, m), grid_points=0).expected_distortion
        vals = [solve_discrete(fading.discretize(m, d, 12.0), 1.0, 2.0).expected_distortion
                for d in (1e-1, 1e-2, 1e-3)]
    gaps = [abs(v - cont) / cont for v in vals]
    monotone = all(a > b for a, b in zip(gaps, gaps[1:]))
    ok = monotone and gaps[-1] < 1e-3
    detail = "rel gaps " + ", ".join(f"{g:.2e}" for g in gaps) + f"; monotone {monotone}"
    assert _finish(report, "C4 discrete converges to continuum", ok, detail, clock, 30.0)


def test_c05_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    with _Clock() as clock:
        for _ in range(20):
            M = int(rng.integers(2, 4))
            gains = np.sort(rng.uniform(0.05, 5.0, M))
            probs = rng.dirichlet(np.ones(M))
            probs /= probs.sum()
            P = 10.0 ** rng.uniform(-1.0, 2.0)
            b = rng.uniform(0.5, 4.0)
            states = TabulatedDiscrete(tuple(gains), tuple(probs))
            ours = solve_discrete(states, P, b).expected_distortion
            oracle = brute_force_oracle(states, P, b, 2000).expected_distortion
            worst = max(worst, abs(ours - oracle))
    assert _finish(report, "C5 recursion matches brute force", worst <= 1e-5,
                   f"20 instances, max |dE[D]| {worst:.2e} (tol 1e-5)", clock, 60.0)


def test_c06_monte_carlo(report):
    m = Erlang(1, 1.0)
    hits = {}
    with _Clock() as clock:
        for db in (0.0, 10.0):
            cfg = ChannelConfig.from_db(db, 2.0, m)
            sol = min_expected_distortion(cfg)
            hits[db] = sum(
                abs((est := estimate_expected_distortion(cfg, sol, 1_000_000, seed)).mean
                    - sol.expected_distortion) <= 3 * est.std_error
                for seed in range(10)
            )
    ok = all(h >= 9 for h in hits.values())
    detail = ", ".join(f"{db:g} dB: {h}/10 seeds within 3 SE" for db, h in hits.items())
    assert _finish(report, "C6 Monte Carlo agrees with E[D]*", ok, detail, clock, 60.0)


def test_c07_power_invariance(report):
    m = Erlang(1, 1.0)
    with _Clock() as clock:
        lo = min_expected_distortion(ChannelConfig(1.0, 2.0, m))
        hi = min_expected_distortion(ChannelConfig(10.0, 2.0, m))
        # the P = 1 active nodes, re-evaluated through the P = 10 solution
        nodes = lo.grid[lo.active & (lo.grid >= lo.gamma_P)]
        again = cumulative_power_profile(m, 2.0, nodes[::-1], hi.gamma_o)[::-1]
        diff = np.max(np.abs(again - lo.cumulative[lo.active & (lo.grid >= lo.gamma_P)]))
        # and the P = 10 profile restricted to the overlap
        overlap = hi.grid[(hi.grid >= lo.gamma_P) & (hi.grid <= lo.gamma_o)]
        back = cumulative_power_profile(m, 2.0, overlap[::-1], lo.gamma_o)[::-1]
        diff = max(diff, np.max(np.abs(back - hi.cumulative[(hi.grid >= lo.gamma_P) & (hi.grid <= lo.gamma_o)])))
    ok = diff <= 1e-10 and lo.gamma_o == hi.gamma_o
    assert _finish(report, "C7 cumulative power independent of P", ok,
                   f"sup |U_1 - U_10| on overlap {diff:.2e} (tol 1e-10)", clock, 5.0)


def _capacity_residual(m, b):
    sol = min_expected_distortion(ChannelConfig(1.0, b, m), grid_points=8192)
    ec = expected_capacity(m, sol.grid, sol.cumulative, sol.rho)
    return abs(sol.expected_distortion - (1.0 - b * ec))


def test_c08_small_b_limit(report):
    m = Erlang(1, 1.0)
    with _Clock() as clock:
        sol = min_expected_distortion(ChannelConfig(1.0, 1e-3, m))
        g = sol.grid
        inner = (g > sol.gamma_P) & (g < sol.gamma_o) & sol.active
        inner &= (g > g[inner].min()) & (g < g[inner].max())
        cap = capacity_max_cumulative_power(m, g[inner])
        sup = np.max(np.abs(sol.cumulative[inner] - cap) / cap)
        r2, r3 = _capacity_residual(m, 1e-2), _capacity_residual(m, 1e-3)
    ratio = r2 / r3
    ok = sup <= 0.01 and 50 <= ratio <= 200
    detail = f"sup rel dev {sup:.2e} (tol 1e-2); residual {r2:.3e} -> {r3:.3e}, ratio {ratio:.1f} (want 50..200)"
    assert _finish(report, "C8 small-b capacity limit", ok, detail, clock, 30.0)


def _exponent(L, b=2.0):
    m = Erlang(L, 1.0)
    pts = [(db_to_linear(db), min_expected_distortion(ChannelConfig.from_db(db, b, m), 0).expected_distortion)
           for db in SWEEP_DB]
    return distortion_exponent_fit(pts)


def test_c09_distortion_exponent(report):
    with _Clock() as clock:
        e1, e3 = _exponent(1), _exponent(3)
    ok1 = abs(e1 - 1.0) <= 0.15
    ok3 = abs(e3 - 2.0) <= 0.2
    detail = f"L=1: {e1:.3f} (1.0 +/- 0.15, {ok1}); L=3: {e3:.3f} (2.0 +/- 0.2, {ok3})"
    assert _finish(report, "C9 distortion exponent over 0-40 dB", ok1 and ok3, detail, clock, 60.0)


def test_c10_bound_orderings(report):
    bad = []
    with _Clock() as clock:
        for L in (1, 2, 3, 4):
            m = Erlang(L, 1.0)
            for db in SWEEP_DB:
                cfg = ChannelConfig.from_db(db, 2.0, m)
                opt = min_expected_distortion(cfg, 0).expected_distortion
                if not csit_expected_distortion(cfg) <= opt:
                    bad.append(("csit", L, db))
                if not infinite_diversity_distortion(cfg) <= opt:
                    bad.append(("mean-gain", L, db))
        spot = csit_expected_distortion(ChannelConfig(1.0, 1.0, Erlang(1, 1.0)))
    err = abs(spot - 0.5963474)
    ok = not bad and err <= 1e-6
    detail = f"{len(bad)} ordering violations over L in 1..4, 0-40 dB; CSIT spot {spot:.7f} (|err| {err:.1e})"
    assert _finish(report, "C10 bound orderings", ok, detail, clock, 10.0)


def test_c11_structure(report):
    with _Clock() as clock:
        m = Erlang(1, 1.0)
        g0 = solve_gamma_o(m)
        by_P = [solve_gamma_P(m, 2.0, P, g0) for P in (0.1, 1.0, 10.0, 100.0)]
        by_b = [solve_gamma_P(m, b, 1.0, g0) for b in (0.5, 1.0, 2.0, 4.0)]
        widths = []
        for L in (1, 2, 4, 8):
            s = min_expected_distortion(ChannelConfig(1.0, 2.0, Erlang(L, 1.0)), 0)
            widths.append(s.gamma_o - s.gamma_P)
        div = min_expected_distortion(ChannelConfig.from_db(30, 2.0, Erlang(2, 1.0)), 0).expected_distortion
        csit = csit_expected_distortion(ChannelConfig.from_db(30, 2.0, Erlang(1, 1.0)))
    p_ok = all(a > b for a, b in zip(by_P, by_P[1:]))
    b_ok = all(a > b for a, b in zip(by_b, by_b[1:]))
    w_ok = all(a > b for a, b in zip(widths, widths[1:]))
    d_ok = div < csit
    detail = (f"gamma_P falls with P {p_ok}, with b {b_ok}; widths "
              + ", ".join(f"{w:.3f}" for w in widths)
              + f" shrink {w_ok}; L=2 layered {div:.3e} < L=1 CSIT {csit:.3e} {d_ok}")
    assert _finish(report, "C11 structural regressions", p_ok and b_ok and w_ok and d_ok, detail, clock, 30.0)


if __name__ == "__main__":
    import sys

    results = []

    def _print_report(tag, ok, detail):
        print(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}", flush=True)
        results.append(ok)
        return ok

    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn(_print_report)
            except AssertionError:
                pass
    sys.exit(0 if all(results) else 1)
