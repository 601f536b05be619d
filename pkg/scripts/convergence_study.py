"""Discrete-to-continuum convergence as the gain grid is refined.

For each spacing the fading law is quantized, the finite-state problem is
solved exactly and its expected distortion is compared with the continuum
optimum.  Monte Carlo under the continuum profile is reported as a third
opinion when ``--mc-samples`` is positive.
"""

import argparse
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

from layercast.baselines import ChannelConfig
from layercast.continuum import min_expected_distortion
from layercast.discrete_opt import solve_discrete
from layercast.fading import Erlang, discretize
from layercast.montecarlo import estimate_expected_distortion


@dataclass
class ConvergenceConfig:
    L: int = 1
    mean: float = 1.0
    b: float = 2.0
    snr_db: float = 0.0
    spacings: list = field(default_factory=lambda: [0.3, 0.1, 0.03, 0.01, 0.003, 0.001])
    gamma_max: float = 12.0
    mc_samples: int = 0
    seed: int = 0
    out: Path = Path("results/convergence.csv")


def run(cfg: ConvergenceConfig):
    model = Erlang(cfg.L, cfg.mean)
    config = ChannelConfig.from_db(cfg.snr_db, cfg.b, model)
    sol = min_expected_distortion(config)
    ref = sol.expected_distortion
    print(f"continuum E[D]* = {ref:.12g}")
    if cfg.mc_samples:
        est = estimate_expected_distortion(config, sol, cfg.mc_samples, cfg.seed)
        print(f"Monte Carlo     = {est.mean:.12g} +/- {est.std_error:.2g}")
    rows = []
    for delta in cfg.spacings:
        t0 = time.perf_counter()
        states = discretize(model, delta, cfg.gamma_max * cfg.mean)
        lay = solve_discrete(states, config.P, cfg.b)
        dt = time.perf_counter() - t0
        gap = (lay.expected_distortion - ref) / ref
        rows.append((delta, states.M, lay.expected_distortion, gap, dt))
        print(f"delta={delta:<7g} M={states.M:<6d} E[D]={lay.expected_distortion:.12g} rel gap {gap:+.3e} ({dt:.2f}s)")
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_gamma", "states", "expected_distortion", "relative_gap", "seconds"])
        w.writerows(rows)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    d = ConvergenceConfig()
    ap.add_argument("-L", type=int, default=d.L)
    ap.add_argument("-b", type=float, default=d.b)
    ap.add_argument("--snr-db", type=float, default=d.snr_db)
    ap.add_argument("--spacings", type=float, nargs="+", default=d.spacings)
    ap.add_argument("--mc-samples", type=int, default=d.mc_samples)
    ap.add_argument("--seed", type=int, default=d.seed)
    ap.add_argument("--out", type=Path, default=d.out)
    a = ap.parse_args()
    run(ConvergenceConfig(a.L, d.mean, a.b, a.snr_db, a.spacings, d.gamma_max, a.mc_samples, a.seed, a.out))


if __name__ == "__main__":
    main()
