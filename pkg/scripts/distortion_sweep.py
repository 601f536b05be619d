"""Expected distortion against SNR for several diversity orders.

Compares the layered optimum with the CSIT and mean-gain bounds, fits the
high-SNR exponent and, with ``--local-slopes``, prints the pointwise slope
of ``-ln E[D]`` to show how slowly it settles.
"""

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from layercast.baselines import (
    ChannelConfig,
    csit_expected_distortion,
    distortion_exponent_fit,
    infinite_diversity_distortion,
)
from layercast.continuum import min_expected_distortion
from layercast.fading import Erlang


@dataclass
class SweepConfig:
    snr_db: tuple = (0.0, 40.0, 5.0)
    diversity: list = field(default_factory=lambda: [1, 2, 3, 4])
    b: float = 2.0
    mean: float = 1.0
    local_slopes: bool = False
    out: Path = Path("results/distortion_sweep.csv")


def run(cfg: SweepConfig):
    lo, hi, step = cfg.snr_db
    dbs = np.arange(lo, hi + step / 2, step)
    rows = []
    for L in cfg.diversity:
        m = Erlang(L, cfg.mean)
        eds = []
        for db in dbs:
            c = ChannelConfig.from_db(db, cfg.b, m)
            ed = min_expected_distortion(c, 0).expected_distortion
            eds.append(ed)
            rows.append((L, db, c.P, ed, csit_expected_distortion(c), infinite_diversity_distortion(c)))
        fit = distortion_exponent_fit(list(zip(10 ** (dbs / 10), eds)))
        print(f"L={L}: fitted exponent {fit:.3f} (min(b, L) = {min(cfg.b, L):g})")
        if cfg.local_slopes:
            slopes = np.diff(-np.log(eds)) / np.diff(np.log(10 ** (dbs / 10)))
            for a, s in zip(dbs[1:], slopes):
                print(f"    slope ending at {a:5.1f} dB: {s:.3f}")
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["L", "snr_db", "P", "layered", "csit", "infinite_diversity"])
        w.writerows(rows)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    d = SweepConfig()
    ap.add_argument("--snr-db", type=float, nargs=3, default=d.snr_db, metavar=("LO", "HI", "STEP"))
    ap.add_argument("--diversity", type=int, nargs="+", default=d.diversity)
    ap.add_argument("-b", type=float, default=d.b)
    ap.add_argument("--local-slopes", action="store_true")
    ap.add_argument("--out", type=Path, default=d.out)
    a = ap.parse_args()
    run(SweepConfig(tuple(a.snr_db), a.diversity, a.b, d.mean, a.local_slopes, a.out))


if __name__ == "__main__":
    main()
