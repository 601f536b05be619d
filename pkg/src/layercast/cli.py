"""Command-line front end.

Subcommands
-----------
solve        continuum solution for one config (discrete recursion for
             ``discrete:@file`` models)
sweep        E[D]* against SNR for several diversity orders, with CSIT and
             infinite-diversity references and fitted exponents
power-dist   optimal power density / cumulative power profile
compare      continuum vs discrete vs brute force vs Monte Carlo

Exit codes: 0 success, 2 bad flags, 3 solver failure, 4 cross-check outside
tolerance (compare only).

CSV tables are UTF-8 with a header row.  Column orders:

  solve        gamma,U,rho,D,W            (summary: quantity,value)
  solve (discrete model)
               gamma,probability,T,P,rate_bits
  sweep        snr_db,P,L,layered,csit,infinite_diversity[,mc_mean,mc_std_error]
               (exponents: L,exponent)
  power-dist   gamma,rho,U[,rho_cap,U_cap]
  compare      method,expected_distortion,deviation,tolerance,ok

With ``--out`` the first table goes to the given path, further tables to
``<stem>.<table>.csv`` and the run manifest to ``<path>.manifest.json``.
JSON output is a single object with ``manifest`` and ``data`` keys.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import baselines, continuum, discrete_opt, fading, montecarlo
from .baselines import ChannelConfig, db_to_linear
from .fading import Erlang, TabulatedDiscrete

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_TOLERANCE = 4

# compare tolerances
TOL_ORACLE = 1e-5
TOL_DISCRETE_REL = 1e-3
TOL_MC_SIGMAS = 3.0


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _snr_range(text: str) -> list[float]:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("need step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers") from None
    if not out or any(v < 1 for v in out):
        raise argparse.ArgumentTypeError("diversity orders must be positive")
    return out


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dist", default="erlang:L=1,mean=1",
                        help="erlang:L=<int>,mean=<float> or discrete:@<csv with gamma,probability>")
    common.add_argument("--bandwidth-ratio", "-b", type=_positive, default=2.0)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", type=Path, default=None, help="output path (default: stdout)")
    common.add_argument("--grid-points", type=int, default=continuum.GRID_POINTS)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--stamp", action="store_true",
                        help="record wall-clock time in the manifest (breaks byte-identical reruns)")

    parser = argparse.ArgumentParser(prog="layercast", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog=__doc__.split("\n\n", 1)[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one configuration")
    p.add_argument("--snr-db", type=float, default=0.0)

    p = sub.add_parser("sweep", parents=[common], help="E[D]* against SNR")
    p.add_argument("--snr-db-range", type=_snr_range, default=_snr_range("0:40:5"))
    p.add_argument("--diversity", type=_int_list, default=None)
    p.add_argument("--mc-samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("power-dist", parents=[common], help="optimal power distribution")
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--capacity-max", action="store_true", help="add the capacity-maximizing profile")

    p = sub.add_parser("compare", parents=[common], help="cross-validate the solvers")
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--layers", type=int, default=0, help="M <= 4 quantile layers for the brute-force check")
    p.add_argument("--grid", type=int, default=2000, help="brute-force grid points per axis")
    p.add_argument("--delta-gamma", type=_positive, default=1e-3)
    p.add_argument("--gamma-max", type=_positive, default=None,
                   help="discretization cutoff (default: 12 x mean gain)")
    p.add_argument("--mc-samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    return parser


# --------------------------------------------------------------------------- output

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (set, frozenset)):
        return sorted(_clean(v) for v in x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def emit(args, manifest: dict, data: dict, tables: dict) -> None:
    """Write JSON (manifest + data) or CSV tables to ``--out`` or stdout."""
    if args.format == "json":
        text = json.dumps({"manifest": _clean(manifest), "data": _clean(data)}, indent=2) + "\n"
        if args.out is None:
            sys.stdout.write(text)
        else:
            args.out.write_text(text, encoding="utf-8")
        return
    names = list(tables)
    if args.out is None:
        sys.stdout.write("\n".join(_csv_text(*tables[n]) for n in names))
        return
    args.out.write_text(_csv_text(*tables[names[0]]), encoding="utf-8")
    for name in names[1:]:
        side = args.out.with_name(f"{args.out.stem}.{name}.csv")
        side.write_text(_csv_text(*tables[name]), encoding="utf-8")
    Path(f"{args.out}.manifest.json").write_text(
        json.dumps(_clean(manifest), indent=2) + "\n", encoding="utf-8"
    )


def make_manifest(args, model, extra=None) -> dict:
    man = {
        "command": args.command,
        "tool": "layercast",
        "version": _version(),
        "distribution": args.dist,
        "bandwidth_ratio": args.bandwidth_ratio,
        "grid_points": args.grid_points,
        "tolerances": {
            "quad_epsabs": continuum.QUAD_EPSABS,
            "quad_epsrel": continuum.QUAD_EPSREL,
            "root_rtol": 1e-12,
        },
    }
    if isinstance(model, Erlang):
        man["L"] = model.L
        man["mean"] = model.mean
    if hasattr(args, "snr_db"):
        man["snr_db"] = args.snr_db
        man["P"] = db_to_linear(args.snr_db)
    if extra:
        man.update(extra)
    if args.stamp:
        man["timestamp"] = datetime.now(timezone.utc).isoformat()
    return man


def _need_erlang(model, command):
    if not isinstance(model, Erlang):
        raise UsageError(f"{command} needs an erlang model")


# --------------------------------------------------------------------------- commands

def cmd_solve(args, model) -> int:
    P = db_to_linear(args.snr_db)
    if isinstance(model, TabulatedDiscrete):
        lay = discrete_opt.solve_discrete(model, P, args.bandwidth_ratio)
        ed = lay.expected_distortion
        cols = ("gamma", "probability", "T", "P", "rate_bits")
        rows = list(zip(lay.gains, lay.probs, lay.cumulative, lay.powers, lay.rates))
        summary = {"expected_distortion": ed, "M": lay.M, "flags": lay.flags}
        data = {"summary": summary, "layers": dict(zip(cols, map(np.asarray, zip(*rows))))}
        tables = {"layers": (cols, rows), "summary": (("quantity", "value"), [("expected_distortion", ed), ("M", lay.M)])}
        emit(args, make_manifest(args, model), data, tables)
        return EXIT_OK
    sol = continuum.min_expected_distortion(ChannelConfig(P, args.bandwidth_ratio, model), args.grid_points)
    summary = {
        "gamma_o": sol.gamma_o,
        "gamma_P": sol.gamma_P,
        "expected_distortion": sol.expected_distortion,
        "flags": sol.flags,
    }
    profile = {"gamma": sol.grid, "U": sol.cumulative, "rho": sol.rho, "D": sol.distortion, "W": sol.weight}
    cols = tuple(profile)
    tables = {
        "summary": (("quantity", "value"), [(k, v) for k, v in summary.items() if k != "flags"]),
        "profile": (cols, list(zip(*profile.values()))),
    }
    emit(args, make_manifest(args, model), {"summary": summary, "profile": profile}, tables)
    return EXIT_OK


def _sweep_point(model, b, db, mc_samples, seed):
    cfg = ChannelConfig.from_db(db, b, model)
    grid = continuum.GRID_POINTS if mc_samples else 0
    sol = continuum.min_expected_distortion(cfg, grid)
    row = {
        "snr_db": db,
        "P": cfg.P,
        "L": model.L,
        "layered": sol.expected_distortion,
        "csit": baselines.csit_expected_distortion(cfg),
        "infinite_diversity": baselines.infinite_diversity_distortion(cfg),
    }
    if mc_samples:
        est = montecarlo.estimate_expected_distortion(cfg, sol, mc_samples, seed)
        row["mc_mean"] = est.mean
        row["mc_std_error"] = est.std_error
    return row


def cmd_sweep(args, model) -> int:
    _need_erlang(model, "sweep")
    orders = args.diversity or [model.L]
    jobs = [(Erlang(L, model.mean), db) for L in orders for db in args.snr_db_range]
    work = lambda job: _sweep_point(job[0], args.bandwidth_ratio, job[1], args.mc_samples, args.seed)
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]
    exponents = {}
    for L in orders:
        pts = [(r["P"], r["layered"]) for r in rows if r["L"] == L]
        try:
            exponents[L] = baselines.distortion_exponent_fit(pts)
        except baselines.InsufficientSpanError:
            exponents[L] = float("nan")
    cols = tuple(rows[0])
    tables = {
        "sweep": (cols, [tuple(r.values()) for r in rows]),
        "exponents": (("L", "exponent"), list(exponents.items())),
    }
    extra = {"snr_db_range": args.snr_db_range, "diversity": orders, "mc_samples": args.mc_samples,
             "seed": args.seed, "rng": montecarlo.RNG_ALGORITHM}
    emit(args, make_manifest(args, model, extra), {"rows": rows, "exponents": exponents}, tables)
    return EXIT_OK


def cmd_power_dist(args, model) -> int:
    _need_erlang(model, "power-dist")
    P = db_to_linear(args.snr_db)
    sol = continuum.min_expected_distortion(ChannelConfig(P, args.bandwidth_ratio, model), args.grid_points)
    profile = {"gamma": sol.grid, "rho": sol.rho, "U": sol.cumulative}
    if args.capacity_max:
        g = sol.grid
        u_cap = np.asarray(baselines.capacity_max_cumulative_power(model, g))
        rho_cap = np.asarray(baselines.capacity_max_power_density(model, g))
        exhausted = u_cap >= P
        profile["rho_cap"] = np.where(exhausted, 0.0, rho_cap)
        profile["U_cap"] = np.minimum(u_cap, P)
    cols = tuple(profile)
    summary = {"gamma_o": sol.gamma_o, "gamma_P": sol.gamma_P, "expected_distortion": sol.expected_distortion}
    tables = {"profile": (cols, list(zip(*profile.values())))}
    extra = {"capacity_max": args.capacity_max}
    emit(args, make_manifest(args, model, extra), {"summary": summary, "profile": profile}, tables)
    return EXIT_OK


def quantile_layers(model: Erlang, M: int) -> TabulatedDiscrete:
    """``M`` equiprobable layers at the lower edges of the gain quantile bins."""
    from scipy import special

    qs = np.arange(M) / M
    gains = special.gammaincinv(model.L, qs) / model.rate
    return TabulatedDiscrete(tuple(gains), tuple(np.full(M, 1.0 / M)))


def cmd_compare(args, model) -> int:
    P = db_to_linear(args.snr_db)
    b = args.bandwidth_ratio
    cfg = ChannelConfig(P, b, model)
    results = []  # (method, value, deviation, tolerance, ok)
    legs = {}

    if isinstance(model, Erlang):
        gmax = args.gamma_max or 12.0 * model.mean
        legs["continuum"] = lambda: continuum.min_expected_distortion(cfg, args.grid_points)
        legs["discrete"] = lambda: discrete_opt.solve_discrete(fading.discretize(model, args.delta_gamma, gmax), P, b)
    else:
        legs["discrete"] = lambda: discrete_opt.solve_discrete(model, P, b)
    if args.layers:
        if not 1 <= args.layers <= 4:
            raise UsageError("--layers must be between 1 and 4")
        states = quantile_layers(model, args.layers) if isinstance(model, Erlang) else model
        if states.M > 4:
            raise UsageError("brute force needs at most 4 states")
        legs["recursion_M"] = lambda: discrete_opt.solve_discrete(states, P, b)
        legs["brute_force_M"] = lambda: discrete_opt.brute_force_oracle(states, P, b, args.grid)
    elif isinstance(model, TabulatedDiscrete) and model.M <= 4:
        legs["brute_force"] = lambda: discrete_opt.brute_force_oracle(model, P, b, args.grid)

    names = list(legs)
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            out = dict(zip(names, pool.map(lambda n: legs[n](), names)))
    else:
        out = {n: legs[n]() for n in names}

    ref_name = "continuum" if "continuum" in out else "discrete"
    ref = out[ref_name].expected_distortion
    results.append((ref_name, ref, 0.0, float("nan"), True))
    if ref_name == "continuum":
        d = out["discrete"].expected_distortion
        dev = abs(d - ref) / ref
        results.append(("discrete", d, dev, TOL_DISCRETE_REL, dev < TOL_DISCRETE_REL))
    if "recursion_M" in out:
        r = out["recursion_M"].expected_distortion
        bf = out["brute_force_M"].expected_distortion
        results.append(("recursion_M", r, float("nan"), float("nan"), True))
        results.append(("brute_force_M", bf, abs(r - bf), TOL_ORACLE, abs(r - bf) < TOL_ORACLE))
    if "brute_force" in out:
        bf = out["brute_force"].expected_distortion
        results.append(("brute_force", bf, abs(ref - bf), TOL_ORACLE, abs(ref - bf) < TOL_ORACLE))
    if args.mc_samples:
        est = montecarlo.estimate_expected_distortion(cfg, out[ref_name], args.mc_samples, args.seed, args.workers)
        dev = abs(est.mean - ref)
        tol = TOL_MC_SIGMAS * est.std_error
        results.append(("monte_carlo", est.mean, dev, tol, dev < tol))
        mc_meta = {"mc_std_error": est.std_error, "mc_samples": est.n_samples}
    else:
        mc_meta = {}

    cols = ("method", "expected_distortion", "deviation", "tolerance", "ok")
    rows = [(m, v, d, t, str(ok).lower()) for m, v, d, t, ok in results]
    data = {"results": [dict(zip(cols, (m, v, d, t, ok))) for m, v, d, t, ok in results], **mc_meta}
    extra = {"layers": args.layers, "delta_gamma": args.delta_gamma, "gamma_max": args.gamma_max,
             "brute_force_grid": args.grid, "mc_samples": args.mc_samples, "seed": args.seed,
             "rng": montecarlo.RNG_ALGORITHM}
    emit(args, make_manifest(args, model, extra), data, {"compare": (cols, rows)})
    return EXIT_OK if all(r[4] for r in results) else EXIT_TOLERANCE


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "power-dist": cmd_power_dist, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        model = fading.parse_model(args.dist)
        if args.grid_points < 0 or args.workers < 1:
            raise UsageError("--grid-points must be >= 0 and --workers >= 1")
        if getattr(args, "mc_samples", 0) and args.mc_samples < 1000:
            raise UsageError("--mc-samples must be at least 1000")
        return COMMANDS[args.command](args, model)
    except (UsageError, ValueError, OSError, fading.FadingKindError) as exc:
        print(f"layercast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except continuum.SolverError as exc:
        print(f"layercast: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
