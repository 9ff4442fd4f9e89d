"""Command-line entry point: simulate, estimate, probe-diameter, depth."""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .data import read_csv
from .depth import hdepth, rdepth
from .geometry import FeasibleRegion
from .mechanisms import (
    InfeasibleError,
    dp_deepest_reg,
    dp_medsweep,
    dp_tukey_median,
    rdp_deepest_reg,
    rdp_median,
    rdp_tukey_median,
)
from .simulation import ConfigError, ExperimentConfig, probe_min_diameter, report, run_experiment, write_diameters
from .special import PrivacyBudget, RandomSource

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3

ESTIMATE_MECHANISMS = (
    "tukey-median", "deepest-reg", "medsweep", "rdp-median", "rdp-tukey-median", "rdp-deepest-reg",
)


class UsageError(ValueError):
    pass


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None


def parse_region(text, dim):
    """``a,b`` gives [a, b] (or [a, b]^2 in the plane); a file path gives polygon vertices."""
    if text is None:
        return None
    if os.path.exists(text):
        verts = np.loadtxt(text, delimiter=",", ndmin=2)
        return FeasibleRegion.polygon(verts)
    vals = _floats(text, "--region")
    if len(vals) != 2:
        raise UsageError("--region takes a,b or a polygon vertex file")
    return FeasibleRegion.box(vals[0], vals[1], dim)


def _estimate(args):
    budget = PrivacyBudget(args.epsilon, args.delta, args.gamma)
    mech = args.mechanism
    rdp = mech.startswith("rdp-")
    if rdp and args.gamma is None:
        raise UsageError(f"{mech} needs --gamma")
    kind = "regression" if mech in ("deepest-reg", "medsweep", "rdp-deepest-reg") else "location"
    data = read_csv(args.input, kind)
    rng = RandomSource(args.seed)
    dim = 1 if mech in ("rdp-median",) else data.d
    region = None if mech == "medsweep" else parse_region(args.region, dim)
    if mech == "tukey-median":
        if region is None:
            raise UsageError("tukey-median needs --region")
        out = dp_tukey_median(data, region, budget, rng)
    elif mech == "deepest-reg":
        if region is None:
            raise UsageError("deepest-reg needs --region")
        out = dp_deepest_reg(data, region, budget, rng)
    elif mech == "medsweep":
        bounds = _floats(args.region or "", "--region") if args.region else []
        if len(bounds) != 2:
            raise UsageError("medsweep needs --region L,U")
        out = dp_medsweep(data.X, data.y, bounds[0], bounds[1], budget, rng)
    elif mech == "rdp-median":
        out = rdp_median(data, budget, rng)
    elif mech == "rdp-tukey-median":
        out = rdp_tukey_median(data, budget, rng)
    else:
        out = rdp_deepest_reg(data, budget, rng)
    reg = out.region
    payload = {
        "mechanism": mech,
        "estimate": [float(v) for v in np.atleast_1d(out.estimate)],
        "noise_scale": out.noise_scale,
        "alpha": out.calibration.alpha,
        "beta": out.calibration.beta,
        "smooth_sensitivity": out.smooth_bound.value,
        "argmax_k": out.smooth_bound.argmax_k,
        "region": None if reg is None else (list(reg.bounds) if reg.dim == 1 else reg.vertices.tolist()),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    return EXIT_OK


def _simulate(args):
    cfg = ExperimentConfig.from_json(args.config)
    rows = run_experiment(cfg)
    for path in report(rows, args.out, args.format):
        print(path)
    return EXIT_OK


def _probe(args):
    cfg = ExperimentConfig.from_json(args.config)
    table = probe_min_diameter(cfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "diameters.csv")
    write_diameters(table, path)
    for rec in table:
        print(f"n={rec['n']} epsilon={rec['epsilon']:g} min_diameter={rec['min_diameter']:.6g}")
    return EXIT_OK


def _depth(args):
    kind = "regression" if args.mode == "regression" else "location"
    data = read_csv(args.input, kind)
    theta = _floats(args.theta, "--theta")
    value = rdepth(theta, data) if args.mode == "regression" else hdepth(theta, data)
    print(value)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="depthdp", description="Depth-based private estimation and simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a simulation grid from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="results")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=_simulate)

    e = sub.add_parser("estimate", help="release one private estimate from a CSV file")
    e.add_argument("--input", required=True)
    e.add_argument("--mechanism", required=True, choices=ESTIMATE_MECHANISMS)
    e.add_argument("--epsilon", required=True, type=float)
    e.add_argument("--delta", required=True, type=float)
    e.add_argument("--gamma", type=float)
    e.add_argument("--region", help="a,b for [a,b] or [a,b]^2, or a CSV file of polygon vertices")
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_estimate)

    d = sub.add_parser("probe-diameter", help="smallest region diameter that changes the noise scale")
    d.add_argument("--config", required=True)
    d.add_argument("--out", default="results")
    d.set_defaults(func=_probe)

    h = sub.add_parser("depth", help="halfspace or regression depth of one point")
    h.add_argument("--input", required=True)
    h.add_argument("--mode", required=True, choices=("halfspace", "regression"))
    h.add_argument("--theta", required=True)
    h.set_defaults(func=_depth)
    return p


def _join_option_values(argv, options=("--region", "--theta")):
    # argparse takes "-50,50" for a flag; glue such values onto their option
    out = []
    it = iter(argv)
    for tok in it:
        if tok in options:
            value = next(it, None)
            out.append(tok if value is None else f"{tok}={value}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_option_values(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
