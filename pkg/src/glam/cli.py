"""Command-line interface: ``glam fit | convergence | pdf-compare | simulate``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import BACKEND, gld
from .errors import GlamError
from .experiment import ExperimentConfig, config_to_dict, fit_once, load_config, run_convergence
from .model import load_model, save_model
from .pce import to_standard
from .simulators import SIMULATORS, analytic_density, get_simulator, stream_rng

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parse_points(text, dim):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        vals = [float(v) for v in chunk.replace(",", " ").split()]
        if len(vals) != dim:
            raise UsageError(f"point {chunk!r} has {len(vals)} components, expected {dim}")
        pts.append(vals)
    if not pts:
        raise UsageError("no points given")
    return np.array(pts)


def _base_config(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "simulator", None):
        config = replace(config, simulator=args.simulator)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.quick:
        config = config.quick()
    return config


def cmd_fit(args):
    config = _base_config(args)
    size = args.size or config.sizes[0]
    reps = args.replications or config.replications[0]
    if size % reps:
        raise UsageError(f"{reps} replications do not divide {size} runs")
    t0 = time.perf_counter()
    model = fit_once(config.simulator, size, reps, config.seed, config.fit, size, reps, 0)
    model.metadata["seed"] = config.seed
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, args.name)
    save_model(model, path)
    names = ("lambda1", "log lambda2", "lambda3", "lambda4")
    print(f"final negative log-likelihood: {model.metadata['nll_final']:.10g}")
    for name, t in zip(names, model.truncations):
        print(f"{name}: {len(t)} terms (p={t.p}, q={t.q})")
    for msg in model.metadata.get("warnings", []):
        print(f"warning: {msg}", file=sys.stderr)
    print(f"model written to {path} ({time.perf_counter() - t0:.2f} s)")
    return EXIT_OK


def cmd_convergence(args):
    config = _base_config(args)
    if args.jobs:
        config = replace(config, jobs=args.jobs)
    if config.cache_dir is None:
        config = replace(config, cache_dir=os.path.join(args.out, "cache"))

    def progress(row):
        if args.verbose:
            print(f"N={row['N']} R={row['R']} rep={row['repetition']}: {row['status']} "
                  f"ws={row['ws_error']}", file=sys.stderr)

    rows, summary = run_convergence(config, args.out, progress)
    with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(config), fh, indent=1, default=str)
        fh.write("\n")
    for g in summary["groups"]:
        mean = g.get("mean")
        print(f"N={g['N']:>5} R={g['R']:>3} runs={g['runs']:>3} failures={g['failures']} "
              f"mean={mean if mean is None else format(mean, '.4f')}")
    failed = sum(g["failures"] for g in summary["groups"])
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_pdf_compare(args):
    model = load_model(args.model)
    simulator = args.simulator or model.metadata.get("simulator")
    X = _parse_points(args.points, model.marginals.dim)
    to_standard(model.marginals, X)  # domain check
    mode = args.reference
    if mode == "auto":
        mode = "analytic" if simulator in ("black-scholes", "heteroskedastic-5d") else "replications"
    if mode != "none" and simulator is None:
        raise UsageError("the model file names no simulator; pass --simulator or --reference none")
    seed = 0 if args.seed is None else args.seed
    os.makedirs(args.out, exist_ok=True)
    pdf_path = os.path.join(args.out, "pdf.txt")
    hist_path = os.path.join(args.out, "histogram.txt")
    lam = model.lambdas(X)
    with open(pdf_path, "w", encoding="utf-8") as fp, open(hist_path, "w", encoding="utf-8") as fh:
        fp.write("point\ty\tsurrogate_pdf\treference_pdf\n")
        fh.write("point\tbin_left\tbin_right\tmass\tdensity\n")
        for k, (x, l) in enumerate(zip(X, lam)):
            lo, hi = gld.quantile([1e-6, 1.0 - 1e-6], l)
            grid = np.linspace(lo, hi, args.grid_size)
            surrogate = gld.pdf(grid, l)
            ref = np.full_like(grid, np.nan)
            if mode == "analytic":
                ref = analytic_density(simulator, x, grid)
            elif mode == "replications":
                sim = get_simulator(simulator)
                draws = sim.run(x, stream_rng(seed, simulator, "pdf-compare", k), args.n_reference)
                if simulator == "sir":
                    draws = np.abs(draws)
                counts, edges = np.histogram(draws, bins=args.bins)
                mass = counts / counts.sum()
                for a, b, m in zip(edges[:-1], edges[1:], mass):
                    fh.write(f"{k}\t{a:.17g}\t{b:.17g}\t{m:.17g}\t{m / (b - a):.17g}\n")
            for yv, s, r in zip(grid, surrogate, ref):
                fp.write(f"{k}\t{yv:.17g}\t{s:.17g}\t{r:.17g}\n")
    print(f"wrote {pdf_path} and {hist_path}")
    return EXIT_OK


def cmd_simulate(args):
    sim = get_simulator(args.simulator)
    x = _parse_points(args.x, sim.dim)[0]
    if not args.allow_outside:
        to_standard(sim.marginals, x)
    seed = 0 if args.seed is None else args.seed
    draws = sim.run(x, stream_rng(seed, sim.identifier, "simulate"), args.n)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, args.name)
    with open(path, "w", encoding="utf-8") as fh:
        for v in draws:
            fh.write(f"{int(v)}\n" if sim.integer_output else f"{float(v):.17g}\n")
    print(f"{args.n} draws written to {path}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [experiment] and [fit] sections")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default="glam-out", help="output directory")
    common.add_argument("--quick", action="store_true",
                        help="desk-scale protocol: sizes 250/500/1000, 10 repetitions, 200 test points")

    parser = argparse.ArgumentParser(prog="glam", description="Generalized lambda model emulators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)
    sims = sorted(SIMULATORS)

    p = sub.add_parser("fit", parents=[common], help="simulate a design, fit a model and save it")
    p.add_argument("--simulator", choices=sims)
    p.add_argument("--size", type=int, help="number of simulator runs")
    p.add_argument("--replications", type=int, help="runs per distinct point")
    p.add_argument("--name", default="model.json", help="model file name inside --out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("convergence", parents=[common], help="error study over design sizes")
    p.add_argument("--simulator", choices=sims)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("pdf-compare", parents=[common], help="surrogate vs reference densities")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True, help='points as "a,b;c,d"')
    p.add_argument("--simulator", choices=sims, help="overrides the simulator stored in the model")
    p.add_argument("--reference", choices=("auto", "analytic", "replications", "none"), default="auto")
    p.add_argument("--n-reference", type=int, default=10_000)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--grid-size", type=int, default=2001)
    p.set_defaults(func=cmd_pdf_compare)

    p = sub.add_parser("simulate", parents=[common], help="draw simulator outputs at one point")
    p.add_argument("--simulator", choices=sims, required=True)
    p.add_argument("--x", required=True, help='input point as "a,b"')
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--name", default="samples.txt")
    p.add_argument("--allow-outside", action="store_true", help="skip the input-domain check")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (GlamError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
