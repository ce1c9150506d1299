"""Convergence studies: designs, fits, reference distributions and metrics.

Every random quantity is drawn from a stream keyed by the master seed and a
tuple of labels (see :func:`glam.simulators.stream_rng`), so runs can be
executed in any order or in parallel and still give identical results.
"""

import configparser
import csv
import hashlib
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import gld
from .doe import lhs, replicated_design
from .errors import GlamError
from .fit import FitConfig, fit
from .metrics import empirical_quantile, gld_view, normalized_mse, normalized_ws
from .model import Dataset
from .simulators import (analytic_reference, asian_payoff, get_simulator, stream_rng, stream_seed,
                         true_moments)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "simulate_design",
    "fit_once",
    "References",
    "build_references",
    "run_convergence",
    "CSV_HEADER",
]

CSV_HEADER = ["simulator", "N", "R", "repetition", "seed", "ws_error", "mean_nmse", "payoff_nmse",
              "status", "wall_time"]
CACHE_VERSION = 1


@dataclass
class ExperimentConfig:
    simulator: str = "black-scholes"
    sizes: tuple = (250, 500, 1000, 2000, 4000)
    repetitions: int = 50
    replications: tuple = (1,)
    n_test: int = 1000
    reference: str = "auto"
    n_reference: int = 10_000
    strike: float = 1.0
    seed: int = 0
    jobs: int = 1
    cache_dir: str | None = None
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        get_simulator(self.simulator)
        if self.reference not in ("auto", "analytic", "replications"):
            raise ValueError(f"unknown reference mode {self.reference!r}")
        if min(self.sizes) < 1 or self.repetitions < 1 or self.n_test < 1 or self.n_reference < 2:
            raise ValueError("sizes, repetitions, test points and reference draws must be positive")
        for n in self.sizes:
            for r in self.replications:
                if r < 1 or n % r:
                    raise ValueError(f"replication count {r} does not divide design size {n}")

    def quick(self):
        """Desk-scale protocol: three sizes, ten repetitions, small references."""
        return replace(self, sizes=(250, 500, 1000), repetitions=10, n_test=200, n_reference=2000)


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def load_config(path):
    """Read an INI file with an ``[experiment]`` and an optional ``[fit]`` section."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    kwargs = {}
    conv = {"simulator": str, "sizes": _ints, "repetitions": int, "replications": _ints, "n_test": int,
            "reference": str, "n_reference": int, "strike": float, "seed": int, "jobs": int,
            "cache_dir": str}
    for key, value in exp.items():
        if key not in conv:
            raise ValueError(f"unknown experiment setting {key!r}")
        kwargs[key] = conv[key](value)
    fit_kwargs = {}
    if parser.has_section("fit"):
        types = {f.name: f.type for f in fields(FitConfig)}
        for key, value in parser["fit"].items():
            if key in ("mean_degrees", "var_degrees"):
                fit_kwargs[key] = _ints(value)
            elif key == "q_norms":
                fit_kwargs[key] = _floats(value)
            elif key in ("n_fgls", "shape_degree", "tr_maxiter", "cmaes_max_evals", "seed"):
                fit_kwargs[key] = int(value)
            elif key == "gradient":
                fit_kwargs[key] = value
            elif key in types and key not in ("mean_truncation", "var_truncation"):
                fit_kwargs[key] = None if value.lower() == "none" else float(value)
            else:
                raise ValueError(f"unknown fit setting {key!r}")
    return ExperimentConfig(fit=FitConfig(**fit_kwargs), **kwargs)


def simulate_design(simulator, n_total, replications, master_seed, *keys):
    """LHS design and simulator outputs for one run."""
    sim = get_simulator(simulator)
    rng = stream_rng(master_seed, simulator, "design", *keys)
    if replications == 1:
        design = lhs(n_total, sim.marginals, rng)
    else:
        design = replicated_design(n_total, replications, sim.marginals, rng)
    y = np.concatenate([sim.run(x, rng, replications) for x in design.points]).astype(np.float64)
    if simulator == "sir":
        # the harness works with the number of new infections, |S_T - S_0|
        y = np.abs(y)
    reps = None if replications == 1 else design.replication_counts()
    return Dataset(design.points, y, reps)


def fit_once(simulator, n_total, replications, master_seed, fit_config, *keys):
    data = simulate_design(simulator, n_total, replications, master_seed, *keys)
    sim = get_simulator(simulator)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit(data, sim.marginals, fit_config)
    model.metadata["simulator"] = simulator
    return model


@dataclass
class References:
    """Test points with reference views and reference mean/payoff values."""

    X: np.ndarray
    views: list
    means: np.ndarray
    payoffs: np.ndarray | None


def _reference_samples(config, X):
    sim = get_simulator(config.simulator)
    key = json.dumps([CACHE_VERSION, config.simulator, config.seed, X.round(17).tolist(),
                      config.n_reference], sort_keys=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:24]
    path = None
    if config.cache_dir:
        path = os.path.join(config.cache_dir, f"reference-{digest}.npy")
        if os.path.exists(path):
            return np.load(path)
    samples = np.empty((X.shape[0], config.n_reference))
    for i, x in enumerate(X):
        samples[i] = sim.run(x, stream_rng(config.seed, config.simulator, "reference", i), config.n_reference)
    if config.simulator == "sir":
        samples = np.abs(samples)
    if path:
        os.makedirs(config.cache_dir, exist_ok=True)
        tmp = path + f".{os.getpid()}.tmp.npy"
        np.save(tmp, samples)
        os.replace(tmp, path)
    return samples


def build_references(config):
    """Test set and reference distributions, analytic where available."""
    sim = get_simulator(config.simulator)
    X = lhs(config.n_test, sim.marginals, stream_rng(config.seed, config.simulator, "test")).points
    mode = config.reference
    if mode == "auto":
        mode = "analytic" if config.simulator in ("black-scholes", "heteroskedastic-5d") else "replications"
    payoffs = None
    if mode == "analytic":
        views = [analytic_reference(config.simulator, x) for x in X]
        means = np.array([true_moments(config.simulator, x)[0] for x in X])
    else:
        samples = _reference_samples(config, X)
        views = [empirical_quantile(s) for s in samples]
        means = samples.mean(axis=1)
        if config.simulator == "asian":
            payoffs = asian_payoff(samples, config.strike).mean(axis=1)
    return References(X, views, means, payoffs)


def _run_seed(config, n, r, rep):
    # 64-bit fingerprint of the stream that generates this run's data
    ss = stream_seed(config.seed, config.simulator, "design", n, r, rep)
    return int(ss.generate_state(1, np.uint64)[0])


def _evaluate(model, refs, strike):
    lam = model.lambdas(refs.X)
    ws = float(np.mean([normalized_ws(v, gld_view(l)) for v, l in zip(refs.views, lam)]))
    mean, _ = gld.mean_variance(lam)
    mean_err = normalized_mse(mean, refs.means)
    pay_err = None
    if refs.payoffs is not None:
        pay_err = normalized_mse(gld.expected_payoff(lam, strike), refs.payoffs)
    return ws, mean_err, pay_err


_REFS = {}


def _references_cached(config):
    # workers rebuild the (deterministic) references once per process
    key = json.dumps(config_to_dict(config), sort_keys=True, default=str)
    if key not in _REFS:
        _REFS.clear()
        _REFS[key] = build_references(config)
    return _REFS[key]


def _one_run(args):
    config, n, r, rep = args
    refs = _references_cached(config)
    t0 = time.perf_counter()
    row = {"simulator": config.simulator, "N": n, "R": r, "repetition": rep,
           "seed": _run_seed(config, n, r, rep)}
    try:
        model = fit_once(config.simulator, n, r, config.seed, config.fit, n, r, rep)
        ws, mean_err, pay_err = _evaluate(model, refs, config.strike)
        row.update(ws_error=ws, mean_nmse=mean_err, payoff_nmse=pay_err, status="ok")
    except (GlamError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        row.update(ws_error=None, mean_nmse=None, payoff_nmse=None,
                   status=f"failed: {type(exc).__name__}: {exc}".replace("\n", " "))
    row["wall_time"] = time.perf_counter() - t0
    return row


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _summary(rows):
    groups = {}
    for row in rows:
        groups.setdefault((row["N"], row["R"]), []).append(row)
    out = []
    for (n, r), items in sorted(groups.items()):
        errs = np.array([i["ws_error"] for i in items if i["status"] == "ok"])
        entry = {"N": n, "R": r, "runs": len(items), "failures": int(len(items) - errs.size)}
        if errs.size:
            q1, med, q3 = np.percentile(errs, [25, 50, 75])
            entry.update(mean=float(errs.mean()), median=float(med), q1=float(q1), q3=float(q3))
        for key in ("mean_nmse", "payoff_nmse"):
            vals = [i[key] for i in items if i["status"] == "ok" and i[key] is not None]
            if vals:
                entry[f"{key}_mean"] = float(np.mean(vals))
        out.append(entry)
    return out


def run_convergence(config, out_dir, progress=None):
    """Run every ``(N, R, repetition)`` combination of ``config``.

    Writes ``results.csv`` and ``summary.json`` in ``out_dir`` and returns
    ``(rows, summary)``.  Rows are sorted by key regardless of completion
    order.
    """
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(config, n, r, rep) for n in config.sizes for r in config.replications
             for rep in range(config.repetitions)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_one_run, tasks))
    else:
        rows = []
        for task in tasks:
            rows.append(_one_run(task))
            if progress:
                progress(rows[-1])
    rows.sort(key=lambda r: (r["simulator"], r["N"], r["R"], r["repetition"]))

    with open(os.path.join(out_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
    summary = {
        "simulator": config.simulator,
        "seed": config.seed,
        "n_test": config.n_test,
        "n_reference": config.n_reference,
        "groups": _summary(rows),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, allow_nan=False)
        fh.write("\n")
    return rows, summary


def config_to_dict(config):
    d = asdict(config)
    d["fit"] = {k: v for k, v in d["fit"].items() if k not in ("mean_truncation", "var_truncation")}
    return d

