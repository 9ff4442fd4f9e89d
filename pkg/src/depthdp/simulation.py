"""Simulation engine: data generation, mechanism grids, error tables and reports."""

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import stats

from . import baselines
from .data import Dataset
from .geometry import FeasibleRegion
from .mechanisms import default_region, dp_deepest_reg, dp_medsweep, min_feasible_diameter
from .special import PrivacyBudget, RandomSource

log = logging.getLogger(__name__)

DGP_FAMILIES = ("normal", "laplace", "student-t3")
MECHANISMS = ("dp-deepest-reg", "dp-medsweep", "noisy-stats", "dp-theil-sen", "dp-grad-desc", "ols")
RESULT_COLUMNS = (
    "mechanism", "dgp", "n", "epsilon", "iteration", "eval_point",
    "error", "failed", "noise_scale", "runtime_ms",
)
EVAL_LABELS = ("q25", "q75")


class ConfigError(ValueError):
    """An experiment configuration that cannot be run."""


@dataclass(frozen=True)
class MedsweepSettings:
    L: float | None = None
    U: float | None = None
    tol: float = 1e-4
    max_iter: int = 30

    def bounds(self, y, psi):
        """(L, U); a missing U is the psi-quantile of |y| and a missing L is -U."""
        U = self.U
        if U is None:
            mag = np.sort(np.abs(y))
            U = float(mag[math.ceil(psi * len(mag)) - 1])
            if U <= 0:
                U = 1.0
        L = -U if self.L is None else self.L
        return L, U


@dataclass(frozen=True)
class ExperimentConfig:
    dgp_family: tuple = ("normal",)
    n_grid: tuple = (50, 100, 200, 300, 400, 500)
    epsilon_grid: tuple = (4.0, 12.0)
    delta: float = 1e-6
    psi: float = 0.98
    iterations: int = 100
    mechanisms: tuple = MECHANISMS
    theta_region: FeasibleRegion = field(default_factory=default_region)
    medsweep: MedsweepSettings = MedsweepSettings()
    master_seed: int = 0
    record_runtime: bool = True

    def __post_init__(self):
        fam = (self.dgp_family,) if isinstance(self.dgp_family, str) else tuple(self.dgp_family)
        object.__setattr__(self, "dgp_family", fam)
        for name in ("n_grid", "epsilon_grid", "mechanisms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not fam or any(f not in DGP_FAMILIES for f in fam):
            raise ConfigError(f"dgp-family must be drawn from {DGP_FAMILIES}, got {fam}")
        if not self.n_grid or any(int(n) != n or n < 4 for n in self.n_grid):
            raise ConfigError("n-grid must be a nonempty list of integers >= 4")
        if not self.epsilon_grid or any(not (e > 0 and math.isfinite(e)) for e in self.epsilon_grid):
            raise ConfigError("epsilon-grid must be a nonempty list of positive reals")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not 0 < self.psi <= 1:
            raise ConfigError("psi must lie in (0, 1]")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigError("iterations must be a positive integer")
        if not self.mechanisms:
            raise ConfigError("mechanisms must name at least one mechanism")
        unknown = [m for m in self.mechanisms if m not in MECHANISMS]
        if unknown:
            raise ConfigError(f"unknown mechanisms {unknown}; choose from {MECHANISMS}")
        if len(set(self.mechanisms)) != len(self.mechanisms):
            raise ConfigError("mechanisms must not repeat")
        if self.theta_region.dim != 2:
            raise ConfigError("theta-region must be a polygon")
        ms = self.medsweep
        if ms.tol <= 0 or ms.max_iter < 1:
            raise ConfigError("medsweep needs tol > 0 and max-iter >= 1")
        if ms.L is not None and ms.U is not None and not ms.L < ms.U:
            raise ConfigError("medsweep needs L < U")

    @classmethod
    def from_dict(cls, raw):
        """Build from a kebab-case mapping (JSON config)."""
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {f.name.replace("_", "-"): f.name for f in fields(cls)}
        unknown = sorted(set(raw) - set(allowed))
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        kw = {allowed[k]: v for k, v in raw.items()}
        try:
            if "theta_region" in kw:
                kw["theta_region"] = _parse_region(kw["theta_region"])
            if "medsweep" in kw:
                kw["medsweep"] = _parse_medsweep(kw["medsweep"])
            for key in ("iterations", "master_seed"):
                if key in kw and (isinstance(kw[key], bool) or not isinstance(kw[key], int)):
                    raise ConfigError(f"{key.replace('_', '-')} must be an integer")
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls.from_dict(raw)


def _parse_region(value):
    # [lo, hi] is the square [lo, hi]^2; {"vertices": [[x, y], ...]} a polygon
    if isinstance(value, dict) and set(value) == {"vertices"}:
        return FeasibleRegion.polygon(value["vertices"])
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) for v in value
    ):
        return FeasibleRegion.box(float(value[0]), float(value[1]))
    raise ConfigError("theta-region must be [lo, hi] or {\"vertices\": [[x, y], ...]}")


def _parse_medsweep(value):
    if not isinstance(value, dict):
        raise ConfigError("medsweep must be an object")
    names = {"L": "L", "U": "U", "tol": "tol", "max-iter": "max_iter"}
    unknown = sorted(set(value) - set(names))
    if unknown:
        raise ConfigError(f"unknown medsweep keys {unknown}")
    return MedsweepSettings(**{names[k]: v for k, v in value.items()})


# ------------------------------------------------------------------ data


def _draw(family, gen, size):
    if family == "normal":
        return gen.standard_normal(size)
    if family == "laplace":
        return gen.laplace(0.0, 1.0, size)
    if family == "student-t3":
        return gen.standard_t(3, size)
    raise ConfigError(f"unknown DGP family {family!r}")


def generate_dgp(family, n, rng):
    """n draws of y = 1 + 2x + v with x and v independent from ``family``."""
    x = _draw(family, rng.generator, n)
    v = _draw(family, rng.generator, n)
    return Dataset.regression(x, 1.0 + 2.0 * x + v)


_DISTRIBUTIONS = {
    "normal": stats.norm(),
    "laplace": stats.laplace(),
    "student-t3": stats.t(3),
}


def eval_points(family):
    """Population quartiles of the covariate distribution."""
    dist = _DISTRIBUTIONS[family]
    return float(dist.ppf(0.25)), float(dist.ppf(0.75))


def true_line(at):
    return tuple(1.0 + 2.0 * a for a in at)


# ------------------------------------------------------------------ running


@dataclass(frozen=True)
class ResultRow:
    mechanism: str
    dgp: str
    n: int
    epsilon: float
    iteration: int
    eval_point: str
    error: float | None
    failed: bool
    noise_scale: float
    runtime_ms: int


def _line_result(theta, at, scale):
    return baselines.BaselineResult.from_line(theta[0], theta[1], at, noise_scale=scale)


def run_mechanism(name, data, epsilon, config, rng, at):
    """One release of ``name`` on a regression dataset; returns a BaselineResult."""
    rows = data.rows
    budget = PrivacyBudget(epsilon, config.delta)
    if name == "dp-deepest-reg":
        out = dp_deepest_reg(rows, config.theta_region, budget, rng)
        return _line_result(out.estimate, at, out.noise_scale)
    if name == "dp-medsweep":
        L, U = config.medsweep.bounds(rows[:, 1], config.psi)
        ms = config.medsweep
        out = dp_medsweep(rows[:, :1], rows[:, 1], L, U, budget, rng, tol=ms.tol, max_iter=ms.max_iter)
        return _line_result(out.estimate, at, out.noise_scale)
    if name == "noisy-stats":
        box = baselines.psi_bounding_box(rows, config.psi)
        return baselines.noisy_stats(rows, box, epsilon, rng, at)
    if name == "dp-theil-sen":
        box = baselines.psi_bounding_box(rows, config.psi)
        return baselines.dp_theil_sen(rows, box, epsilon, rng, at)
    if name == "dp-grad-desc":
        return baselines.dp_grad_desc(rows, epsilon, config.delta, rng, at)
    if name == "ols":
        return baselines.ols(rows, at)
    raise ConfigError(f"unknown mechanism {name!r}")


def cell_source(config, family, n, epsilon, iteration):
    """Random stream of one (DGP, n, epsilon, iteration) cell.

    Keys are values, not grid positions, so editing a grid leaves other
    cells untouched. Child 0 draws the data; child (1, j) drives mechanism j.
    """
    key = (DGP_FAMILIES.index(family), int(n), int(round(epsilon * 1e6)), int(iteration))
    return RandomSource(config.master_seed, key)


def mechanism_source(cell, name):
    return cell.child(1, MECHANISMS.index(name))


def run_cell(config, family, n, epsilon, iteration):
    """Result rows of every configured mechanism for one dataset."""
    cell = cell_source(config, family, n, epsilon, iteration)
    data = generate_dgp(family, n, cell.child(0))
    at = eval_points(family)
    truth = true_line(at)
    out = []
    for name in config.mechanisms:
        t0 = time.perf_counter()
        res = run_mechanism(name, data, epsilon, config, mechanism_source(cell, name), at)
        ms = int(round(1000 * (time.perf_counter() - t0))) if config.record_runtime else 0
        for j, label in enumerate(EVAL_LABELS):
            err = None if res.failed else res.predictions[j] - truth[j]
            out.append(ResultRow(name, family, int(n), float(epsilon), int(iteration), label,
                                 err, res.failed, float(res.noise_scale), ms))
    return out


def run_experiment(config, progress=None):
    """Rows for every (DGP, n, epsilon, iteration, mechanism, eval point)."""
    for fam in config.dgp_family:
        log.info("evaluation abscissae for %s: %s", fam, eval_points(fam))
    rows = []
    for fam in config.dgp_family:
        for n in config.n_grid:
            for eps in config.epsilon_grid:
                for it in range(config.iterations):
                    rows.extend(run_cell(config, fam, n, eps, it))
                if progress:
                    progress(fam, n, eps)
    return rows


def aggregate(rows):
    """MSE and median absolute error per cell and eval point, failures excluded."""
    groups = {}
    for r in rows:
        for label in (r.eval_point, "all"):
            groups.setdefault((r.mechanism, r.dgp, r.n, r.epsilon, label), []).append(r)
    out = []
    for (mech, dgp, n, eps, label), grp in sorted(groups.items(), key=lambda kv: _sort_key(kv[0])):
        errs = np.array([r.error for r in grp if not r.failed], dtype=float)
        failed_iters = len({r.iteration for r in grp if r.failed})
        if failed_iters:
            log.info("%s %s n=%d eps=%g %s: %d failed iterations excluded", mech, dgp, n, eps, label, failed_iters)
        out.append({
            "mechanism": mech, "dgp": dgp, "n": n, "epsilon": eps, "eval_point": label,
            "count": int(errs.size), "failed_iterations": failed_iters,
            "mse": float(np.mean(errs**2)) if errs.size else float("nan"),
            "mae": float(np.median(np.abs(errs))) if errs.size else float("nan"),
        })
    return out


def _sort_key(key):
    mech, dgp, n, eps, label = key
    order = {"q25": 0, "q75": 1, "all": 2}
    return (MECHANISMS.index(mech), DGP_FAMILIES.index(dgp), n, eps, order[label])


def failure_counts(rows):
    """Failed iterations per (mechanism, DGP, n, epsilon)."""
    counts = {}
    for r in rows:
        key = (r.mechanism, r.dgp, r.n, r.epsilon)
        counts.setdefault(key, set())
        if r.failed:
            counts[key].add(r.iteration)
    return [
        {"mechanism": k[0], "dgp": k[1], "n": k[2], "epsilon": k[3], "failed_iterations": len(v)}
        for k, v in sorted(counts.items(), key=lambda kv: _sort_key(kv[0] + ("all",)))
    ]


def probe_min_diameter(config):
    """Largest minimum-binding diameter over iterations and DGPs, per (n, epsilon).

    Datasets are the ones :func:`run_experiment` would draw for the same
    config, so the probe describes the simulated samples.
    """
    out = []
    for n in config.n_grid:
        for eps in config.epsilon_grid:
            budget = PrivacyBudget(eps, config.delta)
            best = 0.0
            for fam in config.dgp_family:
                for it in range(config.iterations):
                    data = generate_dgp(fam, n, cell_source(config, fam, n, eps, it).child(0))
                    d = min_feasible_diameter(data.rows, budget, "deepest-reg", config.theta_region)
                    best = max(best, d)
            out.append({"n": int(n), "epsilon": float(eps), "min_diameter": best})
    return out


# ------------------------------------------------------------------ reporting


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(rec[c]) for c in columns])


def _row_dict(r):
    return asdict(r)


def report(rows, out_dir, fmt="csv", diameters=None):
    """Write raw rows plus aggregate and failure tables; returns the paths written."""
    if not rows:
        raise ValueError("no result rows to report")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    tables = {
        "results": (RESULT_COLUMNS, [_row_dict(r) for r in rows]),
        "aggregate": (("mechanism", "dgp", "n", "epsilon", "eval_point", "count",
                       "failed_iterations", "mse", "mae"), aggregate(rows)),
        "failures": (("mechanism", "dgp", "n", "epsilon", "failed_iterations"), failure_counts(rows)),
    }
    if diameters:
        tables["diameters"] = (("n", "epsilon", "min_diameter"), diameters)
    paths = []
    for name, (cols, recs) in tables.items():
        path = os.path.join(out_dir, f"{name}.{fmt}")
        if fmt == "csv":
            _write_csv(path, cols, recs)
        else:
            with open(path, "w") as fh:
                json.dump([{c: rec[c] for c in cols} for rec in recs], fh, indent=1)
                fh.write("\n")
        paths.append(path)
    return paths


def write_diameters(table, path):
    _write_csv(path, ("n", "epsilon", "min_diameter"), table)


def read_results(path):
    """Parse a results CSV back into rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            ResultRow(
                rec["mechanism"], rec["dgp"], int(rec["n"]), float(rec["epsilon"]),
                int(rec["iteration"]), rec["eval_point"],
                None if rec["error"] == "" else float(rec["error"]),
                rec["failed"] == "true", float(rec["noise_scale"]), int(rec["runtime_ms"]),
            )
            for rec in reader
        ]
