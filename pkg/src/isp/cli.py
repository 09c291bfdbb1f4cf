"""The ``isp`` command.

Usage::

    isp run <config> [--override section.key=value ...] [--output-dir DIR]
    isp convergence <config> [...]
    isp polyfit <config> [...]

Configs are INI files (see ``configs/exp1.cfg``). Recognised sections and
keys, with defaults::

    [experiment]  id (required, 1..4), mode = inverse
                  (direct | inverse | convergence | polyfit-analysis),
                  n_time_steps = 200
    [mesh]        n_elems = 200 (1D) or nx = ny = 40 (2D)
    [noise]       epsilons = 0.001, 0.005, 0.01, 0.03, 0.05
                  seeds = paper (seed = id - 1) or a comma list
                  n_samples = 100
    [regularization]  degree = auto | integer, parity = case default
                  (any | even | odd), improvement_threshold_percent = 5,
                  max_degree = 10
    [convergence] taus = 1/25, 1/50, 1/100, 1/200
    [solver]      cg_rel_tol = 1e-12, omega_min = 1e-8, workers = 1
    [output]      dir = output

Overrides use ``section.key=value`` and win over the file. Exit status: 0 on
success, 2 for an unreadable config, 3 for an invalid one, 4 for a numerical
failure.
"""

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fem
from .errors import (
    CoefficientBoundError,
    ConfigError,
    ConvergenceError,
    DegenerateProfileError,
    FitError,
    ISPError,
)
from .experiments import EPSILONS, build_case, compute_errors, convergence_study, run_noisy
from .regularization import degree_table, format_float, generate_noisy, select_degree
from .rothe import direct_solve

log = logging.getLogger("isp")

MODES = ("direct", "inverse", "convergence", "polyfit-analysis")
PARITIES = ("any", "even", "odd")

_SCHEMA = {
    "experiment": {"id", "mode", "n_time_steps"},
    "mesh": {"n_elems", "nx", "ny"},
    "noise": {"epsilons", "seeds", "n_samples"},
    "regularization": {"degree", "parity", "improvement_threshold_percent", "max_degree"},
    "convergence": {"taus"},
    "solver": {"cg_rel_tol", "omega_min", "workers"},
    "output": {"dir"},
}

EXIT_PARSE, EXIT_INVALID, EXIT_NUMERICAL = 2, 3, 4


class ValidationError(ConfigError):
    pass


@dataclass
class RunConfig:
    experiment_id: int
    mode: str = "inverse"
    n_time_steps: int = 200
    mesh: dict = field(default_factory=dict)
    epsilons: list = field(default_factory=lambda: list(EPSILONS))
    seeds: object = "paper"
    n_samples: int = 100
    degree: object = "auto"
    parity: str = None
    improvement_threshold_percent: float = 5.0
    max_degree: int = 10
    taus: list = field(default_factory=lambda: [1 / 25, 1 / 50, 1 / 100, 1 / 200])
    cg_rel_tol: float = 1e-12
    omega_min: float = 1e-8
    workers: int = 1
    output_dir: str = "output"

    def seed_list(self):
        return [self.experiment_id - 1] if self.seeds == "paper" else list(self.seeds)

    def validate(self):
        if self.experiment_id not in (1, 2, 3, 4):
            raise ValidationError(f"experiment.id must be 1..4, got {self.experiment_id}")
        if self.mode not in MODES:
            raise ValidationError(f"experiment.mode must be one of {MODES}, got {self.mode!r}")
        if self.n_time_steps < 1:
            raise ValidationError("experiment.n_time_steps must be >= 1")
        dim = 1 if self.experiment_id in (1, 2) else 2
        if dim == 1 and set(self.mesh) - {"n_elems"}:
            raise ValidationError("1D experiments take mesh.n_elems only")
        if dim == 2 and set(self.mesh) - {"nx", "ny"}:
            raise ValidationError("2D experiments take mesh.nx and mesh.ny only")
        if any(v < 1 for v in self.mesh.values()):
            raise ValidationError("mesh sizes must be >= 1")
        if any(not (e >= 0) for e in self.epsilons):
            raise ValidationError(f"noise levels must be non-negative: {self.epsilons}")
        if self.seeds != "paper" and (not self.seeds or any(s < 0 for s in self.seeds)):
            raise ValidationError("noise.seeds must be 'paper' or non-negative integers")
        if self.n_samples < 1:
            raise ValidationError("noise.n_samples must be >= 1")
        if self.degree != "auto" and not (0 <= self.degree < self.n_samples):
            raise ValidationError(f"regularization.degree out of range: {self.degree}")
        if self.parity is not None and self.parity not in PARITIES:
            raise ValidationError(f"regularization.parity must be one of {PARITIES}")
        if not self.improvement_threshold_percent > 0:
            raise ValidationError("improvement_threshold_percent must be positive")
        if not 0 <= self.max_degree < self.n_samples:
            raise ValidationError("regularization.max_degree out of range")
        if len(self.taus) < 2 or any(b >= a for a, b in zip(self.taus, self.taus[1:])):
            raise ValidationError("convergence.taus must be strictly decreasing (>= 2 values)")
        for tau in self.taus:
            n = round(1.0 / tau)
            if n < 1 or abs(n * tau - 1.0) > 1e-12:
                raise ValidationError(f"tau={tau} does not divide T=1")
        if not 0 < self.cg_rel_tol < 1:
            raise ValidationError("solver.cg_rel_tol must lie in (0, 1)")
        if not self.omega_min > 0:
            raise ValidationError("solver.omega_min must be positive")
        if self.workers < 1:
            raise ValidationError("solver.workers must be >= 1")
        return self


def _floats(text):
    return [float(Fraction(v.strip())) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v.strip()) for v in text.split(",") if v.strip()]


_PARSERS = {
    ("experiment", "id"): int,
    ("experiment", "mode"): str.strip,
    ("experiment", "n_time_steps"): int,
    ("mesh", "n_elems"): int,
    ("mesh", "nx"): int,
    ("mesh", "ny"): int,
    ("noise", "epsilons"): _floats,
    ("noise", "seeds"): lambda v: "paper" if v.strip() == "paper" else _ints(v),
    ("noise", "n_samples"): int,
    ("regularization", "degree"): lambda v: "auto" if v.strip() == "auto" else int(v),
    ("regularization", "parity"): str.strip,
    ("regularization", "improvement_threshold_percent"): float,
    ("regularization", "max_degree"): int,
    ("convergence", "taus"): _floats,
    ("solver", "cg_rel_tol"): float,
    ("solver", "omega_min"): float,
    ("solver", "workers"): int,
    ("output", "dir"): str.strip,
}

_FIELDS = {
    ("experiment", "id"): "experiment_id",
    ("experiment", "mode"): "mode",
    ("experiment", "n_time_steps"): "n_time_steps",
    ("noise", "epsilons"): "epsilons",
    ("noise", "seeds"): "seeds",
    ("noise", "n_samples"): "n_samples",
    ("regularization", "degree"): "degree",
    ("regularization", "parity"): "parity",
    ("regularization", "improvement_threshold_percent"): "improvement_threshold_percent",
    ("regularization", "max_degree"): "max_degree",
    ("convergence", "taus"): "taus",
    ("solver", "cg_rel_tol"): "cg_rel_tol",
    ("solver", "omega_min"): "omega_min",
    ("solver", "workers"): "workers",
    ("output", "dir"): "output_dir",
}


def load_config(path, overrides=(), mode=None, output_dir=None):
    """Read ``path``, apply ``section.key=value`` overrides and validate.

    Raises :class:`ConfigError` (unreadable) or :class:`ValidationError`.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = {(s, k): v for s in cp.sections() for k, v in cp.items(s)}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        raw[(section, name)] = value
    unknown = sorted(f"{s}.{k}" for s, k in raw if k not in _SCHEMA.get(s, ()))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    if ("experiment", "id") not in raw:
        raise ValidationError("experiment.id is required")
    values = {}
    mesh = {}
    for key, text in raw.items():
        try:
            val = _PARSERS[key](text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad value for {key[0]}.{key[1]}: {text!r}") from exc
        if key[0] == "mesh":
            mesh[key[1]] = val
        else:
            values[_FIELDS[key]] = val
    cfg = RunConfig(mesh=mesh, **values)
    if mode is not None:
        cfg.mode = mode
    if output_dir is not None:
        cfg.output_dir = output_dir
    return cfg.validate()


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _mesh_for(cfg, case):
    if case.dim == 1:
        return case.build_mesh((cfg.mesh.get("n_elems", 200),))
    return case.build_mesh((cfg.mesh.get("nx", 40), cfg.mesh.get("ny", 40)))


def _node_columns(mesh):
    return ["x"] if mesh.dim == 1 else ["x", "y"]


def _run_inverse(cfg, case, mesh, out, summary):
    parity = cfg.parity or case.parity
    jobs = [(eps, seed) for eps in cfg.epsilons for seed in
            ([0] if eps == 0 else cfg.seed_list())]

    def job(args):
        eps, seed = args
        return run_noisy(
            case, eps, seed=seed, degree=cfg.degree, parity=parity, mesh=mesh,
            n=cfg.n_time_steps, n_samples=cfg.n_samples,
            threshold_percent=cfg.improvement_threshold_percent,
            max_degree=cfg.max_degree, cg_rel_tol=cfg.cg_rel_tol, omega_min=cfg.omega_min,
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(job, jobs))
    else:
        runs = [job(j) for j in jobs]

    src_rows, sol_rows, fit_rows, per_run = [], [], [], []
    show_eps = max(cfg.epsilons) if 0.05 not in cfg.epsilons else 0.05
    for r in runs:
        h_exact = [case.exact_h(t) for t in r.result.t]
        for t, he, hn in zip(r.result.t, h_exact, r.result.h):
            src_rows.append([r.epsilon, str(r.seed), t, he, hn, abs(he - hn)])
        if mesh.dim == 1 or r.epsilon == show_eps:
            ue = fem.interpolate(mesh, case.exact_u, case.spec.T)
            for k, node in enumerate(mesh.nodes):
                sol_rows.append([r.epsilon, str(r.seed), *node, ue[k], r.result.u_final[k],
                                 abs(ue[k] - r.result.u_final[k])])
        if r.fit is not None:
            p, dp = r.fit(r.series.t), r.fit.derivative(r.series.t)
            for j, t in enumerate(r.series.t):
                fit_rows.append([r.epsilon, str(r.seed), str(r.degree), t, r.series.exact[j],
                                 r.series.values[j], p[j], dp[j]])
        bound = 1e-8 * (1 + np.abs(r.result.m_prime).max())
        per_run.append({
            "epsilon": r.epsilon, "seed": r.seed, "degree": r.degree,
            "E_max_u": r.errors.E_max_u, "E_max_h": r.errors.E_max_h,
            "max_measurement_residual": float(r.result.measurement_residuals.max()),
            "measurement_residual_bound": bound,
        })
    _write_csv(out / "source.csv", ["epsilon", "seed", "t", "h_exact", "h_num", "abs_err"],
               src_rows)
    _write_csv(out / "final_solution.csv",
               ["epsilon", "seed", *_node_columns(mesh), "u_exact", "u_num", "abs_err"],
               sol_rows)
    files = ["source.csv", "final_solution.csv"]
    if fit_rows:
        _write_csv(out / "polyfit.csv",
                   ["epsilon", "seed", "degree", "t", "m_exact", "m_noisy", "p_fit",
                    "p_fit_derivative"], fit_rows)
        files.append("polyfit.csv")
    summary["runs"] = per_run
    summary["selected_degrees"] = {f"{r['epsilon']}/{r['seed']}": r["degree"] for r in per_run}
    summary["max_measurement_residual"] = max(r["max_measurement_residual"] for r in per_run)
    summary["E_max_u"] = max(r["E_max_u"] for r in per_run)
    summary["E_max_h"] = max(r["E_max_h"] for r in per_run)
    return files


def _run_direct(cfg, case, mesh, out, summary):
    spec = case.spec
    grid = case.grid(cfg.n_time_steps)

    def source(t, x):
        return spec.f(t, x) + np.asarray(spec.p(t, x)) * spec.exact_h(t)

    traj = direct_solve(spec, mesh, grid, source, cg_rel_tol=cfg.cg_rel_tol)
    rep = compute_errors(case, traj, grid, mesh)
    ue = fem.interpolate(mesh, case.exact_u, spec.T)
    rows = [[*node, ue[k], traj[-1, k], abs(ue[k] - traj[-1, k])]
            for k, node in enumerate(mesh.nodes)]
    _write_csv(out / "final_solution.csv", [*_node_columns(mesh), "u_exact", "u_num", "abs_err"],
               rows)
    summary["E_max_u"] = rep.E_max_u
    return ["final_solution.csv"]


def _run_convergence(cfg, case, mesh, out, summary):
    rows = convergence_study(case, cfg.taus, mesh, cg_rel_tol=cfg.cg_rel_tol)
    nan = float("nan")
    _write_csv(out / "convergence.csv", ["tau", "E_max_u", "E_max_h", "EOC_u", "EOC_h"],
               [[r.tau, r.E_max_u, r.E_max_h,
                 nan if r.eoc_u is None else r.eoc_u,
                 nan if r.eoc_h is None else r.eoc_h] for r in rows])
    summary["convergence"] = [asdict(r) for r in rows]
    summary["E_max_u"] = max(r.E_max_u for r in rows)
    summary["E_max_h"] = max(r.E_max_h for r in rows)
    return ["convergence.csv"]


def _run_polyfit(cfg, case, mesh, out, summary):
    parity = cfg.parity or case.parity
    step = 1 if parity == "any" else 2
    first = 1 if parity == "odd" else 0
    degrees = list(range(first, cfg.max_degree + 1, step))
    rows, selected = [], {}
    for eps in cfg.epsilons:
        for seed in cfg.seed_list():
            series = generate_noisy(case.m, case.spec.T, cfg.n_samples, eps, seed)
            for d, e, rim in degree_table(series, degrees, parity):
                rows.append([eps, str(seed), str(d), e, float("nan") if rim is None else rim])
            selected[f"{eps}/{seed}"] = select_degree(
                series, parity, cfg.max_degree, cfg.improvement_threshold_percent)
    _write_csv(out / "polyfit_table.csv", ["epsilon", "seed", "degree", "E", "r_im_percent"],
               rows)
    summary["parity"] = parity
    summary["selected_degrees"] = selected
    return ["polyfit_table.csv"]


_RUNNERS = {
    "direct": _run_direct,
    "inverse": _run_inverse,
    "convergence": _run_convergence,
    "polyfit-analysis": _run_polyfit,
}


def run(cfg):
    """Execute a validated :class:`RunConfig`; returns the manifest dict."""
    start = time.perf_counter()
    case = build_case(cfg.experiment_id)
    mesh = _mesh_for(cfg, case)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    files = _RUNNERS[cfg.mode](cfg, case, mesh, out, summary)
    manifest = {
        "config": asdict(cfg),
        "files": [{"name": f, "sha256": _sha256(out / f)} for f in files],
        "summary": summary,
        "wall_time_seconds": time.perf_counter() - start,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return manifest


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


_ERROR_ORIGIN = {
    CoefficientBoundError: "fem",
    DegenerateProfileError: "rothe",
    FitError: "regularization",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="isp", description="Inverse source reconstruction experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run the mode given in the config"),
        ("convergence", "noise-free time convergence study"),
        ("polyfit", "polynomial degree analysis of the noisy measurement"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--override", "-o", action="append", default=[],
                       metavar="SECTION.KEY=VALUE")
        p.add_argument("--output-dir")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    mode = {"convergence": "convergence", "polyfit": "polyfit-analysis"}.get(args.command)
    try:
        cfg = load_config(args.config, args.override, mode=mode, output_dir=args.output_dir)
    except ValidationError as exc:
        print(f"isp: cli: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"isp: cli: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        manifest = run(cfg)
    except ConvergenceError as exc:
        print(f"isp: fem: step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ISPError as exc:
        module = _ERROR_ORIGIN.get(type(exc), "isp")
        print(f"isp: {module}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("wrote %s", ", ".join(f["name"] for f in manifest["files"]))
    print(os.path.join(cfg.output_dir, "manifest.json"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
