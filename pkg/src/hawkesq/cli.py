"""Configuration-driven command-line front end.

Four subcommands wire the library into reproducible experiments:

  simulate        sample paths + empirical moment summary
  analyze         covariance density / variance / limit covariance dumps
  validate-fclt   empirical scaled-count variance against the analytic K(t)
  validate-queue  steady-state queue histogram against the Gaussian pmf

Every run writes a manifest (resolved config, seed, version) into its
output directory; rerunning with --config <manifest.json> reproduces the
result files bitwise.  Exit codes: 0 pass, 1 statistical-check failure,
2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .covariance import (asymptotic_offset, asymptotic_slope, laplace_pipeline,
                         solve_multivariate_phi, solve_phi_grid,
                         variance_function, write_covariance_csv)
from .errors import ConfigurationError, HawkesqError, NumericalError
from .kernels import HawkesConfig, KernelMatrix, SumOfExponentialsKernel, kernel_from_dict
from .limits import gaussian_queue_approx
from .queueing import compare_distributions, steady_state_sample, summary_json
from .service import service_from_dict
from .simulate import (SimConfig, empirical_moments, simulate_paths,
                       var_of_sample_cov, write_paths_csv)

_SCHEMA = 1


def _version_string() -> str:
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        described = ""
    return f"hawkesq {__version__}" + (f" ({described})" if described else "")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "command" in data:
        data = data["config"]        # a manifest doubles as a config
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    if data.get("schema", _SCHEMA) != _SCHEMA:
        raise ConfigurationError(f"unsupported schema version {data.get('schema')}")
    return data


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigurationError(f"config is missing required field {key!r}")
    return cfg[key]


def _hawkes_config(cfg: dict) -> HawkesConfig:
    kernel = kernel_from_dict(_require(cfg, "kernel"))
    return HawkesConfig(float(_require(cfg, "mu")), kernel)


def _out_dir(base: str, command: str, cfg: dict) -> Path:
    name = cfg.get("name") or time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    path = Path(base) / command / str(name)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, command: str, cfg: dict, args) -> None:
    manifest = {"command": command, "config": cfg, "seed": cfg["seed"],
                "version": _version_string(),
                "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "argv": sys.argv[1:]}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_common(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    cfg["schema"] = _SCHEMA
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 20240)
    if args.reps is not None:
        cfg["reps"] = args.reps
    cfg.setdefault("threads", args.threads)
    return cfg


def cmd_simulate(cfg: dict, out: Path) -> int:
    config = _hawkes_config(cfg)
    sim = SimConfig(config, float(_require(cfg, "horizon")), int(cfg["seed"]),
                    burn_in=cfg.get("burn_in"), engine=cfg.get("engine", "cluster"),
                    replications=int(cfg.get("reps", 100)))
    cfg["burn_in"] = sim.burn_in
    paths = simulate_paths(sim, threads=int(cfg.get("threads", 1)))
    probe = cfg.get("probe_times") or [sim.horizon / 2.0, sim.horizon]
    moments = empirical_moments(paths, probe)
    write_paths_csv(paths, out / "paths.csv")
    moments.write_json(out / "moments.json")
    return 0


def cmd_analyze(cfg: dict, out: Path) -> int:
    kernel = kernel_from_dict(_require(cfg, "kernel"))
    grid = cfg.get("grid", {})
    dt = float(grid.get("dt", 0.01))
    t_max = grid.get("t_max")
    if isinstance(kernel, KernelMatrix):
        phi = solve_multivariate_phi(kernel, dt=float(grid.get("dt", 0.02)), t_max=t_max)
    else:
        phi = solve_phi_grid(kernel, dt=dt, t_max=t_max)
    K = variance_function(phi)
    phi.write_csv(out / "phi.csv")
    K.write_csv(out / "K.csv")
    probe = cfg.get("probe_times", [1.0, 2.0, 5.0])
    if not phi.is_matrix:
        write_covariance_csv(phi, K, probe, out / "covG.csv")
        asym = {"slope": asymptotic_slope(kernel)}
        try:
            asym["offset"] = asymptotic_offset(kernel)
        except HawkesqError as exc:
            asym["offset_error"] = str(exc)
        with open(out / "asymptotics.json", "w") as fh:
            json.dump(asym, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if isinstance(kernel, SumOfExponentialsKernel):
            laplace_pipeline(kernel).write_json(out / "laplace.json")
    return 0


def cmd_validate_fclt(cfg: dict, out: Path) -> int:
    config = _hawkes_config(cfg)
    mu = config.baseline
    reps = int(cfg.get("reps", 2000))
    probe = [float(x) for x in cfg.get("probe_times", [1.0, 2.0, 5.0])]
    sim = SimConfig(config, max(probe), int(cfg["seed"]),
                    burn_in=cfg.get("burn_in"), engine=cfg.get("engine", "cluster"),
                    replications=reps)
    paths = simulate_paths(sim, threads=int(cfg.get("threads", 1)))
    counts = np.stack([p.counts_at(probe) for p in paths]).astype(float)  # (R, nt, k)
    rates = config.mean_rate_vector()
    scaled = (counts - np.asarray(probe)[None, :, None] * rates[None, None, :]) / np.sqrt(mu)

    grid_cfg = cfg.get("grid", {})
    if config.is_multivariate:
        phi = solve_multivariate_phi(config.kernel, dt=float(grid_cfg.get("dt", 0.05)),
                                     t_max=grid_cfg.get("t_max"))
    else:
        phi = solve_phi_grid(config.kernel, dt=float(grid_cfg.get("dt", 0.01)),
                             t_max=grid_cfg.get("t_max"))
    K = variance_function(phi)

    moments = empirical_moments(paths, probe)
    checks = []
    for a, t in enumerate(probe):
        Kt = K.at(t)
        for d in range(config.dimension):
            target = float(Kt[d, d]) if config.is_multivariate else float(Kt)
            emp = float(scaled[:, a, d].var(ddof=1))
            se = float(moments.se_var[a, d]) / mu
            z = (emp - target) / se if se > 0 else 0.0
            checks.append({"t": t, "dim": d, "empirical": emp, "analytic": target,
                           "z": z})
        if config.dimension > 1:
            for i in range(config.dimension):
                for j in range(i + 1, config.dimension):
                    c = float(np.cov(scaled[:, a, i], scaled[:, a, j])[0, 1])
                    target = float(Kt[i, j])
                    se = float(np.sqrt(var_of_sample_cov(scaled[:, a, i], scaled[:, a, j])))
                    checks.append({"t": t, "dims": [i, j], "empirical": c,
                                   "analytic": target, "z": (c - target) / se})
    worst = max(abs(c["z"]) for c in checks)
    report = {"mu": mu, "reps": reps, "checks": checks, "max_abs_z": worst,
              "pass": bool(worst < 3.0)}
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if report["pass"] else 1


def cmd_validate_queue(cfg: dict, out: Path) -> int:
    config = _hawkes_config(cfg)
    if config.is_multivariate:
        raise ConfigurationError("validate-queue is univariate; see the library API for k > 1")
    service = service_from_dict(cfg.get("service", {"type": "exponential", "rate": 1.0}))
    n_samples = int(cfg.get("n_samples", 10_000))
    sample = steady_state_sample(config, service, n_samples, int(cfg["seed"]),
                                 engine=cfg.get("engine", "cluster"),
                                 burn_in=cfg.get("queue_burn_in"),
                                 spacing=cfg.get("spacing"))
    approx = gaussian_queue_approx(config.baseline, config.kernel)
    report = compare_distributions(sample.pooled(0), approx)
    report.write_csv(out / "histogram.csv")
    summary_json(sample, report, out / "comparison.json")

    mean_z = abs(report.mean_gap) / float(sample.se_mean()[0])
    var_rel = abs(report.var_gap) / approx.sigma**2
    tv_cap = float(cfg.get("tv_threshold", 0.05))
    ok = mean_z < 3.0 and var_rel < float(cfg.get("var_rel_threshold", 0.05)) \
        and report.tv_distance < tv_cap
    with open(out / "verdict.json", "w") as fh:
        json.dump({"mean_z": mean_z, "var_rel_gap": var_rel,
                   "tv_distance": report.tv_distance, "pass": bool(ok)}, fh, indent=2)
        fh.write("\n")
    return 0 if ok else 1


_COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze,
             "validate-fclt": cmd_validate_fclt, "validate-queue": cmd_validate_queue}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hawkesq",
                                     description="self-exciting traffic and queue analytics")
    parser.add_argument("--version", action="version", version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (or a manifest)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory root")
        p.add_argument("--reps", type=int, default=None, help="override replication count")
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_common(_load_config(args.config), args)
        out = _out_dir(args.out, args.command, cfg)
        code = _COMMANDS[args.command](cfg, out)
        _write_manifest(out, args.command, cfg, args)
        return code
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
