"""Infinite-server queues fed by simulated arrival paths.

The queue length is an exact indicator sum: initial customers still in
service plus arrivals whose departure lies beyond the probe time.  Steady
state is sampled by spaced reads within long replications after a burn-in.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .kernels import HawkesConfig
from .service import ServiceModel
from .simulate import (INITIAL_STREAM, SERVICE_STREAM, PointPath, SimConfig,
                       rep_stream, simulate_cluster, simulate_thinning)


@dataclass
class QueueTrajectory:
    """Queue-length samples per class at the probe times."""

    times: np.ndarray
    q: np.ndarray              # (nt, k) integer counts
    arrivals_seen: np.ndarray  # (nt, k) cumulative arrivals
    replication: int = 0

    def __post_init__(self):
        if np.any(self.q < 0):
            raise ConfigurationError("queue lengths must be nonnegative")


def _normalize_services(service, k) -> list[ServiceModel]:
    if isinstance(service, ServiceModel):
        return [service] * k
    service = list(service)
    if len(service) != k:
        raise ConfigurationError(f"need one service model per class (k = {k})")
    return service


def simulate_queue(arrivals: PointPath, service, q_init, t_grid,
                   rng: np.random.Generator, initial_service=None) -> QueueTrajectory:
    """Evaluate Q(t) exactly at each grid time from one arrival path.

    q_init holds the initial customer counts per class; their remaining
    service comes from initial_service (defaults to the arrival service
    distribution).  The rng drives only service sampling, independent of
    the arrival path.
    """
    k = arrivals.dimension
    services = _normalize_services(service, k)
    init_services = services if initial_service is None \
        else _normalize_services(initial_service, k)
    q_init = np.atleast_1d(np.asarray(q_init, dtype=int))
    if q_init.shape != (k,) or np.any(q_init < 0):
        raise ConfigurationError("q_init must be one nonnegative count per class")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(t_grid > arrivals.horizon + 1e-12):
        raise ConfigurationError("probe times outside the arrival window")

    q = np.empty((t_grid.size, k), dtype=int)
    seen = np.empty((t_grid.size, k), dtype=int)
    for d in range(k):
        remaining = np.sort(init_services[d].sample(rng, int(q_init[d])))
        taus = arrivals.times[d]
        departures = np.sort(taus + services[d].sample(rng, taus.size))
        n_arrived = np.searchsorted(taus, t_grid, side="right")
        gone = np.searchsorted(departures, t_grid, side="right")
        init_left = q_init[d] - np.searchsorted(remaining, t_grid, side="right")
        q[:, d] = init_left + n_arrived - gone
        seen[:, d] = n_arrived
    return QueueTrajectory(t_grid, q, seen, arrivals.replication)


@dataclass
class SteadyStateSample:
    """Pooled steady-state queue-length draws with replication structure."""

    samples: np.ndarray        # (reps, per_rep, k)
    seed: int
    burn_in: float
    spacing: float
    config: HawkesConfig

    @property
    def k(self) -> int:
        return self.samples.shape[2]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0] * self.samples.shape[1]

    def pooled(self, dim: int = 0) -> np.ndarray:
        return self.samples[:, :, dim].ravel()

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=(0, 1))

    def var(self) -> np.ndarray:
        flat = self.samples.reshape(-1, self.k)
        return flat.var(axis=0, ddof=1)

    def cov(self) -> np.ndarray:
        flat = self.samples.reshape(-1, self.k).astype(float)
        return np.cov(flat.T).reshape(self.k, self.k)

    def se_mean(self) -> np.ndarray:
        # Replications are independent; spaced samples within one are not.
        rep_means = self.samples.mean(axis=1)
        return rep_means.std(axis=0, ddof=1) / math.sqrt(self.samples.shape[0])

    def _jackknife(self, stat):
        reps = self.samples.shape[0]
        full = np.arange(reps)
        values = np.array([stat(self.samples[full != r]) for r in range(reps)])
        return np.sqrt((reps - 1) / reps * ((values - values.mean(axis=0)) ** 2).sum(axis=0))

    def se_var(self) -> np.ndarray:
        return self._jackknife(lambda s: s.reshape(-1, self.k).var(axis=0, ddof=1))

    def se_cov(self) -> np.ndarray:
        return self._jackknife(
            lambda s: np.cov(s.reshape(-1, self.k).astype(float).T).reshape(self.k, self.k))

    def pmf(self, dim: int = 0):
        """(support, relative frequencies) for one class."""
        pooled = self.pooled(dim)
        support = np.arange(int(pooled.min()), int(pooled.max()) + 1)
        freq = np.bincount(pooled - support[0], minlength=support.size) / pooled.size
        return support, freq


def steady_state_sample(config: HawkesConfig, service, n_samples: int, seed: int,
                        *, engine: str = "cluster", burn_in: float | None = None,
                        spacing: float | None = None, samples_per_rep: int | None = None,
                        arrival_burn_in: float | None = None) -> SteadyStateSample:
    """Draw pooled steady-state queue lengths at well-separated times.

    Sampling starts after a burn-in of ten service means plus ten cluster
    decorrelation scales and proceeds with spacing of five service means
    (both overridable, with a floor enforced).  Initial counts are Poisson
    at the offered load so the transient starts near the fluid state.
    """
    if n_samples < 1:
        raise ConfigurationError("need a positive sample count")
    k = config.dimension
    services = _normalize_services(service, k)
    means = np.array([s.mean() for s in services])
    if np.any(~np.isfinite(means)) or np.any(means <= 0):
        raise ConfigurationError("steady-state sampling needs finite positive service means")
    if config.is_multivariate:
        corr_scale = config.kernel.decay_scale() / (1.0 - config.kernel.spectral_radius())
    else:
        corr_scale = config.kernel.decay_scale() / (1.0 - config.kernel.l1_norm())
    min_burn = 10.0 * means.max() + 10.0 * corr_scale
    if burn_in is None:
        burn_in = min_burn
    elif burn_in < min_burn:
        raise ConfigurationError(
            f"burn-in {burn_in:g} below the decorrelation floor {min_burn:g}")
    min_spacing = 5.0 * means.max()
    if spacing is None:
        spacing = min_spacing
    elif spacing < min_spacing:
        raise ConfigurationError(f"spacing {spacing:g} below the floor {min_spacing:g}")
    if samples_per_rep is None:
        reps = int(min(400, max(25, math.ceil(n_samples / 200))))
        samples_per_rep = math.ceil(n_samples / reps)
    reps = math.ceil(n_samples / samples_per_rep)

    horizon = burn_in + spacing * (samples_per_rep - 1) + 1e-9
    t_grid = burn_in + spacing * np.arange(samples_per_rep)
    rates = config.mean_rate_vector()
    offered = rates * means
    if engine not in ("cluster", "thinning"):
        raise ConfigurationError(f"unknown engine {engine!r}")
    engine_fn = {"cluster": simulate_cluster, "thinning": simulate_thinning}[engine]
    sim = SimConfig(config, horizon, seed, burn_in=arrival_burn_in, engine=engine)

    draws = np.empty((reps, samples_per_rep, k), dtype=int)
    for r in range(reps):
        arrivals = engine_fn(sim, r)
        init_rng = rep_stream(seed, r, INITIAL_STREAM)
        q0 = init_rng.poisson(offered)
        svc_rng = rep_stream(seed, r, SERVICE_STREAM)
        traj = simulate_queue(arrivals, services, q0, t_grid, svc_rng)
        draws[r] = traj.q
    return SteadyStateSample(draws, seed, burn_in, spacing, config)


@dataclass
class ComparisonReport:
    """Distance summaries between an empirical pmf and a Gaussian pmf."""

    tv_distance: float
    max_abs_gap: float
    mean_gap: float
    var_gap: float
    support: np.ndarray
    empirical: np.ndarray
    gaussian: np.ndarray
    n_samples: int

    def to_dict(self):
        return {"tv_distance": self.tv_distance, "max_abs_gap": self.max_abs_gap,
                "mean_gap": self.mean_gap, "var_gap": self.var_gap,
                "n_samples": self.n_samples}

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("q,empirical_pmf,gaussian_pmf\n")
            for q, e, g in zip(self.support, self.empirical, self.gaussian):
                fh.write(f"{q},{e:.17g},{g:.17g}\n")


def compare_distributions(samples, approx) -> ComparisonReport:
    """Total-variation and moment gaps between pooled integer samples and a
    Gaussian pmf evaluator (anything exposing .mean, .sigma, .pmf)."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ConfigurationError("empty sample set")
    lo = min(int(samples.min()), int(math.floor(approx.mean - 10.0 * approx.sigma)))
    hi = max(int(samples.max()), int(math.ceil(approx.mean + 10.0 * approx.sigma)))
    lo = max(lo, 0)
    support = np.arange(lo, hi + 1)
    emp = np.bincount(samples.astype(int) - lo, minlength=support.size) / samples.size
    gauss = approx.pmf(support)
    tv = 0.5 * float(np.abs(emp - gauss).sum())
    return ComparisonReport(
        tv_distance=tv,
        max_abs_gap=float(np.abs(emp - gauss).max()),
        mean_gap=float(samples.mean() - approx.mean),
        var_gap=float(samples.var(ddof=1) - approx.sigma**2),
        support=support, empirical=emp, gaussian=gauss, n_samples=samples.size)


def summary_json(sample: SteadyStateSample, report: ComparisonReport | None, path):
    payload = {"mean": sample.mean().tolist(), "var": sample.var().tolist(),
               "se_mean": sample.se_mean().tolist(), "se_var": sample.se_var().tolist(),
               "n_samples": sample.n_samples, "seed": sample.seed,
               "burn_in": sample.burn_in, "spacing": sample.spacing}
    if report is not None:
        payload.update(report.to_dict())
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
