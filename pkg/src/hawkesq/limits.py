"""Gaussian limit objects for the heavy-baseline regime.

Covariance evaluators for the count limit G, the general-service queue
limit X, the exponential-service OU-type limit X_e, their multivariate
analogues, steady-state summaries, the Gaussian queue pmf, and exact
finite-dimensional sampling of any of these from its covariance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .covariance import (CovarianceDensity, VarianceFunction,
                         laplace_pipeline, limit_covariance_G,
                         limit_covariance_multi, variance_function)
from .errors import ConfigurationError, NumericalError, TruncationError
from .kernels import Kernel, SumOfExponentialsKernel
from .service import ServiceModel
from .simulate import rep_stream

_WEIGHT_FLOOR = 1e-12     # exponential-weight truncation for infinite integrals
_PSD_JITTERS = (0.0, 1e-10, 1e-9, 1e-8)


def _grid(lo: float, hi: float, dt: float):
    n = max(int(round((hi - lo) / dt)), 1)
    return np.linspace(lo, hi, n + 1)


def _tw(x: np.ndarray) -> np.ndarray:
    w = np.full(x.size, x[1] - x[0]) if x.size > 1 else np.zeros(1)
    if x.size > 1:
        w[0] = w[-1] = 0.5 * (x[1] - x[0])
    return w


def _phi_abs(phi: CovarianceDensity, args: np.ndarray) -> np.ndarray:
    return np.interp(np.abs(args), phi.t, phi.values, right=0.0)


def _require_scalar(phi: CovarianceDensity):
    if phi.is_matrix:
        raise ConfigurationError("this operation needs a scalar covariance density")


def cov_X_general(F0: ServiceModel, F: ServiceModel, q0: float,
                  phi: CovarianceDensity, s: float, t: float) -> float:
    """Covariance of the general-service queue limit X at (s, t).

    For s <= t:  q0 F0(s)(1 - F0(t)) + (1-||h||)^{-1} int_0^s (1-F(t-u)) du
                 + int_0^s int_0^t (1-F(t-u)) (1-F(s-v)) phi(v-u) du dv.
    The Brownian-bridge and theta components are the first two summands.
    """
    _require_scalar(phi)
    lo, hi = (s, t) if s <= t else (t, s)
    if lo < 0:
        raise ConfigurationError("times must be nonnegative")
    if hi > phi.t_max:
        raise ConfigurationError(f"t = {hi:g} beyond the phi grid [0, {phi.t_max:g}]")
    term1 = q0 * F0.cdf(lo) * F0.survival(hi)
    if lo == 0.0:
        return float(term1)
    u = _grid(0.0, lo, phi.dt)
    term2 = float(np.trapezoid(F.survival_closed(hi - u), u)) / (1.0 - phi.norm)
    ug = _grid(0.0, hi, phi.dt)     # paired with the later time
    vg = _grid(0.0, lo, phi.dt)
    wu = _tw(ug) * F.survival_closed(hi - ug)
    wv = _tw(vg) * F.survival_closed(lo - vg)
    G = _phi_abs(phi, vg[None, :] - ug[:, None])
    term3 = float(np.einsum("i,j,ij->", wu, wv, G))
    return float(term1 + term2 + term3)


def var_X_infty(F: ServiceModel, phi: CovarianceDensity, method: str = "auto"):
    """Steady-state variance of X: mean-service term plus the survival-weighted
    double integral of the covariance density (infinite-horizon version of
    the queue-limit variance).

    "grid" truncates both axes at the 1e-12 survival cutoff and integrates
    by trapezoid on the phi grid; "closed_form" (when phi carries an exact
    evaluator) uses nested adaptive quadrature of the lag-correlation form.
    """
    _require_scalar(phi)
    mean = F.mean()
    if not math.isfinite(mean):
        raise ConfigurationError("service mean must be finite")
    term1 = mean / (1.0 - phi.norm)
    if method == "auto":
        method = "closed_form" if phi.closed_form is not None else "grid"
    if method == "closed_form":
        if phi.closed_form is None:
            raise ConfigurationError("phi carries no closed form")
        U = F.survival_cutoff()

        def lag_corr(w):
            val, _ = quad(lambda u: F.survival(u) * F.survival(u + w), 0.0, U, limit=200)
            return val

        val, _ = quad(lambda w: phi.closed_form(w) * lag_corr(w), 0.0, phi.t_max,
                      limit=200)
        return term1 + 2.0 * val
    if method != "grid":
        raise ConfigurationError(f"unknown method {method!r}")
    U = F.survival_cutoff()
    u = _grid(0.0, U, phi.dt)
    w = _tw(u) * F.survival_closed(u)
    idx = np.abs(np.subtract.outer(np.arange(u.size), np.arange(u.size)))
    phi_line = np.interp(np.arange(u.size) * (u[1] - u[0]), phi.t, phi.values, right=0.0)
    return float(term1 + w @ phi_line[idx] @ w)


def cov_Xe(phi: CovarianceDensity, s: float, t: float) -> float:
    """Covariance of the unit-rate OU-type limit X_e at (s, t):

        (e^{-(t-s)} - e^{-(t+s)})/(1-||h||)
        + int_0^t int_0^s e^{-(t-u)} e^{-(s-v)} phi(u-v) dv du,   s <= t.
    """
    _require_scalar(phi)
    lo, hi = (s, t) if s <= t else (t, s)
    if lo < 0:
        raise ConfigurationError("times must be nonnegative")
    if hi > phi.t_max:
        raise ConfigurationError(f"t = {hi:g} beyond the phi grid")
    first = (math.exp(-(hi - lo)) - math.exp(-(hi + lo))) / (1.0 - phi.norm)
    if lo == 0.0:
        return 0.0
    ug = _grid(0.0, hi, phi.dt)
    vg = _grid(0.0, lo, phi.dt)
    wu = _tw(ug) * np.exp(-(hi - ug))
    wv = _tw(vg) * np.exp(-(lo - vg))
    G = _phi_abs(phi, ug[:, None] - vg[None, :])
    return float(first + np.einsum("i,j,ij->", wu, wv, G))


def mean_Xe(x0: float, t) -> float:
    """E[X_e(t) | X_e(0) = x0] = x0 exp(-t)."""
    return x0 * np.exp(-np.asarray(t, dtype=float))


def var_xe_infty_exponential(alpha: float, beta: float) -> float:
    """Single-exponential closed form of Var(X_e(inf)):

        alpha*beta*(2 beta - alpha) / (2 (beta-alpha)^2 (1 + beta - alpha))
        + beta / (beta - alpha).
    """
    if not 0 <= alpha < beta:
        raise ConfigurationError("need 0 <= alpha < beta")
    if alpha == 0.0:
        return 1.0
    return (alpha * beta * (2.0 * beta - alpha)
            / (2.0 * (beta - alpha) ** 2 * (1.0 + beta - alpha))
            + beta / (beta - alpha))


def var_xe_infty(kernel: Kernel, phi: CovarianceDensity | None = None,
                 method: str = "auto") -> float:
    """Var(X_e(inf)) = phi~(1) + 1/(1 - ||h||).

    Prefers the exact Laplace pipeline for exponential mixtures (VAR1 for a
    single term); otherwise integrates exp(-t) against a solved phi grid.
    """
    norm = kernel.l1_norm()
    if not norm < 1.0:
        raise ConfigurationError("||h|| >= 1")
    if method == "auto":
        method = "pipeline" if isinstance(kernel, SumOfExponentialsKernel) else "grid"
    if method == "var1":
        if not isinstance(kernel, SumOfExponentialsKernel) or kernel.alphas.size > 1:
            raise ConfigurationError("VAR1 closed form needs a single exponential term")
        if kernel.alphas.size == 0:
            return 1.0
        return var_xe_infty_exponential(float(kernel.alphas[0]), float(kernel.betas[0]))
    if method == "pipeline":
        return laplace_pipeline(kernel).phi_tilde(1.0) + 1.0 / (1.0 - norm)
    if method == "grid":
        if phi is None:
            from .covariance import solve_phi_grid
            phi = solve_phi_grid(kernel)
        return float(phi.laplace(1.0)) + 1.0 / (1.0 - norm)
    raise ConfigurationError(f"unknown method {method!r}")


@dataclass
class GaussianQueueApprox:
    """Normal-density approximation of the steady-state queue-length pmf."""

    mean: float
    sigma: float

    def pmf(self, i):
        i = np.asarray(i, dtype=float)
        z = (i - self.mean) / self.sigma
        out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
        return out if i.ndim else float(out)

    def to_dict(self):
        return {"mean": self.mean, "sigma": self.sigma}


def gaussian_queue_approx(mu: float, kernel: Kernel,
                          phi: CovarianceDensity | None = None) -> GaussianQueueApprox:
    """Pair (lambda_bar, sigma) for the Hawkes/M/infinity steady state:
    mean mu/(1-||h||), variance mu * Var(X_e(inf))."""
    if mu <= 0:
        raise ConfigurationError("mu must be positive")
    lam = mu / (1.0 - kernel.l1_norm())
    sigma = math.sqrt(mu * var_xe_infty(kernel, phi=phi))
    return GaussianQueueApprox(lam, sigma)


def gaussian_queue_pmf(mu: float, kernel: Kernel, i: int) -> float:
    """P(Q = i) under the Gaussian steady-state approximation."""
    if i < 0 or int(i) != i:
        raise ConfigurationError("i must be a nonnegative integer")
    return gaussian_queue_approx(mu, kernel).pmf(float(i))


# --- multivariate OU-type limit -----------------------------------------------

def _phi_ext(phi: CovarianceDensity, i: int, j: int, args: np.ndarray) -> np.ndarray:
    """Phi_ij(x) with the extension Phi_ij(-x) = Phi_ji(x), x on the grid."""
    fwd = np.interp(np.abs(args), phi.t, phi.values[:, i, j], right=0.0)
    bwd = np.interp(np.abs(args), phi.t, phi.values[:, j, i], right=0.0)
    return np.where(args >= 0, fwd, bwd)


def cov_multi_ou(phi: CovarianceDensity, r, i: int, j: int,
                 s: float, t: float) -> float:
    """Cov(X_i(t), X_j(s)) for the k-dimensional OU-type queue limit:

        1_{i=j} (a_i/r_i) (e^{-r_i(t-s)} - e^{-r_i(t+s)})
        + int_0^t int_0^s e^{-r_i(t-u)} e^{-r_j(s-v)} Phi_ij(u-v) dv du,  s <= t,

    with the matrix extension rule for negative lags.
    """
    if not phi.is_matrix:
        raise ConfigurationError("cov_multi_ou needs a matrix-valued density")
    if t < s:
        return cov_multi_ou(phi, r, j, i, t, s)
    if s < 0:
        raise ConfigurationError("times must be nonnegative")
    if t > phi.t_max:
        raise ConfigurationError("t beyond the solved grid")
    r = np.asarray(r, dtype=float)
    first = 0.0
    if i == j:
        first = phi.a[i] / r[i] * (math.exp(-r[i] * (t - s)) - math.exp(-r[i] * (t + s)))
    if s == 0.0:
        return float(first)
    ug = _grid(0.0, t, phi.dt)
    vg = _grid(0.0, s, phi.dt)
    wu = _tw(ug) * np.exp(-r[i] * (t - ug))
    wv = _tw(vg) * np.exp(-r[j] * (s - vg))
    G = _phi_ext(phi, i, j, ug[:, None] - vg[None, :])
    return float(first + np.einsum("i,j,ij->", wu, wv, G))


def steady_state_cov_multi(phi: CovarianceDensity, r, tail_tol: float = 1e-6) -> np.ndarray:
    """Steady-state covariance matrix of the k-dimensional OU-type limit:

        1_{i=j} a_i/r_i + int_0^inf int_0^inf e^{-r_i u} e^{-r_j v} Phi_ij(v-u) du dv,

    truncated where the exponential weights fall below 1e-12, with the
    truncation certificate checked against tail_tol.  The result is
    symmetrized and validated to be PSD.
    """
    if not phi.is_matrix:
        raise ConfigurationError("steady_state_cov_multi needs a matrix-valued density")
    r = np.asarray(r, dtype=float)
    k = phi.k
    if r.shape != (k,) or np.any(r <= 0):
        raise ConfigurationError("need one positive service rate per class")
    cut = -math.log(_WEIGHT_FLOOR)
    phi_sup = float(np.abs(phi.values).max())
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            ug = _grid(0.0, cut / r[i], phi.dt)
            vg = _grid(0.0, cut / r[j], phi.dt)
            wu = _tw(ug) * np.exp(-r[i] * ug)
            wv = _tw(vg) * np.exp(-r[j] * vg)
            G = _phi_ext(phi, i, j, vg[None, :] - ug[:, None])
            out[i, j] = np.einsum("i,j,ij->", wu, wv, G)
            tail = phi_sup * 2.0 * _WEIGHT_FLOOR / (r[i] * r[j])
            if tail > tail_tol:
                raise TruncationError(f"truncation tail bound {tail:.2e} > {tail_tol:g}")
    out = 0.5 * (out + out.T) + np.diag(phi.a / r)
    eigmin = float(np.linalg.eigvalsh(out).min())
    if eigmin < -1e-8 * max(1.0, float(np.abs(np.diag(out)).max())):
        raise NumericalError(f"steady-state covariance not PSD (min eig {eigmin:.2e})")
    return out


# --- assembled limit models and exact Gaussian sampling ------------------------

@dataclass
class LimitModel:
    """Mean and covariance evaluators for one Gaussian limit object.

    kind is one of count, multi_count, queue_general, queue_exponential,
    multi_ou.  cov(s, t) returns a scalar for univariate kinds and a k x k
    matrix (entry (i, j) = Cov(Z_i(t), Z_j(s))) for multivariate ones.
    """

    kind: str
    dim: int
    mean: object
    cov: object
    steady_state_variance: object = None
    samplable: bool = True
    note: str = ""

    def gram(self, t_grid) -> np.ndarray:
        t_grid = np.asarray(t_grid, dtype=float)
        m = t_grid.size
        if self.dim == 1:
            out = np.empty((m, m))
            for a in range(m):
                for b in range(a, m):
                    out[a, b] = out[b, a] = self.cov(t_grid[a], t_grid[b])
            return out
        out = np.empty((m * self.dim, m * self.dim))
        for a in range(m):
            for b in range(m):
                block = self.cov(t_grid[b], t_grid[a])   # (i,j): Cov(Z_i(t_a), Z_j(t_b))
                out[a * self.dim:(a + 1) * self.dim,
                    b * self.dim:(b + 1) * self.dim] = block
        return 0.5 * (out + out.T)

    def mean_vector(self, t_grid) -> np.ndarray:
        t_grid = np.asarray(t_grid, dtype=float)
        if self.dim == 1:
            return np.asarray([self.mean(t) for t in t_grid], dtype=float)
        return np.concatenate([np.asarray(self.mean(t), dtype=float) for t in t_grid])


def count_limit_model(phi: CovarianceDensity,
                      K: VarianceFunction | None = None) -> LimitModel:
    if K is None:
        K = variance_function(phi)
    if phi.is_matrix:
        return LimitModel("multi_count", phi.k, lambda t: np.zeros(phi.k),
                          lambda s, t: limit_covariance_multi(phi, K, s, t))
    return LimitModel("count", 1, lambda t: 0.0,
                      lambda s, t: limit_covariance_G(phi, K, s, t))


def queue_limit_model(phi: CovarianceDensity, F0: ServiceModel, F: ServiceModel,
                      q0: float, x0: float = 0.0) -> LimitModel:
    samplable = F.is_continuous and F0.is_continuous
    note = "" if samplable else (
        "path sampling disabled: the pathwise integral needs continuous "
        "service distributions; covariance evaluation remains valid")
    return LimitModel(
        "queue_general", 1,
        lambda t: x0 * F0.survival(t),
        lambda s, t: cov_X_general(F0, F, q0, phi, s, t),
        steady_state_variance=var_X_infty(F, phi),
        samplable=samplable, note=note)


def exp_queue_limit_model(phi: CovarianceDensity, x0: float = 0.0) -> LimitModel:
    steady = None
    if phi.kernel is not None and isinstance(phi.kernel, Kernel):
        steady = var_xe_infty(phi.kernel, phi=phi)
    return LimitModel("queue_exponential", 1,
                      lambda t: mean_Xe(x0, t),
                      lambda s, t: cov_Xe(phi, s, t),
                      steady_state_variance=steady)


def multi_ou_limit_model(phi: CovarianceDensity, r, x0=None) -> LimitModel:
    r = np.asarray(r, dtype=float)
    x0 = np.zeros(phi.k) if x0 is None else np.asarray(x0, dtype=float)
    return LimitModel(
        "multi_ou", phi.k,
        lambda t: x0 * np.exp(-r * t),
        lambda s, t: np.array([[cov_multi_ou(phi, r, i, j, s, t)
                                for j in range(phi.k)] for i in range(phi.k)]),
        steady_state_variance=steady_state_cov_multi(phi, r))


def sample_limit_path(model: LimitModel, t_grid, seed: int,
                      n_draws: int = 1) -> np.ndarray:
    """Exact Gaussian draws of the limit process on a time grid.

    Returns (n_draws, len(t_grid)) or (n_draws, len(t_grid), k).  The Gram
    matrix is factorized after symmetrization, escalating a diagonal jitter
    tenfold from 1e-10 to at most 1e-8 before failing.
    """
    if not model.samplable:
        raise ConfigurationError(model.note or "model is not samplable")
    t_grid = np.asarray(t_grid, dtype=float)
    gram = model.gram(t_grid)
    L = None
    for jitter in _PSD_JITTERS:
        try:
            L = np.linalg.cholesky(gram + jitter * np.eye(gram.shape[0]))
            break
        except np.linalg.LinAlgError:
            continue
    if L is None:
        raise NumericalError("covariance matrix indefinite beyond 1e-8 jitter")
    rng = rep_stream(seed, 0)
    z = rng.standard_normal((n_draws, gram.shape[0]))
    draws = model.mean_vector(t_grid)[None, :] + z @ L.T
    if model.dim > 1:
        draws = draws.reshape(n_draws, t_grid.size, model.dim)
    return draws


# --- emitters -------------------------------------------------------------------

def write_cov_csv(model: LimitModel, times, path):
    times = sorted(float(x) for x in times)
    with open(path, "w") as fh:
        if model.dim == 1:
            fh.write("s,t,value\n")
            for a, s in enumerate(times):
                for t in times[a:]:
                    fh.write(f"{s:.17g},{t:.17g},{model.cov(s, t):.17g}\n")
        else:
            fh.write("s,t,i,j,value\n")
            for a, s in enumerate(times):
                for t in times[a:]:
                    block = model.cov(s, t)
                    for i in range(model.dim):
                        for j in range(model.dim):
                            fh.write(f"{s:.17g},{t:.17g},{i},{j},{block[i, j]:.17g}\n")


def write_matrix_json(matrix: np.ndarray, path):
    with open(path, "w") as fh:
        json.dump({"matrix": np.asarray(matrix).tolist()}, fh, indent=2)
        fh.write("\n")


def write_pmf_csv(approx: GaussianQueueApprox, support, path):
    with open(path, "w") as fh:
        fh.write("i,p\n")
        for i in support:
            fh.write(f"{int(i)},{approx.pmf(float(i)):.17g}\n")
