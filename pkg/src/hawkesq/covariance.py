"""Second-order theory: covariance density, variance function, limit covariances.

The covariance density phi of the unit-baseline stationary process solves

    phi(t) = h(t)/(1-||h||) + int_0^inf h(t+v) phi(v) dv + int_0^t h(t-v) phi(v) dv

with the even extension phi(-t) = phi(t).  The k-variate analogue replaces
h(t)/(1-||h||) by h(t) diag(a) and the even extension by Phi(-t) = Phi(t)^T.
Everything downstream (variance function, limit-process covariances, spectral
asymptotics) is driven by the solved grid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError
from .kernels import Kernel, KernelMatrix, SumOfExponentialsKernel

_TAIL_TOL = 1e-8          # required kernel tail mass at the truncation horizon
_RESIDUAL_TOL = 1e-6      # sup-norm residual of the discretized equation
_MAX_NODES = 20_001


def _trapz_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _cumtrapz(y: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * dt, axis=0)
    return out


@dataclass
class CovarianceDensity:
    """Covariance density on a uniform grid, scalar- or matrix-valued.

    values has shape (n,) in the univariate case and (n, k, k) otherwise.
    The negative half-line follows from the extension rule, see __call__.
    """

    t: np.ndarray
    values: np.ndarray
    dt: float
    norm: float                      # ||h||_L1 of the driving kernel (univariate sense)
    kernel: object = None            # Kernel or KernelMatrix
    a: np.ndarray | None = None      # branching vector (matrix case)
    closed_form: object = None       # optional exact evaluator phi(t)
    residual: float = 0.0
    _psi: np.ndarray = field(default=None, repr=False)
    _psi2: np.ndarray = field(default=None, repr=False)

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == 3

    @property
    def k(self) -> int:
        return self.values.shape[1] if self.is_matrix else 1

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def __call__(self, x):
        """Evaluate by linear interpolation; phi(-x) = phi(x) (scalars) or
        Phi(-x) = Phi(x)^T (matrices).  Scalar argument only for matrices."""
        if not self.is_matrix:
            x = np.asarray(x, dtype=float)
            return np.interp(np.abs(x), self.t, self.values, right=0.0)
        x = float(x)
        idx = min(abs(x) / self.dt, len(self.t) - 1.0)
        lo = int(idx)
        hi = min(lo + 1, len(self.t) - 1)
        w = idx - lo
        m = (1.0 - w) * self.values[lo] + w * self.values[hi]
        return m if x >= 0 else m.T

    def cumulative(self):
        """(Psi, Psi2): first and second running integrals of the grid values."""
        if self._psi is None:
            self._psi = _cumtrapz(self.values, self.dt)
            self._psi2 = _cumtrapz(self._psi, self.dt)
        return self._psi, self._psi2

    def l1(self):
        """Trapezoid integral over [0, t_max] (entrywise for matrices)."""
        psi, _ = self.cumulative()
        return psi[-1]

    def laplace(self, omega: float):
        """Trapezoid transform int_0^tmax exp(-omega t) values(t) dt."""
        w = _trapz_weights(len(self.t), self.dt) * np.exp(-omega * self.t)
        if self.is_matrix:
            return np.einsum("n,nij->ij", w, self.values)
        return float(w @ self.values)

    def write_csv(self, path):
        cols = ["t"] + (["phi"] if not self.is_matrix
                        else [f"phi_{i+1}{j+1}" for i in range(self.k) for j in range(self.k)])
        data = self.values.reshape(len(self.t), -1)
        _write_csv(path, cols, np.column_stack([self.t, data]))


def _default_t_max(kernel) -> float:
    return max(40.0, 20.0 * kernel.decay_scale())


def _resolve_grid(kernel, dt, t_max, tail_tol=_TAIL_TOL):
    if dt <= 0:
        raise ConfigurationError("grid step must be positive")
    if t_max is None:
        t_max = _default_t_max(kernel)
        while kernel.tail_mass(t_max) > tail_tol:
            t_max *= 1.5
            if t_max / dt > _MAX_NODES:
                raise NumericalError(
                    "kernel tail decays too slowly for the node cap; "
                    "pass a coarser dt or an explicit t_max")
    elif kernel.tail_mass(t_max) > tail_tol:
        raise ConfigurationError(
            f"tail mass H({t_max:g}) = {kernel.tail_mass(t_max):.2e} exceeds {tail_tol:g}")
    n = int(round(t_max / dt))
    if n + 1 > _MAX_NODES:
        raise NumericalError(f"{n + 1} nodes exceed the cap {_MAX_NODES}")
    return np.arange(n + 1) * dt


def _history_block(h, t, w, block=512):
    """W-weighted kernel evaluations h(t_i + t_j) row-blocked to bound memory."""
    n1 = len(t)
    A = np.empty((n1, n1))
    for i0 in range(0, n1, block):
        i1 = min(i0 + block, n1)
        A[i0:i1] = h(t[i0:i1, None] + t[None, :]) * w[None, :]
    return A


def _volterra_block(h, t, dt, block=512):
    """Trapezoid weights for int_0^{t_i} h(t_i - v) f(v) dv, row i."""
    n1 = len(t)
    A = np.empty((n1, n1))
    for i0 in range(0, n1, block):
        i1 = min(i0 + block, n1)
        D = t[i0:i1, None] - t[None, :]
        mask = D >= 0
        wc = np.where(mask, dt, 0.0)
        wc[:, 0] = np.where(mask[:, 0], 0.5 * dt, 0.0)
        for r in range(i0, i1):
            wc[r - i0, r] = 0.5 * dt if r > 0 else 0.0
        A[i0:i1] = np.where(mask, h(np.where(mask, D, 0.0)), 0.0) * wc
    if n1:
        A[0, :] = 0.0
    return A


def solve_phi_grid(kernel: Kernel, dt: float = 0.01, t_max: float | None = None) -> CovarianceDensity:
    """Solve the covariance-density equation on a uniform grid.

    Direct dense solve of the trapezoid-discretized linear system; the
    infinite history integral is truncated at t_max, which must satisfy
    H(t_max) < 1e-8.  The reported residual is the sup-norm defect of the
    discretized equation.
    """
    norm = kernel.l1_norm()
    if not norm < 1.0:
        raise ConfigurationError(f"||h||_L1 = {norm:.6g} >= 1")
    t = _resolve_grid(kernel, dt, t_max)
    if kernel.is_zero:
        return CovarianceDensity(t, np.zeros_like(t), dt, norm, kernel=kernel,
                                 closed_form=lambda x: np.zeros_like(np.asarray(x, float)))
    A = _history_block(kernel, t, _trapz_weights(len(t), dt))
    A += _volterra_block(kernel, t, dt)
    b = kernel(t) / (1.0 - norm)
    try:
        phi = np.linalg.solve(np.eye(len(t)) - A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular discretized system: {exc}") from exc
    residual = float(np.max(np.abs(phi - (A @ phi + b))))
    if residual > _RESIDUAL_TOL:
        raise NumericalError(f"integral-equation residual {residual:.2e} > {_RESIDUAL_TOL:g}")
    if phi.min() < -1e-6:
        raise NumericalError(f"covariance density significantly negative ({phi.min():.2e})")
    return CovarianceDensity(t, phi, dt, norm, kernel=kernel, residual=residual)


def phi_exponential_closed_form(alpha: float, beta: float, dt: float = 0.01,
                                t_max: float | None = None) -> CovarianceDensity:
    """Exact covariance density for h(t) = alpha*exp(-beta*t), 0 <= alpha < beta:

        phi(t) = alpha*beta*(2 beta - alpha) / (2 (beta-alpha)^2) * exp(-(beta-alpha) t)
    """
    if alpha < 0 or beta <= 0:
        raise ConfigurationError("need alpha >= 0 and beta > 0")
    if alpha >= beta:
        raise ConfigurationError(f"alpha = {alpha:g} >= beta = {beta:g}: ||h|| >= 1")
    kernel = SumOfExponentialsKernel([alpha], [beta]) if alpha > 0 else SumOfExponentialsKernel()
    if alpha == 0.0:
        return solve_phi_grid(kernel, dt=dt, t_max=t_max or 40.0)
    pref = alpha * beta * (2.0 * beta - alpha) / (2.0 * (beta - alpha) ** 2)
    rate = beta - alpha
    if t_max is None:
        t_max = max(_default_t_max(kernel), 20.0 / rate)
    t = _resolve_grid(kernel, dt, t_max, tail_tol=np.inf)

    def evaluator(x):
        x = np.asarray(x, dtype=float)
        return pref * np.exp(-rate * np.abs(x))

    return CovarianceDensity(t, evaluator(t), dt, alpha / beta, kernel=kernel,
                             closed_form=evaluator)


def solve_multivariate_phi(multi: KernelMatrix, dt: float = 0.02,
                           t_max: float | None = None) -> CovarianceDensity:
    """Solve the matrix covariance-density equation by one stacked dense solve.

    Unknowns are the k^2 grid functions Phi_ij, vectorized row-major; the
    history integral uses the extension Phi(-u) = Phi(u)^T.
    """
    k = multi.k
    a = multi.branching_vector()
    slow = max((multi.entries[i][j].decay_scale()
                for i in range(k) for j in range(k)
                if not multi.entries[i][j].is_zero), default=1.0)
    if t_max is None:
        t_max = max(40.0, 20.0 * slow)
        while multi.tail_mass(t_max) > _TAIL_TOL:
            t_max *= 1.5
    t = np.arange(int(round(t_max / dt)) + 1) * dt
    n1 = len(t)
    if k * k * n1 > 4 * _MAX_NODES:
        raise NumericalError("stacked system too large; coarsen dt or reduce t_max")
    w = _trapz_weights(n1, dt)
    P = [[_history_block(multi.entries[i][j], t, w) for j in range(k)] for i in range(k)]
    C = [[_volterra_block(multi.entries[i][j], t, dt) for j in range(k)] for i in range(k)]

    dim = k * k * n1
    A = np.zeros((dim, dim))
    b = np.zeros(dim)
    blk = lambda i, j: slice((i * k + j) * n1, (i * k + j) * n1 + n1)
    for i in range(k):
        for j in range(k):
            b[blk(i, j)] = multi.entries[i][j](t) * a[j]
            for q in range(k):
                A[blk(i, j), blk(j, q)] += P[i][q]     # history: sum_l h_il(t+u) Phi_jl(u)
            for l in range(k):
                A[blk(i, j), blk(l, j)] += C[i][l]     # convolution: sum_l h_il(t-v) Phi_lj(v)
    try:
        x = np.linalg.solve(np.eye(dim) - A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular stacked system: {exc}") from exc
    residual = float(np.max(np.abs(x - (A @ x + b))))
    if residual > _RESIDUAL_TOL:
        raise NumericalError(f"matrix integral-equation residual {residual:.2e}")
    values = np.empty((n1, k, k))
    for i in range(k):
        for j in range(k):
            values[:, i, j] = x[blk(i, j)]
    norm = multi.entries[0][0].l1_norm() if k == 1 else float("nan")
    return CovarianceDensity(t, values, dt, norm, kernel=multi, a=a, residual=residual)


@dataclass
class VarianceFunction:
    """Grid of K(t) = Var N(0, t] for the unit-baseline stationary process.

    Scalar grids store (n,), matrix grids (n, k, k).  The asymptotic slope
    is 1/(1-||h||)^3 in the univariate case; the offset is computed lazily
    through the spectral integral.
    """

    t: np.ndarray
    values: np.ndarray
    dt: float
    kernel: object = None
    slope: float | None = None
    _offset: float | None = field(default=None, repr=False)

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == 3

    def at(self, x):
        if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > self.t[-1] + 1e-12):
            raise ConfigurationError(f"time {x} outside the solved grid [0, {self.t[-1]:g}]")
        if not self.is_matrix:
            return np.interp(x, self.t, self.values)
        x = float(x)
        idx = min(x / self.dt, len(self.t) - 1.0)
        lo = int(idx)
        hi = min(lo + 1, len(self.t) - 1)
        w = idx - lo
        return (1.0 - w) * self.values[lo] + w * self.values[hi]

    def asymptotic_offset(self) -> float:
        if self._offset is None:
            self._offset = asymptotic_offset(self.kernel)
        return self._offset

    def write_csv(self, path):
        cols = ["t"] + (["K"] if not self.is_matrix
                        else [f"K_{i+1}{j+1}" for i in range(self.values.shape[1])
                              for j in range(self.values.shape[2])])
        _write_csv(path, cols, np.column_stack([self.t, self.values.reshape(len(self.t), -1)]))


def variance_function(phi: CovarianceDensity, norm: float | None = None) -> VarianceFunction:
    """K(t) = t/(1-||h||) + 2 * iterated integral of phi (univariate), or
    K(t) = diag(a) t + Psi2(t) + Psi2(t)^T (matrix case, symmetrized)."""
    _, psi2 = phi.cumulative()
    if phi.is_matrix:
        diag = np.einsum("n,ij->nij", phi.t, np.diag(phi.a))
        values = diag + psi2 + np.transpose(psi2, (0, 2, 1))
        return VarianceFunction(phi.t, values, phi.dt, kernel=phi.kernel)
    if norm is None:
        norm = phi.norm
    values = phi.t / (1.0 - norm) + 2.0 * psi2
    return VarianceFunction(phi.t, values, phi.dt, kernel=phi.kernel,
                            slope=asymptotic_slope_from_norm(norm))


def multivariate_variance(phi: CovarianceDensity, t: float) -> np.ndarray:
    """The k x k variance matrix at time t, from a solved matrix density."""
    if not phi.is_matrix:
        raise ConfigurationError("multivariate_variance needs a matrix-valued density")
    return variance_function(phi).at(t)


def _strip_integral(phi: CovarianceDensity, s: float, t: float):
    """int_s^t int_0^s phi(u - v) dv du for 0 <= s <= t, via the running
    integrals (algebraically identical to the shared-grid iterated trapezoid)."""
    _, psi2 = phi.cumulative()
    grid = phi.t

    def p2(x):
        if phi.is_matrix:
            idx = min(x / phi.dt, len(grid) - 1.0)
            lo = int(idx)
            hi = min(lo + 1, len(grid) - 1)
            w = idx - lo
            return (1.0 - w) * psi2[lo] + w * psi2[hi]
        return np.interp(x, grid, psi2)

    return p2(t) - p2(s) - p2(t - s)


def limit_covariance_G(phi: CovarianceDensity, K: VarianceFunction,
                       s: float, t: float) -> float:
    """Cov(G(t), G(s)) = strip integral + K(min(s, t)); symmetric in (s, t)."""
    lo, hi = (s, t) if s <= t else (t, s)
    if lo < 0 or hi > phi.t_max:
        raise ConfigurationError(f"({s}, {t}) outside the solved grid")
    return float(_strip_integral(phi, lo, hi) + K.at(lo))


def limit_covariance_multi(phi: CovarianceDensity, K: VarianceFunction,
                           s: float, t: float) -> np.ndarray:
    """Entrywise Cov(G_i(t), G_j(s)); for s > t the transpose of (t, s)."""
    if not phi.is_matrix:
        raise ConfigurationError("limit_covariance_multi needs a matrix-valued density")
    if s > t:
        return limit_covariance_multi(phi, K, t, s).T
    if s < 0 or t > phi.t_max:
        raise ConfigurationError(f"({s}, {t}) outside the solved grid")
    return _strip_integral(phi, s, t) + K.at(s)


def asymptotic_slope_from_norm(norm: float) -> float:
    return 1.0 / (1.0 - norm) ** 3


def asymptotic_slope(kernel: Kernel) -> float:
    """lim K(t)/t = 1/(1-||h||)^3."""
    norm = kernel.l1_norm()
    if not norm < 1.0:
        raise ConfigurationError("slope defined only for ||h|| < 1")
    return asymptotic_slope_from_norm(norm)


def asymptotic_offset(kernel: Kernel, n_nodes: int = 4001) -> float:
    """lim [K(t) - t/(1-||h||)^3], the spectral (Bartlett) offset.

    Evaluates the frequency integral on symmetric log-spaced nodes with the
    removable omega -> 0 singularity replaced by its analytic limit
    -(4/(1-||h||)^2) * [(1-||h||) m2 + m1^2] / 4 per the dominated-convergence
    derivation (the published limit display carries a sign slip; the value
    below reproduces the exponential-kernel closed form exactly).
    Requires a finite second moment; strictly negative unless h is zero.
    """
    norm = kernel.l1_norm()
    if not norm < 1.0:
        raise ConfigurationError("offset defined only for ||h|| < 1")
    if kernel.is_zero:
        return 0.0
    m1 = kernel.first_moment()
    m2 = kernel.second_moment()    # raises IntegrabilityError for heavy tails
    g0 = -((1.0 - norm) * m2 + m1 * m1) / (1.0 - norm) ** 2
    omegas = np.logspace(-4, 4, n_nodes)
    hat = kernel.fourier(omegas)
    denom = np.abs(1.0 - hat) ** 2
    g = ((1.0 - norm) ** 2 - denom) / (denom * omegas**2)
    xs = np.concatenate([[0.0], omegas])
    ys = np.concatenate([[g0], g])
    if not np.all(np.isfinite(ys)):
        raise NumericalError("spectral integrand not finite")
    integral = 2.0 * np.trapezoid(ys, xs)          # even integrand
    return integral / (np.pi * (1.0 - norm) ** 3)


# --- Laplace-transform pipeline for exponential mixtures ----------------------

@dataclass
class LaplacePipeline:
    """Solved Laplace system for a finite exponential mixture.

    R_i = h~(beta_i) / ((1 - h~(beta_i)) (1 - ||h||)),
    M_ij = alpha_j / ((1 - h~(beta_i)) (beta_j + beta_i)),
    (I - M) Xtilde = R  with Xtilde_i = phi~(beta_i).
    """

    R: np.ndarray
    M: np.ndarray
    Xtilde: np.ndarray
    kernel: SumOfExponentialsKernel
    norm: float
    residual: float
    condition: float

    def phi_tilde(self, omega: float) -> float:
        """Laplace transform of the covariance density at omega > 0."""
        if omega <= 0:
            raise ConfigurationError("phi_tilde requires omega > 0")
        if self.kernel.is_zero:
            return 0.0
        ht = self.kernel.laplace(omega)
        extra = float(np.sum(self.kernel.alphas * self.Xtilde
                             / (self.kernel.betas + omega)))
        return ht / ((1.0 - ht) * (1.0 - self.norm)) + extra / (1.0 - ht)

    def to_dict(self):
        return {"R": self.R.tolist(), "M": self.M.tolist(),
                "Xtilde": self.Xtilde.tolist(), "residual": self.residual,
                "condition": self.condition,
                "phi_tilde_at": {"1.0": self.phi_tilde(1.0)} if not self.kernel.is_zero else {}}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def laplace_pipeline(kernel: SumOfExponentialsKernel) -> LaplacePipeline:
    """Assemble and solve the finite Laplace system for phi~ at the decay rates."""
    if not isinstance(kernel, SumOfExponentialsKernel):
        raise ConfigurationError("laplace_pipeline requires a sum-of-exponentials kernel")
    norm = kernel.l1_norm()
    if not norm < 1.0:
        raise ConfigurationError("||h|| >= 1")
    d = kernel.alphas.size
    if d == 0:
        return LaplacePipeline(np.empty(0), np.empty((0, 0)), np.empty(0),
                               kernel, norm, 0.0, 1.0)
    ht = np.array([kernel.laplace(b) for b in kernel.betas])
    R = ht / ((1.0 - ht) * (1.0 - norm))
    M = (kernel.alphas[None, :] / (kernel.betas[None, :] + kernel.betas[:, None])) \
        / (1.0 - ht)[:, None]
    system = np.eye(d) - M
    condition = float(np.linalg.cond(system))
    if not np.isfinite(condition) or condition > 1e12:
        raise NumericalError(f"I - M ill-conditioned (cond = {condition:.3e})")
    x = np.linalg.solve(system, R)
    residual = float(np.max(np.abs(system @ x - R)))
    return LaplacePipeline(R, M, x, kernel, norm, residual, condition)


# --- plain-text emitters -------------------------------------------------------

def _write_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_covariance_csv(phi: CovarianceDensity, K: VarianceFunction,
                         times, path):
    """Triangular dump of Cov(G(s), G(t)) over the given probe times."""
    times = sorted(float(x) for x in times)
    rows = [(s, t, limit_covariance_G(phi, K, s, t))
            for i, s in enumerate(times) for t in times[i:]]
    _write_csv(path, ["s", "t", "cov"], np.array(rows))
