"""Exciting functions, baseline intensities, and their transforms.

A kernel is the nonnegative function h weighting the influence of past
events on the current intensity.  Three parametric families are supported
(sum of exponentials, shifted power law, tabulated values on a uniform
grid) together with a matrix-valued wrapper for mutually-exciting models.
"""
from __future__ import annotations

import json
import math

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, IntegrabilityError, NumericalError

# Pointwise-nonnegativity probe for mixed-sign exponential mixtures.
_PROBE_POINTS = 10_000
# Relative floor below which the kernel is treated as fully decayed.
_DECAY_FLOOR = 1e-12


class Kernel:
    """Base class: a nonnegative, integrable function on [0, inf)."""

    def __call__(self, t):
        raise NotImplementedError

    def l1_norm(self) -> float:
        """Integral of h over [0, inf)."""
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return self.l1_norm() == 0.0

    def laplace(self, omega: float, method: str = "auto") -> float:
        """One-sided Laplace transform at omega > 0."""
        raise NotImplementedError

    def fourier(self, omega):
        """One-sided Fourier transform: integral of exp(i*omega*t)*h(t).

        Accepts scalars or arrays; at omega = 0 this equals the L1 norm.
        """
        raise NotImplementedError

    def first_moment(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def tail_mass(self, t: float) -> float:
        """H(t) = integral of h over [t, inf)."""
        raise NotImplementedError

    def tail_integral(self, b: float) -> float:
        """Integral of H(s) over [b, inf); drives the burn-in bias bound."""
        raise NotImplementedError

    def decay_scale(self) -> float:
        """Characteristic (slowest) time scale of the kernel."""
        raise NotImplementedError

    def sample_offsets(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n birth offsets with density h / ||h||_L1."""
        raise NotImplementedError

    def majorant(self, t):
        """Non-increasing pointwise upper bound used by dominated thinning."""
        raise NotImplementedError

    def majorant_cutoff(self) -> float:
        """Lag beyond which the majorant is negligible and events are pruned."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _quad_cutoff(self) -> float:
        """Upper quadrature limit where h has decayed to ~1e-12 of h(0)."""
        raise NotImplementedError

    def _laplace_quadrature(self, omega: float) -> float:
        val, _ = quad(lambda t: math.exp(-omega * t) * float(self(t)),
                      0.0, self._quad_cutoff(), limit=200)
        return val


class SumOfExponentialsKernel(Kernel):
    """h(t) = sum_r alpha_r * exp(-beta_r * t).

    Parameters
    ----------
    alphas : array_like
        Term amplitudes.  Mixed signs are allowed as long as h stays
        pointwise nonnegative (checked on a dense probe grid).
    betas : array_like
        Strictly positive decay rates, one per term.
    """

    def __init__(self, alphas=(), betas=()):
        self.alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        self.betas = np.atleast_1d(np.asarray(betas, dtype=float))
        if self.alphas.shape != self.betas.shape or self.alphas.ndim != 1:
            raise ConfigurationError("alphas and betas must be 1-d and of equal length")
        if self.alphas.size and not np.all(np.isfinite(self.alphas)):
            raise ConfigurationError("non-finite amplitude")
        if self.alphas.size and np.any(self.betas <= 0):
            raise ConfigurationError("decay rates must be positive")
        if self.alphas.size and np.any(self.alphas < 0):
            probe = np.linspace(0.0, 20.0 / self.betas.min(), _PROBE_POINTS)
            if np.min(self(probe)) < 0:
                raise ConfigurationError(
                    "mixed-sign exponential mixture is negative somewhere on [0, 20/min beta]")

    def __repr__(self):
        terms = ", ".join(f"{a:g}*exp(-{b:g}t)" for a, b in zip(self.alphas, self.betas))
        return f"SumOfExponentialsKernel({terms or '0'})"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.alphas.size == 0:
            return np.zeros(t.shape) if t.ndim else 0.0
        flat = t.ravel()
        out = (self.alphas[:, None] * np.exp(-self.betas[:, None] * np.maximum(flat, 0.0)[None, :])).sum(axis=0)
        out = np.where(flat < 0, 0.0, out)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def l1_norm(self) -> float:
        return float(np.sum(self.alphas / self.betas)) if self.alphas.size else 0.0

    def laplace(self, omega, method="auto"):
        if omega <= 0:
            raise ConfigurationError("laplace transform requires omega > 0")
        if method not in ("auto", "closed_form", "quadrature"):
            raise ConfigurationError(f"unknown method {method!r}")
        if method == "quadrature":
            return self._laplace_quadrature(omega)
        if self.alphas.size == 0:
            return 0.0
        return float(np.sum(self.alphas / (self.betas + omega)))

    def fourier(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.alphas.size == 0:
            return np.zeros(omega.shape, complex) if omega.ndim else 0j
        out = (self.alphas[:, None] / (self.betas[:, None] - 1j * omega.ravel()[None, :])).sum(axis=0)
        return out.reshape(omega.shape) if omega.ndim else complex(out[0])

    def first_moment(self) -> float:
        return float(np.sum(self.alphas / self.betas**2)) if self.alphas.size else 0.0

    def second_moment(self) -> float:
        return float(np.sum(2.0 * self.alphas / self.betas**3)) if self.alphas.size else 0.0

    def tail_mass(self, t):
        if self.alphas.size == 0:
            return 0.0
        return float(np.sum((self.alphas / self.betas) * np.exp(-self.betas * t)))

    def tail_integral(self, b):
        if self.alphas.size == 0:
            return 0.0
        return float(np.sum((self.alphas / self.betas**2) * np.exp(-self.betas * b)))

    def decay_scale(self) -> float:
        return 1.0 / float(self.betas.min()) if self.alphas.size else 1.0

    def sample_offsets(self, rng, n):
        if n == 0:
            return np.empty(0)
        if self.alphas.size == 0:
            raise ConfigurationError("cannot sample offsets from the zero kernel")
        pos = self.alphas > 0
        weights = self.alphas[pos] / self.betas[pos]
        envelope_mass = float(weights.sum())
        cum = np.cumsum(weights) / envelope_mass
        betas_pos = self.betas[pos]

        def draw(m):
            comp = np.searchsorted(cum, rng.random(m))
            return rng.exponential(1.0, size=m) / betas_pos[comp]

        if np.all(self.alphas >= 0):
            return draw(n)
        # Mixed signs: rejection against the positive-part mixture envelope.
        out = np.empty(n)
        filled = 0
        alphas_pos = self.alphas[pos]
        for _ in range(10_000):
            m = n - filled
            cand = draw(m)
            env = (alphas_pos[:, None] * np.exp(-betas_pos[:, None] * cand[None, :])).sum(axis=0)
            keep = rng.random(m) * env <= self(cand)
            k = int(keep.sum())
            out[filled:filled + k] = cand[keep]
            filled += k
            if filled == n:
                return out
        raise NumericalError("offset rejection sampler failed to converge")

    def majorant(self, t):
        # Dropping negative-amplitude terms gives a non-increasing bound.
        t = np.asarray(t, dtype=float)
        pos = self.alphas > 0
        if not pos.any():
            return np.zeros(t.shape) if t.ndim else 0.0
        flat = np.maximum(t.ravel(), 0.0)
        out = (self.alphas[pos][:, None] * np.exp(-self.betas[pos][:, None] * flat[None, :])).sum(axis=0)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def majorant_cutoff(self) -> float:
        if self.alphas.size == 0:
            return 0.0
        return -math.log(_DECAY_FLOOR) / float(self.betas.min())

    def _quad_cutoff(self) -> float:
        return self.majorant_cutoff()

    def to_dict(self):
        return {"type": "sum_exp",
                "terms": [{"alpha": float(a), "beta": float(b)}
                          for a, b in zip(self.alphas, self.betas)]}


class PowerLawKernel(Kernel):
    """h(t) = amplitude / (1 + scale*t)**exponent.

    The L1 norm requires exponent > 1; the burn-in tail bound requires
    exponent > 2 and the spectral offset requires exponent > 3.
    """

    def __init__(self, scale: float, exponent: float, amplitude: float = 1.0):
        if scale <= 0 or exponent <= 0:
            raise ConfigurationError("scale and exponent must be positive")
        if amplitude < 0:
            raise ConfigurationError("amplitude must be nonnegative")
        self.scale = float(scale)
        self.exponent = float(exponent)
        self.amplitude = float(amplitude)

    def __repr__(self):
        return (f"PowerLawKernel({self.amplitude:g}/(1+{self.scale:g}t)^{self.exponent:g})")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.amplitude * (1.0 + self.scale * np.maximum(t, 0.0)) ** (-self.exponent)
        out = np.where(t < 0, 0.0, out)
        return out if t.ndim else float(out)

    @property
    def is_zero(self):
        return self.amplitude == 0.0

    def _require(self, gamma_min: float, what: str):
        if self.exponent <= gamma_min:
            raise IntegrabilityError(
                f"{what} diverges for power-law exponent {self.exponent} <= {gamma_min}")

    def l1_norm(self):
        self._require(1.0, "L1 norm")
        return self.amplitude / (self.scale * (self.exponent - 1.0))

    def laplace(self, omega, method="auto"):
        if omega <= 0:
            raise ConfigurationError("laplace transform requires omega > 0")
        return self._laplace_quadrature(omega)

    def fourier(self, omega):
        self._require(1.0, "Fourier transform")
        scalar = np.isscalar(omega) or np.ndim(omega) == 0
        omegas = np.atleast_1d(np.asarray(omega, dtype=float))
        cutoff = self._quad_cutoff()
        out = np.empty(omegas.shape, dtype=complex)
        for i, w in enumerate(omegas):
            if w == 0.0:
                out[i] = self.l1_norm()
                continue
            re, _ = quad(self, 0.0, cutoff, weight="cos", wvar=abs(w), limit=400)
            im, _ = quad(self, 0.0, cutoff, weight="sin", wvar=abs(w), limit=400)
            out[i] = re + 1j * math.copysign(1.0, w) * im
        return out if not scalar else complex(out[0])

    def first_moment(self):
        self._require(2.0, "first moment")
        g, d = self.exponent, self.scale
        return self.amplitude / (d * d * (g - 1.0) * (g - 2.0))

    def second_moment(self):
        self._require(3.0, "second moment")
        g, d = self.exponent, self.scale
        return 2.0 * self.amplitude / (d**3 * (g - 1.0) * (g - 2.0) * (g - 3.0))

    def tail_mass(self, t):
        self._require(1.0, "tail mass")
        g, d = self.exponent, self.scale
        return self.amplitude * (1.0 + d * t) ** (1.0 - g) / (d * (g - 1.0))

    def tail_integral(self, b):
        self._require(2.0, "burn-in tail bound")
        g, d = self.exponent, self.scale
        return self.amplitude * (1.0 + d * b) ** (2.0 - g) / (d * d * (g - 1.0) * (g - 2.0))

    def decay_scale(self):
        return 1.0 / self.scale

    def sample_offsets(self, rng, n):
        if self.is_zero:
            raise ConfigurationError("cannot sample offsets from the zero kernel")
        self._require(1.0, "offset density")
        # Exact inverse CDF: F(t) = 1 - (1 + scale*t)^(1-exponent).
        u = rng.random(n)
        return ((1.0 - u) ** (-1.0 / (self.exponent - 1.0)) - 1.0) / self.scale

    def majorant(self, t):
        return self(np.maximum(t, 0.0))  # already non-increasing

    def majorant_cutoff(self):
        # h(T) = 1e-12 * h(0)
        return ((_DECAY_FLOOR) ** (-1.0 / self.exponent) - 1.0) / self.scale

    def _quad_cutoff(self):
        return self.majorant_cutoff()

    def to_dict(self):
        return {"type": "power_law", "scale": self.scale,
                "exponent": self.exponent, "amplitude": self.amplitude}


class TabulatedKernel(Kernel):
    """Piecewise-linear kernel from values h(k*dt) on a uniform grid.

    Values beyond the cutoff (n-1)*dt are treated as zero.  All integrals
    use trapezoid quadrature on the same grid, i.e. they are exact for the
    interpolant.
    """

    def __init__(self, dt: float, values):
        if dt <= 0:
            raise ConfigurationError("grid step must be positive")
        self.dt = float(dt)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ConfigurationError("need at least two tabulated values")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ConfigurationError("tabulated values must be finite and nonnegative")
        self.grid = np.arange(self.values.size) * self.dt
        self.cutoff = float(self.grid[-1])

    def __repr__(self):
        return f"TabulatedKernel(dt={self.dt:g}, cutoff={self.cutoff:g}, n={self.values.size})"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.grid, self.values, left=0.0, right=0.0)
        out = np.where(t < 0, 0.0, out)
        return out if t.ndim else float(out)

    def l1_norm(self):
        return float(np.trapezoid(self.values, dx=self.dt))

    def laplace(self, omega, method="auto"):
        if omega <= 0:
            raise ConfigurationError("laplace transform requires omega > 0")
        return float(np.trapezoid(np.exp(-omega * self.grid) * self.values, dx=self.dt))

    def fourier(self, omega):
        # Exact transform of the piecewise-linear interpolant: hat-function
        # weights keep this accurate at frequencies far above 1/dt.
        scalar = np.isscalar(omega) or np.ndim(omega) == 0
        om = np.atleast_1d(np.asarray(omega, dtype=float))[:, None]
        a = om * self.dt
        small = np.abs(a) < 1e-3      # series below this to dodge cancellation
        with np.errstate(divide="ignore", invalid="ignore"):
            # transform of the boundary half-hat: (1 + i w dt - e^{i w dt}) / (w^2 dt)
            half = np.where(small,
                            self.dt * (0.5 + 1j * a / 6.0 - a**2 / 24.0 - 1j * a**3 / 120.0),
                            (1.0 + 1j * a - np.exp(1j * a)) / np.where(small, 1.0, om**2 * self.dt))
            sinc2 = np.where(small, self.dt * (1.0 - a**2 / 12.0 + a**4 / 360.0),
                             (2.0 - 2.0 * np.cos(a)) / np.where(small, 1.0, om**2 * self.dt))
        w = np.broadcast_to(sinc2.astype(complex), (om.shape[0], self.values.size)).copy()
        w[:, 0] = half[:, 0]
        w[:, -1] = np.conj(half[:, 0])
        phase = np.exp(1j * om * self.grid[None, :])
        out = (w * phase * self.values[None, :]).sum(axis=1)
        return out if not scalar else complex(out[0])

    def first_moment(self):
        return float(np.trapezoid(self.grid * self.values, dx=self.dt))

    def second_moment(self):
        return float(np.trapezoid(self.grid**2 * self.values, dx=self.dt))

    def _tail_masses(self):
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * self.dt
        return np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])

    def tail_mass(self, t):
        if t >= self.cutoff:
            return 0.0
        return float(np.interp(t, self.grid, self._tail_masses()))

    def tail_integral(self, b):
        if b >= self.cutoff:
            return 0.0
        tm = self._tail_masses()
        i = int(np.searchsorted(self.grid, b))
        xs = np.concatenate([[b], self.grid[i:]])
        ys = np.concatenate([[self.tail_mass(b)], tm[i:]])
        return float(np.trapezoid(ys, xs))

    def decay_scale(self):
        return max(self.dt, self.cutoff / 10.0)

    def sample_offsets(self, rng, n):
        norm = self.l1_norm()
        if norm == 0:
            raise ConfigurationError("cannot sample offsets from the zero kernel")
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * self.dt
        cdf = np.concatenate([[0.0], np.cumsum(seg)]) / norm
        u = rng.random(n)
        i = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, self.values.size - 2)
        # Density is linear within a bin: invert the quadratic local CDF.
        f0, f1 = self.values[i], self.values[i + 1]
        rem = (u - cdf[i]) * norm
        slope = (f1 - f0) / self.dt
        disc = np.maximum(f0**2 + 2.0 * slope * rem, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(np.abs(slope) > 1e-14 * np.maximum(f0, 1.0),
                         (np.sqrt(disc) - f0) / slope,
                         rem / np.maximum(f0, 1e-300))
        return self.grid[i] + np.clip(x, 0.0, self.dt)

    def majorant(self, t):
        run = np.maximum.accumulate(self.values[::-1])[::-1]
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.floor(t / self.dt).astype(int), 0, self.values.size - 1)
        out = np.where((t < 0) | (t >= self.cutoff), 0.0, run[idx])
        return out if t.ndim else float(out)

    def majorant_cutoff(self):
        return self.cutoff

    def _quad_cutoff(self):
        return self.cutoff

    def to_dict(self):
        return {"type": "tabulated", "dt": self.dt, "values": self.values.tolist()}


ZERO_KERNEL = SumOfExponentialsKernel((), ())


class KernelMatrix:
    """k x k matrix of kernels plus nonnegative baseline shape vector p.

    The stationarity admission check is the spectral radius of the matrix
    of L1 norms being strictly below one.
    """

    def __init__(self, entries, p):
        self.entries = [list(row) for row in entries]
        self.k = len(self.entries)
        if self.k < 1 or any(len(row) != self.k for row in self.entries):
            raise ConfigurationError("kernel matrix must be square")
        for row in self.entries:
            for kern in row:
                if not isinstance(kern, Kernel):
                    raise ConfigurationError("matrix entries must be Kernel instances")
        self.p = np.asarray(p, dtype=float)
        if self.p.shape != (self.k,) or np.any(self.p < 0):
            raise ConfigurationError("p must be a nonnegative vector of length k")
        rho = self.spectral_radius()
        if not rho < 1.0:
            raise ConfigurationError(f"spectral radius {rho:.6g} >= 1: no stationary version")

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    def l1_matrix(self) -> np.ndarray:
        return np.array([[kern.l1_norm() for kern in row] for row in self.entries])

    def spectral_radius(self) -> float:
        return spectral_radius(self.l1_matrix())

    def branching_vector(self) -> np.ndarray:
        """a = (I - H)^{-1} p, the per-unit-baseline mean rates."""
        return np.linalg.solve(np.eye(self.k) - self.l1_matrix(), self.p)

    def decay_scale(self) -> float:
        scales = [kern.decay_scale() for row in self.entries for kern in row
                  if not kern.is_zero]
        return max(scales) if scales else 1.0

    def tail_mass(self, t: float) -> float:
        return max(sum(self.entries[i][j].tail_mass(t) for i in range(self.k))
                   for j in range(self.k))

    def to_dict(self):
        return {"type": "matrix", "p": self.p.tolist(),
                "entries": [[kern.to_dict() for kern in row] for row in self.entries]}


def spectral_radius(matrix, tol: float = 1e-13, max_iter: int = 20_000) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration.

    Iterates on (H + I) so that period-two cycles cannot stall; raises
    NumericalError when the Rayleigh quotient has not settled by the cap.
    """
    H = np.asarray(matrix, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ConfigurationError("spectral radius needs a square matrix")
    if np.any(H < 0):
        raise ConfigurationError("matrix of L1 norms must be nonnegative")
    k = H.shape[0]
    if k == 1:
        return float(H[0, 0])
    v = np.full(k, 1.0 / k)
    lam_old = math.inf
    for _ in range(max_iter):
        w = H @ v + v
        s = float(w.sum())
        if s == 0.0:
            return 0.0
        lam = s / float(v.sum())
        v = w / s
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
            return lam - 1.0
        lam_old = lam
    raise NumericalError("power iteration did not converge")


class HawkesConfig:
    """A stationary model: baseline scaling mu plus a kernel (or matrix).

    For univariate input the stationarity bound ||h|| < 1 is enforced; for
    matrix input the spectral-radius bound is enforced by KernelMatrix.
    The mean-rate vector must come out finite and positive.
    """

    def __init__(self, baseline: float, kernel):
        if baseline <= 0 or not math.isfinite(baseline):
            raise ConfigurationError("baseline must be positive and finite")
        self.baseline = float(baseline)
        self.kernel = kernel
        if isinstance(kernel, Kernel):
            norm = kernel.l1_norm()
            if not norm < 1.0:
                raise ConfigurationError(f"||h||_L1 = {norm:.6g} >= 1: no stationary version")
        elif not isinstance(kernel, KernelMatrix):
            raise ConfigurationError("kernel must be a Kernel or KernelMatrix")
        rates = self.mean_rate_vector()
        if np.any(~np.isfinite(rates)) or np.any(rates <= 0):
            raise ConfigurationError("mean-rate vector must be finite and positive")

    @property
    def dimension(self) -> int:
        return self.kernel.k if isinstance(self.kernel, KernelMatrix) else 1

    @property
    def is_multivariate(self) -> bool:
        return isinstance(self.kernel, KernelMatrix)

    def kernel_matrix(self) -> KernelMatrix:
        """View the model as k >= 1 dimensional."""
        if self.is_multivariate:
            return self.kernel
        return KernelMatrix([[self.kernel]], [1.0])

    def branching_vector(self) -> np.ndarray:
        if self.is_multivariate:
            return self.kernel.branching_vector()
        return np.array([1.0 / (1.0 - self.kernel.l1_norm())])

    def mean_rate_vector(self) -> np.ndarray:
        return self.baseline * self.branching_vector()

    def mean_rate(self) -> float:
        """Scalar mean rate; only defined for univariate models."""
        if self.is_multivariate:
            raise ConfigurationError("mean_rate() is univariate; use mean_rate_vector()")
        return float(self.mean_rate_vector()[0])

    def to_dict(self):
        return {"mu": self.baseline, "kernel": self.kernel.to_dict()}


# --- functional facades matching the published operation names ---------------

def l1_norm(kernel: Kernel) -> float:
    return kernel.l1_norm()


def laplace_transform(kernel: Kernel, omega: float, method: str = "auto") -> float:
    return kernel.laplace(omega, method=method)


def fourier_transform(kernel: Kernel, omega):
    return kernel.fourier(omega)


# --- JSON schema --------------------------------------------------------------

def kernel_from_dict(data: dict):
    """Build a kernel (or matrix) from the JSON schema used by CLI configs."""
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigurationError("kernel spec must be an object with a 'type' field")
    kind = data["type"]
    try:
        if kind == "sum_exp":
            terms = data.get("terms", [])
            return SumOfExponentialsKernel([t["alpha"] for t in terms],
                                           [t["beta"] for t in terms])
        if kind == "power_law":
            return PowerLawKernel(data["scale"], data["exponent"],
                                  data.get("amplitude", 1.0))
        if kind == "tabulated":
            return TabulatedKernel(data["dt"], data["values"])
        if kind == "matrix":
            entries = [[kernel_from_dict(cell) for cell in row]
                       for row in data["entries"]]
            return KernelMatrix(entries, data["p"])
    except KeyError as exc:
        raise ConfigurationError(f"kernel spec missing field {exc}") from exc
    raise ConfigurationError(f"unknown kernel type {kind!r}")


def kernel_from_json(text: str):
    return kernel_from_dict(json.loads(text))
