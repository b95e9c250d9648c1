"""Service-time distributions with inverse-CDF sampling and survival integrals."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigurationError


class ServiceModel:
    """A nonnegative service-time distribution with F(0) = 0."""

    is_continuous = True

    def cdf(self, x):
        raise NotImplementedError

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def survival_closed(self, x):
        """P(S >= x), the left-continuous version.

        Coincides with survival() for continuous distributions; for jump
        CDFs it is the version grid quadratures should sample so that a
        node sitting exactly on a jump carries the cell's true value.
        """
        return self.survival(x)

    def inverse_cdf(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def survival_cutoff(self, tol: float = 1e-12) -> float:
        """Smallest x with survival(x) <= tol; truncation point for integrals."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """One uniform per customer through the inverse CDF."""
        return self.inverse_cdf(rng.random(n))

    def to_dict(self) -> dict:
        raise NotImplementedError


class ExponentialService(ServiceModel):
    def __init__(self, rate: float = 1.0):
        if rate <= 0:
            raise ConfigurationError("rate must be positive")
        self.rate = float(rate)

    def __repr__(self):
        return f"ExponentialService(rate={self.rate:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)
        return out if x.ndim else float(out)

    def inverse_cdf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def survival_cutoff(self, tol=1e-12):
        return -math.log(tol) / self.rate

    def to_dict(self):
        return {"type": "exponential", "rate": self.rate}


class DeterministicService(ServiceModel):
    is_continuous = False

    def __init__(self, value: float):
        if value <= 0:
            raise ConfigurationError("deterministic service time must be positive (F(0) = 0)")
        self.value = float(value)

    def __repr__(self):
        return f"DeterministicService({self.value:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.value, 1.0, 0.0)
        return out if x.ndim else float(out)

    def survival_closed(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.value, 1.0, 0.0)
        return out if x.ndim else float(out)

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, self.value)
        return out if u.ndim else self.value

    def mean(self):
        return self.value

    def survival_cutoff(self, tol=1e-12):
        return self.value

    def to_dict(self):
        return {"type": "deterministic", "value": self.value}


class LogNormalService(ServiceModel):
    """exp(N(m, s^2)) service times."""

    def __init__(self, m: float, s: float):
        if s <= 0:
            raise ConfigurationError("shape parameter s must be positive")
        self.m = float(m)
        self.s = float(s)

    def __repr__(self):
        return f"LogNormalService(m={self.m:g}, s={self.s:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.m) / self.s
        out = np.where(x > 0, ndtr(z), 0.0)
        return out if x.ndim else float(out)

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(self.m + self.s * ndtri(u))

    def mean(self):
        return math.exp(self.m + 0.5 * self.s**2)

    def survival_cutoff(self, tol=1e-12):
        return math.exp(self.m + self.s * ndtri(1.0 - tol))

    def to_dict(self):
        return {"type": "lognormal", "m": self.m, "s": self.s}


class TabulatedInverseCDFService(ServiceModel):
    """Quantile function tabulated on a uniform probability grid over [0, 1].

    quantiles[0] must be 0 (so F(0) = 0) and the table strictly increasing
    after that; sampling interpolates the table linearly.
    """

    def __init__(self, quantiles):
        q = np.asarray(quantiles, dtype=float)
        if q.ndim != 1 or q.size < 2:
            raise ConfigurationError("need at least two quantile values")
        if q[0] != 0.0:
            raise ConfigurationError("quantiles[0] must be 0 so that F(0) = 0")
        if np.any(np.diff(q) <= 0):
            raise ConfigurationError("quantile table must be strictly increasing")
        self.quantiles = q
        self.u_grid = np.linspace(0.0, 1.0, q.size)

    def __repr__(self):
        return f"TabulatedInverseCDFService(n={self.quantiles.size}, max={self.quantiles[-1]:g})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.quantiles, self.u_grid, left=0.0, right=1.0)
        return out if x.ndim else float(out)

    def inverse_cdf(self, u):
        return np.interp(np.asarray(u, dtype=float), self.u_grid, self.quantiles)

    def mean(self):
        return float(np.trapezoid(self.quantiles, self.u_grid))

    def survival_cutoff(self, tol=1e-12):
        return float(self.quantiles[-1])

    def to_dict(self):
        return {"type": "tabulated_icdf", "quantiles": self.quantiles.tolist()}


def service_from_dict(data: dict) -> ServiceModel:
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigurationError("service spec must be an object with a 'type' field")
    kind = data["type"]
    try:
        if kind == "exponential":
            return ExponentialService(data.get("rate", 1.0))
        if kind == "deterministic":
            return DeterministicService(data["value"])
        if kind == "lognormal":
            return LogNormalService(data["m"], data["s"])
        if kind == "tabulated_icdf":
            return TabulatedInverseCDFService(data["quantiles"])
    except KeyError as exc:
        raise ConfigurationError(f"service spec missing field {exc}") from exc
    raise ConfigurationError(f"unknown service type {kind!r}")
