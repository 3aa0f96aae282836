"""Tobit data containers, the convex (Olsen) loss, and parameter bookkeeping.

Internally the censoring threshold is always 0: raw responses are shifted
once, at construction, by the threshold ``c`` and the shift is carried
along as ``censor_shift`` so predictions can be mapped back.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .special import hazard_h64, mills_excess64, mills_g64


class TobitError(ValueError):
    """Base class for input errors raised by this package."""


class InvalidParameterError(TobitError):
    pass


class DegenerateDataError(TobitError):
    pass


def _frozen(a, dtype=float, order="C"):
    a = np.array(a, dtype=dtype, order=order, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design ``x`` (n, p), shifted response ``y`` and indicators ``d = y > 0``.

    Use :meth:`from_observed` to build one from a raw response and a
    censoring threshold.
    """

    x: np.ndarray
    y: np.ndarray
    d: np.ndarray
    censor_shift: float = 0.0

    def __post_init__(self):
        x = _frozen(self.x, order="F")
        if x.ndim != 2:
            raise TobitError("x must be a 2-d array")
        y = _frozen(self.y)
        d = _frozen(self.d, dtype=bool)
        if y.shape != (x.shape[0],) or d.shape != y.shape:
            raise TobitError(f"shape mismatch: x {x.shape}, y {y.shape}, d {d.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise TobitError("x and y must be finite")
        if np.any(y < 0):
            raise TobitError("shifted responses must be nonnegative")
        if np.any(d != (y > 0)):
            raise TobitError("d must equal (y > 0)")
        if not d.any():
            raise DegenerateDataError("every observation is censored; the scale is unidentifiable")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "censor_shift", float(self.censor_shift))

    @classmethod
    def from_observed(cls, x, y, censor_value=0.0):
        """Shift ``y`` by ``censor_value``; values at the threshold are censored."""
        y = np.asarray(y, dtype=float)
        if np.any(y < censor_value):
            bad = int(np.flatnonzero(y < censor_value)[0])
            raise TobitError(
                f"response below the censoring value {censor_value!r} at row {bad}")
        shifted = y - censor_value
        return cls(x=x, y=shifted, d=shifted > 0, censor_shift=censor_value)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def n_uncensored(self):
        return int(self.d.sum())

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.y[rows], self.d[rows], self.censor_shift)

    def with_x(self, x):
        return Dataset(x, self.y, self.d, self.censor_shift)


@dataclass(frozen=True, eq=False)
class Standardization:
    means: np.ndarray
    scales: np.ndarray

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.means) / self.scales


@dataclass(frozen=True, eq=False)
class OlsenParams:
    """Convex parameterization: ``delta = beta / sigma``, ``gamma = 1 / sigma``."""

    delta0: float
    delta: np.ndarray
    gamma: float

    def __post_init__(self):
        delta = _frozen(np.atleast_1d(self.delta))
        if not (np.isfinite(self.delta0) and np.all(np.isfinite(delta)) and np.isfinite(self.gamma)):
            raise InvalidParameterError("parameters must be finite")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "delta0", float(self.delta0))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "delta", delta)

    def to_vector(self):
        """Stack as ``(delta0, delta_1..delta_p, gamma)``."""
        return np.concatenate([[self.delta0], self.delta, [self.gamma]])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v[0], v[1:-1], v[-1])


@dataclass(frozen=True, eq=False)
class NaturalParams:
    beta0: float
    beta: np.ndarray
    sigma: float

    def __post_init__(self):
        beta = _frozen(np.atleast_1d(self.beta))
        if not (np.isfinite(self.beta0) and np.all(np.isfinite(beta)) and np.isfinite(self.sigma)):
            raise InvalidParameterError("parameters must be finite")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma!r}")
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "beta", beta)


def to_natural(theta):
    return NaturalParams(theta.delta0 / theta.gamma, theta.delta / theta.gamma, 1.0 / theta.gamma)


def from_natural(params):
    gamma = 1.0 / params.sigma
    return OlsenParams(params.beta0 * gamma, params.beta * gamma, gamma)


def standardize(data):
    """Center and scale columns to mean 0 and (1/n) sum of squares 1."""
    x = data.x
    means = x.mean(axis=0)
    centered = x - means
    scales = np.sqrt(np.mean(centered * centered, axis=0))
    for j, (m, s) in enumerate(zip(means, scales)):
        if not s > 1e-14 * max(1.0, abs(m)):
            raise DegenerateDataError(f"column {j} has zero variance")
    std = Standardization(_frozen(means), _frozen(scales))
    return data.with_x(centered / scales), std


def destandardize_params(params, std):
    """Map coefficients fit on standardized x back to the raw x scale."""
    beta = params.beta / std.scales
    beta0 = params.beta0 - float(np.dot(beta, std.means))
    return NaturalParams(beta0, beta, params.sigma)


def _check_theta(theta, data):
    if theta.delta.shape != (data.p,):
        raise InvalidParameterError(
            f"delta has length {theta.delta.size}, data has {data.p} columns")


def linear_predictor(theta, data):
    return theta.delta0 + data.x @ theta.delta


def neg_loglik(theta, data):
    """Tobit loss ``-(1/n) log L_n(delta, gamma)`` (constants dropped)."""
    _check_theta(theta, data)
    eta = linear_predictor(theta, data)
    d = data.d
    resid = theta.gamma * data.y[d] - eta[d]
    total = d.sum() * np.log(theta.gamma) - 0.5 * np.dot(resid, resid)
    total += special.log_ndtr(-eta[~d]).sum()
    return float(-total / data.n)


def _scores(theta, data):
    # per-row derivative of the loss with respect to eta
    eta = linear_predictor(theta, data)
    d = data.d
    u = np.empty(data.n)
    u[d] = -(theta.gamma * data.y[d] - eta[d])
    u[~d] = mills_g64(-eta[~d])
    return eta, u


def gradient(theta, data):
    """Gradient of the loss, ordered ``(delta0, delta_1..delta_p, gamma)``."""
    _check_theta(theta, data)
    eta, u = _scores(theta, data)
    d = data.d
    n = data.n
    grad = np.empty(data.p + 2)
    grad[0] = u.sum() / n
    grad[1:-1] = data.x.T @ u / n
    resid = theta.gamma * data.y[d] - eta[d]
    grad[-1] = (-d.sum() / theta.gamma + np.dot(data.y[d], resid)) / n
    return grad


def hessian(theta, data):
    """Hessian of the loss; symmetric positive semidefinite."""
    _check_theta(theta, data)
    eta = linear_predictor(theta, data)
    d = data.d
    n = data.n
    z = np.column_stack([np.ones(n), data.x, -data.y])
    w = np.ones(n)
    w[~d] = hazard_h64(-eta[~d])
    h = z.T @ (w[:, None] * z)
    h[-1, -1] += d.sum() / theta.gamma ** 2
    h /= n
    return 0.5 * (h + h.T)


PREDICT_MODES = ("latent", "censored_mean", "prob_uncensored")


def predict(params, x_new, mode="censored_mean", censor_shift=0.0):
    """Predict on the raw response scale.

    ``latent`` gives ``c + m`` with ``m = beta0 + x'beta``; ``censored_mean``
    gives ``E[max(y*, c)] = c + Phi(m/s) m + s phi(m/s)``;
    ``prob_uncensored`` gives ``Phi(m/s)``.
    """
    x_new = np.asarray(x_new, dtype=float)
    if x_new.ndim == 1:
        x_new = x_new[None, :]
    if x_new.shape[1] != params.beta.size:
        raise TobitError(
            f"x_new has {x_new.shape[1]} columns, model has {params.beta.size}")
    m = params.beta0 + x_new @ params.beta
    if mode == "latent":
        return censor_shift + m
    z = m / params.sigma
    if mode == "prob_uncensored":
        return special.ndtr(z)
    if mode == "censored_mean":
        # sigma * Phi(z) * (z + g(z)), stable on both tails
        return censor_shift + params.sigma * special.ndtr(z) * mills_excess64(z)
    raise TobitError(f"unknown prediction mode {mode!r}; expected one of {PREDICT_MODES}")
