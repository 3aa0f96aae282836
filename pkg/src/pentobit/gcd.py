"""Generalized coordinate descent for the weighted-lasso Tobit objective.

Each coordinate of the Tobit loss has curvature at most ``(1/n) sum_i x_ij^2``
(1 on standardized data), so a quadratic majorizer with that curvature plus
the l1 term is minimized in closed form by soft-thresholding.  ``gamma`` is
updated exactly through the positive root of a quadratic.

The pure-Python ``update_*`` functions are the reference implementation;
``fit_*`` run the same updates through compiled sweeps.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .special import mills_g64
from .tobit import (
    DegenerateDataError,
    InvalidParameterError,
    NaturalParams,
    OlsenParams,
    destandardize_params,
    from_natural,
    gradient,
    neg_loglik,
    standardize,
    to_natural,
)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-7
    max_cycles: int = 10_000
    active_set: bool = True
    standardize: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")


@dataclass(frozen=True, eq=False)
class FitResult:
    """One penalized fit.

    ``theta`` lives on the solver's (standardized) scale and ``objective``
    is measured there; ``natural`` is on the raw x scale.
    """

    theta: OlsenParams
    natural: NaturalParams
    objective: float
    cycles_used: int
    kkt_residual: float
    converged: bool
    lam: float
    weights_used: np.ndarray | None = None
    standardization: object = None
    loss: str = "tobit"
    history: tuple = field(default=())
    supports: tuple = field(default=())

    @property
    def support(self):
        return np.flatnonzero(self.natural.beta)


@dataclass(frozen=True, eq=False)
class PathResult:
    lambdas: np.ndarray
    fits: tuple
    null_model: tuple


def soft_threshold(z, t):
    """``S(z, t) = sgn(z) (|z| - t)_+``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


# -- reference coordinate updates ---------------------------------------------


@dataclass
class GcdState:
    """Current iterate plus the cached linear predictor ``eta = delta0 + X delta``."""

    data: object
    delta0: float
    delta: np.ndarray
    gamma: float
    eta: np.ndarray

    @classmethod
    def from_theta(cls, theta, data):
        delta = np.array(theta.delta, dtype=float)
        return cls(data, theta.delta0, delta, theta.gamma, theta.delta0 + data.x @ delta)

    def theta(self):
        return OlsenParams(self.delta0, self.delta.copy(), self.gamma)

    def row_scores(self):
        d = self.data.d
        u = np.empty(self.data.n)
        u[d] = -(self.gamma * self.data.y[d] - self.eta[d])
        u[~d] = mills_g64(-self.eta[~d])
        return u

    def derivative(self, j=None):
        """Partial derivative of the loss in ``delta_j`` (``None`` = intercept)."""
        u = self.row_scores()
        if j is None:
            return float(u.mean())
        return float(self.data.x[:, j] @ u / self.data.n)

    def commit_delta0(self, value):
        self.eta += value - self.delta0
        self.delta0 = float(value)

    def commit_delta_j(self, j, value):
        self.eta += self.data.x[:, j] * (value - self.delta[j])
        self.delta[j] = value

    def commit_gamma(self, value):
        if not value > 0:
            raise InvalidParameterError("gamma must stay positive")
        self.gamma = float(value)


def update_delta_j(j, state, lam, w_j):
    """Minimizer of the coordinate majorizer plus ``lam * w_j * |delta_j|``."""
    curvature = float(np.mean(state.data.x[:, j] ** 2))
    z = curvature * state.delta[j] - state.derivative(j)
    return float(soft_threshold(z, lam * w_j)) / curvature


def update_delta0(state):
    return state.delta0 - state.derivative(None)


def update_gamma(state):
    """Exact minimizer of the loss in ``gamma`` with ``delta`` held fixed."""
    d = state.data.d
    y1 = state.data.y[d]
    sum_y2 = float(np.dot(y1, y1))
    if not sum_y2 > 0:
        raise DegenerateDataError("no positive uncensored responses; gamma is undefined")
    a = float(np.dot(y1, state.eta[d]))
    n1 = float(d.sum())
    disc = np.sqrt(a * a + 4.0 * sum_y2 * n1)
    if a >= 0:
        return (a + disc) / (2.0 * sum_y2)
    return 2.0 * n1 / (disc - a)


def gcd_cycle(state, lam, weights):
    """One full cycle in the listed order: intercept, slopes, then gamma."""
    state.commit_delta0(update_delta0(state))
    for j in range(state.data.p):
        state.commit_delta_j(j, update_delta_j(j, state, lam, weights[j]))
    state.commit_gamma(update_gamma(state))
    return state


# -- optimality certificates ----------------------------------------------------


def _kkt_from_grad(grad_coef, coef, pen, free_grads):
    nz = coef != 0
    viol = np.empty_like(coef)
    viol[nz] = np.abs(grad_coef[nz] + pen[nz] * np.sign(coef[nz]))
    with np.errstate(invalid="ignore"):
        viol[~nz] = np.maximum(np.abs(grad_coef[~nz]) - pen[~nz], 0.0)
    viol = np.nan_to_num(viol, nan=0.0)
    parts = [np.abs(free_grads)]
    if viol.size:
        parts.append(viol)
    return float(np.max(np.concatenate(parts)))


def kkt_residual(theta, data, pen):
    """Largest violation of the weighted-lasso optimality conditions.

    ``pen`` is the per-coordinate penalty level ``lam * w_j``.
    """
    grad = gradient(theta, data)
    return _kkt_from_grad(grad[1:-1], np.asarray(theta.delta), np.asarray(pen, float),
                          np.array([grad[0], grad[-1]]))


# -- prepared problems ------------------------------------------------------------


class TobitProblem:
    """A dataset standardized once and laid out for repeated solves."""

    loss_name = "tobit"

    def __init__(self, data, standardize_x=True):
        self.raw = data
        if standardize_x:
            self.data, self.std = standardize(data)
        else:
            self.data, self.std = data, None
        self.X = np.asfortranarray(self.data.x)
        self.y = np.ascontiguousarray(self.data.y)
        self.unc = np.flatnonzero(self.data.d)
        self.cen = np.flatnonzero(~self.data.d)
        self.M = np.mean(self.X ** 2, axis=0)
        if np.any(self.M <= 0):
            raise DegenerateDataError(f"column {int(np.argmin(self.M))} is identically zero")
        self._null = None

    @property
    def p(self):
        return self.X.shape[1]

    def coef(self, theta):
        return np.asarray(theta.delta)

    def loss(self, theta):
        return neg_loglik(theta, self.data)

    def natural(self, theta):
        nat = to_natural(theta)
        return destandardize_params(nat, self.std) if self.std is not None else nat

    def null_model(self, config):
        if self._null is None:
            y1 = self.y[self.unc]
            sd = float(np.std(y1))
            gamma = 1.0 / sd if sd > 0 else np.sqrt(y1.size / float(np.dot(y1, y1)))
            eta = np.zeros(self.data.n)
            empty = np.zeros(0)
            delta0, gamma, _, _ = _kernels.tobit_solve(
                self.X[:, :0], self.y, self.unc, self.cen, empty, empty, empty, eta,
                0.0, gamma, min(config.tol, 1e-10), max(config.max_cycles, 10_000), False)
            self._null = (float(delta0), float(gamma))
        return self._null

    def lambda_max(self, weights=None, config=None):
        config = config or SolverConfig()
        delta0, gamma = self.null_model(config)
        grad = gradient(OlsenParams(delta0, np.zeros(self.p), gamma), self.data)[1:-1]
        return _weighted_max(grad, weights)

    def kkt(self, theta, pen):
        return kkt_residual(theta, self.data, pen)

    def solve(self, pen, init=None, config=None, lam=np.nan):
        config = config or SolverConfig()
        pen = np.ascontiguousarray(pen, dtype=float)
        if init is None:
            delta0, gamma = self.null_model(config)
            delta = np.zeros(self.p)
        else:
            delta0, gamma = init.delta0, init.gamma
            delta = np.array(init.delta, dtype=float)
        eta = delta0 + self.X @ delta
        tol = config.tol
        cycles = 0
        while True:
            delta0, gamma, used, done = _kernels.tobit_solve(
                self.X, self.y, self.unc, self.cen, self.M, pen, delta, eta,
                delta0, gamma, tol, config.max_cycles - cycles, config.active_set)
            cycles += used
            theta = OlsenParams(delta0, delta.copy(), gamma)
            kkt = self.kkt(theta, pen)
            if not done or kkt <= 10 * config.tol or cycles >= config.max_cycles or tol < 1e-14:
                break
            # coordinates moved less than tol but the certificate is loose: tighten
            tol /= 10.0
        converged = bool(done and kkt <= 10 * config.tol)
        objective = self.loss(theta) + float(np.dot(pen[pen < np.inf], np.abs(delta[pen < np.inf])))
        return FitResult(
            theta=theta, natural=self.natural(theta), objective=objective,
            cycles_used=cycles, kkt_residual=kkt, converged=converged, lam=float(lam),
            weights_used=_weights_from_pen(pen, lam), standardization=self.std,
            loss=self.loss_name)


class LeastSquaresProblem(TobitProblem):
    """Penalized least squares treating the (shifted) response as observed."""

    loss_name = "ls"

    def __init__(self, data, standardize_x=True):
        super().__init__(data, standardize_x)
        self.y_mean = float(np.mean(self.y))

    def coef(self, theta):
        return np.asarray(theta.delta) / theta.gamma

    def _beta_loss(self, beta0, beta):
        r = self.y - beta0 - self.X @ beta
        return 0.5 * float(np.dot(r, r)) / self.data.n

    def loss(self, theta):
        return self._beta_loss(theta.delta0 / theta.gamma, self.coef(theta))

    def null_model(self, config):
        r = self.y - self.y_mean
        return self.y_mean, float(np.sqrt(np.mean(r * r)))

    def lambda_max(self, weights=None, config=None):
        grad = self.X.T @ (self.y - self.y_mean) / self.data.n
        return _weighted_max(grad, weights)

    def kkt(self, theta, pen):
        beta = self.coef(theta)
        r = self.y - theta.delta0 / theta.gamma - self.X @ beta
        grad = -self.X.T @ r / self.data.n
        return _kkt_from_grad(grad, beta, pen, np.array([np.mean(r)]))

    def _theta(self, beta0, beta):
        r = self.y - beta0 - self.X @ beta
        sigma = max(float(np.sqrt(np.mean(r * r))), 1e-300)
        return from_natural(NaturalParams(beta0, beta, sigma))

    def solve(self, pen, init=None, config=None, lam=np.nan):
        config = config or SolverConfig()
        pen = np.ascontiguousarray(pen, dtype=float)
        if init is None:
            beta0, beta = self.y_mean, np.zeros(self.p)
        else:
            beta0, beta = init.delta0 / init.gamma, np.array(init.delta, dtype=float) / init.gamma
        resid = self.y - beta0 - self.X @ beta
        tol = config.tol
        cycles = 0
        while True:
            beta0, used, done = _kernels.ls_solve(
                self.X, self.M, pen, beta, resid, beta0, tol,
                config.max_cycles - cycles, config.active_set)
            cycles += used
            theta = self._theta(beta0, beta.copy())
            kkt = self.kkt(theta, pen)
            if not done or kkt <= 10 * config.tol or cycles >= config.max_cycles or tol < 1e-14:
                break
            tol /= 10.0
        converged = bool(done and kkt <= 10 * config.tol)
        finite = pen < np.inf
        objective = self._beta_loss(beta0, beta) + float(np.dot(pen[finite], np.abs(beta[finite])))
        return FitResult(
            theta=theta, natural=self.natural(theta), objective=objective,
            cycles_used=cycles, kkt_residual=kkt, converged=converged, lam=float(lam),
            weights_used=_weights_from_pen(pen, lam), standardization=self.std,
            loss=self.loss_name)


def _weighted_max(grad, weights):
    grad = np.abs(grad)
    if weights is None:
        return float(grad.max()) if grad.size else 0.0
    weights = np.asarray(weights, dtype=float)
    active = weights > 0
    if not active.any():
        return 0.0
    return float(np.max(grad[active] / weights[active]))


def _weights_from_pen(pen, lam):
    if not np.isfinite(lam) or lam <= 0:
        return None
    return pen / lam


def _weights(weights, p):
    if weights is None:
        return np.ones(p)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (p,) or np.any(weights < 0):
        raise ValueError(f"weights must be a nonnegative vector of length {p}")
    return weights


def _lambda_grid(lam_max, n, p, n_lambda, lambda_min_ratio):
    if not lam_max > 0:
        raise DegenerateDataError("lambda_max is zero; no regularization path exists")
    if lambda_min_ratio is None:
        lambda_min_ratio = 0.05 if p > n else 0.01
    # the null model is itself iterative; a hair of headroom keeps the first fit exactly null
    lam_max *= 1.0 + 1e-8
    if n_lambda == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lambda_min_ratio * lam_max, n_lambda)


def _path(problem, lambdas, weights, config, stop_unconverged=False):
    # with stop_unconverged the path ends before the first fit that fails
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    w = _weights(weights, problem.p)
    fits = []
    init = None
    for lam in lambdas:
        fit = problem.solve(lam * w, init=init, config=config, lam=lam)
        if stop_unconverged and not fit.converged:
            break
        fits.append(fit)
        init = fit.theta
    return fits


# -- public Tobit API -----------------------------------------------------------------


def lambda_max(data, weights=None, config=None):
    """Smallest lambda at which all slopes are zero."""
    config = config or SolverConfig()
    return TobitProblem(data, config.standardize).lambda_max(weights, config)


def null_model(data, config=None):
    """``(delta0, gamma)`` of the slopes-zero fit."""
    config = config or SolverConfig()
    return TobitProblem(data, config.standardize).null_model(config)


def fit_weighted_lasso(data, lam, weights=None, config=None, init=None):
    """Weighted-lasso penalized Tobit fit.

    ``init`` is an :class:`OlsenParams` on the solver scale (for example the
    ``theta`` of an earlier fit); without it the solve starts from the null
    model.
    """
    config = config or SolverConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    problem = TobitProblem(data, config.standardize)
    pen = lam * _weights(weights, problem.p)
    return problem.solve(pen, init=init, config=config, lam=lam)


def fit_path(data, n_lambda=100, lambda_min_ratio=None, weights=None, config=None, lambdas=None):
    """Warm-started weighted-lasso fits on a decreasing, log-spaced lambda grid."""
    config = config or SolverConfig()
    problem = TobitProblem(data, config.standardize)
    if lambdas is None:
        lam_max = problem.lambda_max(weights, config)
        lambdas = _lambda_grid(lam_max, data.n, data.p, n_lambda, lambda_min_ratio)
    fits = _path(problem, lambdas, weights, config)
    return PathResult(np.asarray(lambdas, dtype=float), tuple(fits), problem.null_model(config))


# -- least-squares baselines ------------------------------------------------------------


def ls_lambda_max(data, weights=None, config=None):
    config = config or SolverConfig()
    return LeastSquaresProblem(data, config.standardize).lambda_max(weights)


def ls_path(data, n_lambda=100, lambda_min_ratio=None, weights=None, config=None, lambdas=None):
    config = config or SolverConfig()
    problem = LeastSquaresProblem(data, config.standardize)
    if lambdas is None:
        lambdas = _lambda_grid(problem.lambda_max(weights), data.n, data.p, n_lambda,
                               lambda_min_ratio)
    fits = _path(problem, lambdas, weights, config)
    return PathResult(np.asarray(lambdas, dtype=float), tuple(fits),
                      problem.null_model(config))


def fit_ls_penalized(data, penalty, config=None, steps=3):
    """Penalized least squares ``(1/2n)||y - b0 - X b||^2 + P_lam(b)``.

    Lasso and weighted lasso are solved directly; SCAD and MCP run
    ``steps`` local linear approximation steps from zero.
    """
    from .lla import run_lla

    config = config or SolverConfig()
    problem = LeastSquaresProblem(data, config.standardize)
    if penalty.folded_concave:
        return run_lla(problem, penalty, steps=steps, config=config)
    pen = penalty.lam * penalty.coordinate_weights(problem.p)
    return problem.solve(pen, config=config, lam=penalty.lam)
