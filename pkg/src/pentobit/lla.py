"""Local linear approximation for SCAD/MCP-penalized fits, and the oracle fit.

Each LLA step replaces the folded concave penalty by its tangent at the
current iterate, which is a weighted lasso solved by GCD.  Started from
zero the first step is exactly the lasso.
"""

from dataclasses import dataclass, replace

import numpy as np

from .gcd import SolverConfig, TobitProblem, gradient
from .penalty import PenaltySpec, lla_weights, penalty_total
from .tobit import DegenerateDataError, OlsenParams, hessian, neg_loglik


@dataclass(frozen=True)
class LlaConfig:
    """``init`` is ``"zero"``, ``"lasso"`` or an explicit solver-scale ``OlsenParams``."""

    steps: int = 3
    init: object = "zero"
    lambda_lasso: float | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("LLA needs at least one step")
        if not (isinstance(self.init, OlsenParams) or self.init in ("zero", "lasso")):
            raise ValueError(f"unknown LLA initialization {self.init!r}")


def concave_objective(problem, spec, theta):
    plain = PenaltySpec(spec.family, spec.lam, spec.a)
    return problem.loss(theta) + penalty_total(plain, problem.coef(theta))


def run_lla(problem, spec, steps=3, config=None, init=None, first=None):
    """LLA on a prepared problem.

    ``init`` (solver-scale ``OlsenParams``) defaults to the zero vector.
    ``first`` may supply an already-computed first-step fit, which must
    have been solved with the weights implied by ``init``.
    """
    if not spec.folded_concave:
        raise ValueError(f"LLA needs a scad or mcp penalty, got {spec.family!r}")
    config = config or SolverConfig()
    start = np.zeros(problem.p) if init is None else problem.coef(init)
    weights = lla_weights(spec, start)
    warm = init
    history = []
    for step in range(steps):
        if step == 0 and first is not None:
            fit = first
        else:
            fit = problem.solve(weights, init=warm, config=config, lam=spec.lam)
        fit = replace(fit, objective=concave_objective(problem, spec, fit.theta))
        history.append(fit)
        warm = fit.theta
        weights = lla_weights(spec, problem.coef(fit.theta))
    final = history[-1]
    return replace(
        final,
        converged=all(h.converged for h in history),
        history=tuple(history),
        supports=tuple(tuple(int(j) for j in np.flatnonzero(problem.coef(h.theta))) for h in history),
    )


def fit_folded_concave(data, penalty, config=None, solver=None):
    """SCAD/MCP-penalized Tobit fit by ``config.steps`` LLA steps."""
    config = config or LlaConfig()
    solver = solver or SolverConfig()
    problem = TobitProblem(data, solver.standardize)
    init = config.init
    if isinstance(init, str) and init == "zero":
        init = None
    elif isinstance(init, str) and init == "lasso":
        lam = penalty.lam if config.lambda_lasso is None else config.lambda_lasso
        init = problem.solve(np.full(problem.p, lam), config=solver, lam=lam).theta
    return run_lla(problem, penalty, steps=config.steps, config=solver, init=init)


def lla_path(problem, family, lambdas, a=None, steps=3, config=None, lasso_fits=None,
             stop_unconverged=False):
    """Zero-initialized LLA at each lambda of a decreasing grid.

    The first step at each lambda is the lasso, warm-started along the grid
    (or taken from ``lasso_fits``, which may be shorter than the grid);
    later steps warm-start from the step before.  With ``stop_unconverged``
    the path ends before the first lambda whose LLA fit did not converge.
    """
    config = config or SolverConfig()
    lambdas = np.asarray(lambdas, dtype=float)
    fits = []
    warm = None
    for k, lam in enumerate(lambdas):
        spec = PenaltySpec(family, lam, a)
        if lasso_fits is not None:
            if k >= len(lasso_fits):
                break
            first = lasso_fits[k]
        else:
            first = problem.solve(np.full(problem.p, lam), init=warm, config=config, lam=lam)
        warm = first.theta
        fit = run_lla(problem, spec, steps=steps, config=config, first=first)
        if stop_unconverged and not fit.converged:
            break
        fits.append(fit)
    return fits


def fit_oracle(data, support, config=None, gtol=1e-12, max_newton=50):
    """Unpenalized Tobit MLE with slopes outside ``support`` fixed at zero.

    GCD gets close, then damped Newton steps on the free coordinates
    ``(delta0, delta_support, gamma)`` drive their gradient to ~``gtol``.
    """
    config = config or SolverConfig()
    problem = TobitProblem(data, config.standardize)
    support = np.unique(np.asarray(support, dtype=int))
    if support.size and (support.min() < 0 or support.max() >= problem.p):
        raise ValueError("support indices out of range")
    pen = np.full(problem.p, np.inf)
    pen[support] = 0.0
    fit = problem.solve(pen, config=config, lam=0.0)

    sdata = problem.data
    free = np.concatenate([[0], 1 + support, [problem.p + 1]])
    v = fit.theta.to_vector()

    def loss_at(vec):
        return neg_loglik(OlsenParams.from_vector(vec), sdata)

    for _ in range(max_newton):
        theta = OlsenParams.from_vector(v)
        g = gradient(theta, sdata)[free]
        if np.max(np.abs(g)) <= gtol:
            break
        h = hessian(theta, sdata)[np.ix_(free, free)]
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateDataError("restricted Hessian is singular") from exc
        f0 = loss_at(v)
        t = 1.0
        accepted = False
        while t > 1e-12:
            cand = v.copy()
            cand[free] -= t * step
            if cand[-1] > 0:
                g_new = gradient(OlsenParams.from_vector(cand), sdata)[free]
                if loss_at(cand) <= f0 - 1e-4 * t * float(g @ step) or \
                        np.max(np.abs(g_new)) < np.max(np.abs(g)):
                    accepted = True
                    break
            t /= 2.0
        if not accepted:
            break
        v = cand

    theta = OlsenParams.from_vector(v)
    resid = float(np.max(np.abs(gradient(theta, sdata)[free])))
    return replace(
        fit, theta=theta, natural=problem.natural(theta), objective=problem.loss(theta),
        kkt_residual=resid, converged=resid <= 1e-8, supports=(tuple(int(j) for j in support),))
