import numpy as np
import pytest

from oracles import ols
from pentobit import (
    Dataset,
    LlaConfig,
    OlsenParams,
    PenaltySpec,
    SolverConfig,
    fit_folded_concave,
    fit_oracle,
    fit_weighted_lasso,
    gradient,
    lla_path,
    run_lla,
    standardize,
)
from pentobit.gcd import TobitProblem
from pentobit.lla import concave_objective


def strong_data(seed, n=200, p=8, censored=0.25, scale=3.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:3] = np.array([1.0, -1.0, 0.8]) * scale
    ystar = x @ beta + rng.standard_normal(n)
    y = np.maximum(ystar - np.quantile(ystar, censored), 0)
    return Dataset(x, y, y > 0)


def test_first_step_is_the_lasso():
    data = strong_data(1)
    scad = fit_folded_concave(data, PenaltySpec("scad", 0.1), LlaConfig(steps=1))
    lasso = fit_weighted_lasso(data, 0.1)
    assert np.array_equal(scad.theta.to_vector(), lasso.theta.to_vector())


def test_history_and_supports_are_recorded():
    data = strong_data(2)
    fit = fit_folded_concave(data, PenaltySpec("mcp", 0.1), LlaConfig(steps=3))
    assert len(fit.history) == 3 and len(fit.supports) == 3
    assert fit.supports[-1] == tuple(int(j) for j in np.flatnonzero(fit.theta.delta))
    assert fit.history[-1] is not fit.history[0]


def test_concave_objective_does_not_increase():
    for seed in range(5):
        data = strong_data(seed, scale=1.0)
        spec = PenaltySpec("scad", 0.08)
        fit = fit_folded_concave(data, spec, LlaConfig(steps=4))
        objs = [h.objective for h in fit.history]
        assert np.all(np.diff(objs) <= 1e-8)


def test_strong_signal_reaches_oracle_fixed_point():
    data = strong_data(3)
    spec = PenaltySpec("scad", 0.15)
    fit = fit_folded_concave(data, spec)
    assert fit.supports[-1] == (0, 1, 2)
    oracle = fit_oracle(data, [0, 1, 2])
    assert np.allclose(fit.theta.to_vector(), oracle.theta.to_vector(), atol=1e-6)


def test_oracle_off_support_is_exactly_zero_and_stationary():
    data = strong_data(4)
    fit = fit_oracle(data, [1, 4])
    mask = np.ones(8, bool)
    mask[[1, 4]] = False
    assert np.all(fit.theta.delta[mask] == 0)
    sdata, _ = standardize(data)
    g = gradient(fit.theta, sdata)
    free = np.concatenate([[0], 1 + np.array([1, 4]), [9]])
    assert np.max(np.abs(g[free])) <= 1e-8 and fit.converged


def test_oracle_without_censoring_is_ols():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((80, 3))
    y = x @ np.array([1.0, 2.0, -1.0]) + 10 + rng.standard_normal(80)
    data = Dataset(x, y, np.ones(80, bool))
    fit = fit_oracle(data, [0, 1, 2])
    b0, b, sigma = ols(x, y)
    assert fit.natural.beta0 == pytest.approx(b0, abs=1e-8)
    assert np.allclose(fit.natural.beta, b, atol=1e-8)
    assert fit.natural.sigma == pytest.approx(sigma, abs=1e-8)


def test_oracle_support_validation():
    with pytest.raises(ValueError):
        fit_oracle(strong_data(6), [8])


def test_lasso_initialization():
    data = strong_data(7)
    fit = fit_folded_concave(data, PenaltySpec("scad", 0.15), LlaConfig(init="lasso"))
    assert fit.converged and fit.supports[-1] == (0, 1, 2)


def test_explicit_initialization():
    data = strong_data(8)
    problem = TobitProblem(data)
    start = fit_folded_concave(data, PenaltySpec("scad", 0.15)).theta
    fit = run_lla(problem, PenaltySpec("scad", 0.15), steps=1, init=start)
    assert np.allclose(fit.theta.to_vector(), start.to_vector(), atol=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        LlaConfig(steps=0)
    with pytest.raises(ValueError):
        LlaConfig(init="ridge")
    assert isinstance(LlaConfig(init=OlsenParams(0.0, np.zeros(2), 1.0)).init, OlsenParams)


def test_lla_requires_folded_concave_penalty():
    with pytest.raises(ValueError):
        run_lla(TobitProblem(strong_data(9)), PenaltySpec("lasso", 0.1))


def test_inner_failure_marks_outer_fit():
    data = strong_data(10)
    fit = fit_folded_concave(data, PenaltySpec("scad", 0.01), solver=SolverConfig(max_cycles=1))
    assert not fit.converged


def test_lla_path_structure():
    data = strong_data(11, n=120, p=5)
    problem = TobitProblem(data)
    lambdas = np.geomspace(problem.lambda_max(), 0.05 * problem.lambda_max(), 6)
    fits = lla_path(problem, "mcp", lambdas, a=3.0)
    assert len(fits) == 6
    assert np.all(fits[0].theta.delta == 0)
    spec = PenaltySpec("mcp", lambdas[3], 3.0)
    assert fits[3].objective == pytest.approx(concave_objective(problem, spec, fits[3].theta))
    short = lla_path(problem, "mcp", lambdas, a=3.0, lasso_fits=[f.history[0] for f in fits[:2]])
    assert len(short) == 2
