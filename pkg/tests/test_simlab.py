import numpy as np
import pytest

from pentobit import Dataset, NaturalParams, fit_path, predict
from pentobit.gcd import TobitProblem
from pentobit.simlab import (
    DEFAULT_METHODS,
    METRIC_NAMES,
    SimDesign,
    StratificationError,
    build_covariance,
    cross_validate,
    evaluate,
    gen_dataset,
    kfold_cv,
    replication_rng,
    run_experiment,
    stratified_folds,
)


def small_tobit(seed, n=12, p=2, censored=0.25):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    ystar = x @ np.linspace(1.0, 0.3, p) + 0.5 * rng.standard_normal(n)
    y = np.maximum(ystar - np.quantile(ystar, censored), 0)
    return Dataset(x, y, y > 0)


# -- designs and data ------------------------------------------------------------------


def test_covariance_examples():
    assert np.array_equal(build_covariance("independent", 0.0, 3), np.eye(3))
    assert np.allclose(build_covariance("cs", 0.5, 3), [[1, .5, .5], [.5, 1, .5], [.5, .5, 1]])
    ar = build_covariance("ar1", 0.8, 3)
    assert ar[0, 1] == pytest.approx(0.8) and ar[0, 2] == pytest.approx(0.64)


def test_covariance_errors():
    with pytest.raises(ValueError):
        build_covariance("cs", 1.0, 3)
    with pytest.raises(ValueError):
        build_covariance("cs", -0.6, 3)
    with pytest.raises(ValueError):
        build_covariance("toeplitz", 0.1, 3)


def test_design_defaults_and_validation():
    design = SimDesign.from_table("table4")
    assert design.covariance == "ar1" and design.rho == 0.5
    assert design.beta[:5].tolist() == [5.0, 1.0, 0.5, -2.0, 0.1]
    assert np.all(design.beta[5:] == 0) and design.beta.size == 50
    with pytest.raises(ValueError):
        SimDesign(q=1.0)
    with pytest.raises(ValueError):
        SimDesign(p=3)
    with pytest.raises(ValueError):
        SimDesign.from_table("table9")


def test_censoring_fraction_and_threshold():
    design = SimDesign(q=0.5, n_train=100, n_test=900, seed=3)
    sim = gen_dataset(design, 0)
    pooled = np.concatenate([sim.train.d, sim.test.d])
    assert abs((~pooled).mean() - 0.5) <= 1 / pooled.size
    assert sim.train.censor_shift == sim.c_q == sim.test.censor_shift


def test_independent_design_sample_correlation():
    sim = gen_dataset(SimDesign(n_train=100, n_test=4900, p=8, beta=[1.0], seed=4), 0)
    x = np.vstack([sim.train.x, sim.test.x])
    corr = np.corrcoef(x, rowvar=False)
    assert np.max(np.abs(corr - np.eye(8))) < 0.08


def test_replications_are_reproducible_and_distinct():
    design = SimDesign(n_test=50, seed=5)
    a, b = gen_dataset(design, 1), gen_dataset(design, 1)
    assert np.array_equal(a.train.x, b.train.x)
    assert not np.array_equal(a.train.x, gen_dataset(design, 2).train.x)
    assert replication_rng(5, 1, 1).random() != replication_rng(5, 1, 0).random()


# -- folds and cross-validation -------------------------------------------------------------


def test_stratified_folds_balance():
    d = np.array([True] * 17 + [False] * 8)
    folds = stratified_folds(d, 5, np.random.default_rng(0))
    for label in range(5):
        assert d[folds == label].sum() in (3, 4)
        assert (~d[folds == label]).sum() in (1, 2)
    assert np.bincount(folds).tolist() == [5] * 5


def test_stratified_folds_rejects_bad_k():
    with pytest.raises(ValueError):
        stratified_folds(np.ones(4, bool), 5, np.random.default_rng(0))


def test_leave_one_out_matches_brute_force():
    data = small_tobit(6)
    problem = TobitProblem(data)
    lambdas = np.geomspace(problem.lambda_max(), 0.2 * problem.lambda_max(), 4)
    cv = kfold_cv(data, "tobit_lasso", lambdas=lambdas, folds=np.arange(12))
    brute = np.zeros(4)
    for i in range(12):
        keep = np.arange(12) != i
        path = fit_path(data.subset(keep), lambdas=lambdas)
        for j, fit in enumerate(path.fits):
            pred = predict(fit.natural, data.x[i:i + 1], "censored_mean", data.censor_shift)
            brute[j] += (data.y[i] + data.censor_shift - pred[0]) ** 2
    assert np.allclose(cv.curve, brute / 12, rtol=1e-10)
    assert cv.best_index == int(np.argmin(brute))


def test_row_duplication_leaves_curve_unchanged():
    data = small_tobit(7, n=30, p=3)
    twice = Dataset(np.vstack([data.x, data.x]), np.concatenate([data.y, data.y]),
                    np.concatenate([data.d, data.d]))
    folds = stratified_folds(data.d, 3, np.random.default_rng(1))
    problem = TobitProblem(data)
    lambdas = np.geomspace(problem.lambda_max(), 0.1 * problem.lambda_max(), 5)
    a = kfold_cv(data, "tobit_lasso", lambdas=lambdas, folds=folds)
    b = kfold_cv(twice, "tobit_lasso", lambdas=lambdas, folds=np.concatenate([folds, folds]))
    assert np.allclose(a.curve, b.curve, rtol=1e-6)


def test_ties_prefer_larger_lambda():
    data = small_tobit(8, n=20)
    problem = TobitProblem(data)
    top = problem.lambda_max() * 1.0001
    cv = kfold_cv(data, "tobit_lasso", lambdas=[1e3 * top, 1e2 * top, 10 * top], k=4)
    assert cv.best_index == 0 and np.all(cv.fit.theta.delta == 0)


def test_cv_fold_without_uncensored_rows():
    x = np.arange(6.0)[:, None]
    y = np.array([0, 0, 0, 0, 1.0, 2.0])
    data = Dataset(x, y, y > 0)
    with pytest.raises(StratificationError):
        kfold_cv(data, "tobit_lasso", folds=np.array([0, 0, 0, 0, 1, 1]), n_lambda=3)


def test_cv_shares_folds_across_methods():
    data = small_tobit(9, n=40, p=3)
    out = cross_validate(data, ("tobit_lasso", "tobit_scad", "ls_lasso"), k=4, n_lambda=8)
    assert set(out) == {"tobit_lasso", "tobit_scad", "ls_lasso"}
    assert np.array_equal(out["tobit_lasso"].folds, out["ls_lasso"].folds)
    assert np.array_equal(out["tobit_lasso"].lambdas, out["tobit_scad"].lambdas)
    with pytest.raises(ValueError):
        cross_validate(data, ("tobit_ridge",))


def test_cv_threads_do_not_change_result():
    data = small_tobit(10, n=40, p=3)
    a = kfold_cv(data, "tobit_scad", k=4, n_lambda=8, threads=1)
    b = kfold_cv(data, "tobit_scad", k=4, n_lambda=8, threads=2)
    assert np.array_equal(a.curve, b.curve) and a.best_index == b.best_index


# -- evaluation ---------------------------------------------------------------------------------


def test_evaluate_perfect_estimate():
    truth = NaturalParams(0.0, np.array([1.0, 0.0, -2.0]), 1.0)
    test = small_tobit(11, n=20, p=3)
    m = evaluate(truth, test, truth)
    assert (m.l1, m.l2, m.fp, m.fn) == (0.0, 0.0, 0, 0)


def test_evaluate_error_counts():
    truth = NaturalParams(0.0, np.array([1.0, 0.0, -2.0]), 1.0)
    est = NaturalParams(0.0, np.array([0.0, 0.5, -2.0]), 1.0)
    m = evaluate(est, small_tobit(11, n=20, p=3), truth)
    assert m.l1 == pytest.approx(1.5) and m.l2 == pytest.approx(np.sqrt(1.25))
    assert (m.fp, m.fn) == (1, 1)


def test_evaluate_mse_against_observed_response():
    test = small_tobit(12, n=20, p=2)
    est = NaturalParams(0.3, np.array([0.2, 0.1]), 1.0)
    m = evaluate(est, test, est, linear=True)
    pred = 0.3 + test.x @ np.array([0.2, 0.1])
    assert m.mse == pytest.approx(np.mean((test.y + test.censor_shift - pred) ** 2))


# -- replication driver -------------------------------------------------------------------------


def tiny_design(**kw):
    base = dict(n_train=60, n_test=200, p=8, replications=2, seed=11)
    base.update(kw)
    return SimDesign(**base)


def test_experiment_summary_and_csv():
    result = run_experiment(tiny_design(), n_lambda=8, k=3)
    summary = result.summary()
    assert tuple(summary) == DEFAULT_METHODS
    assert all(tuple(rows) == METRIC_NAMES for rows in summary.values())
    assert summary["ols"]["fp"] == (3.0, 0.0)  # all 8 columns selected, 5 true
    lines = result.to_csv().splitlines()
    assert lines[0] == "method,metric,mean,se" and len(lines) == 1 + 6 * 5
    assert "tobit_scad" in result.format_table()


def test_experiment_threads_are_byte_identical():
    design = tiny_design(replications=3)
    a = run_experiment(design, ("tobit_lasso", "ols_oracle"), n_lambda=6, k=3, threads=1)
    b = run_experiment(design, ("tobit_lasso", "ols_oracle"), n_lambda=6, k=3, threads=2)
    assert a.to_csv() == b.to_csv()


def test_infinite_lambda_gives_null_model_error():
    design = tiny_design(replications=1)
    result = run_experiment(design, ("tobit_lasso", "ls_lasso"), fixed_lambda=np.inf)
    sim = gen_dataset(design, 0)
    observed = sim.test.y + sim.c_q
    problem = TobitProblem(sim.train)
    delta0, gamma = problem.null_model(problem_config())
    null = NaturalParams(delta0 / gamma, np.zeros(8), 1 / gamma)
    tobit_null = np.mean((observed - predict(null, sim.test.x, "censored_mean", sim.c_q)) ** 2)
    ls_null = np.mean((observed - (sim.train.y.mean() + sim.c_q)) ** 2)
    rep = result.per_rep[0]
    assert rep["tobit_lasso"].mse == pytest.approx(tobit_null, rel=1e-6)
    assert rep["ls_lasso"].mse == pytest.approx(ls_null, rel=1e-12)
    assert rep["tobit_lasso"].fp == 0 and rep["tobit_lasso"].fn == 5


def problem_config():
    from pentobit.simlab import SIM_SOLVER
    return SIM_SOLVER


def test_ols_needs_more_rows_than_columns():
    with pytest.raises(ValueError, match="p < n_train"):
        run_experiment(tiny_design(n_train=20, p=30), ("ols",))
    with pytest.raises(ValueError):
        run_experiment(tiny_design(), ("tobit_ridge",))
