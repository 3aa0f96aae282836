"""Simulation laboratory: synthetic censored designs, K-fold CV and the
replication driver that compares Tobit and least-squares fits.
"""

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gcd import LeastSquaresProblem, SolverConfig, TobitProblem, _lambda_grid, _path
from .lla import lla_path
from .tobit import DegenerateDataError, Dataset, NaturalParams, predict

DEFAULT_BETA = (5.0, 1.0, 0.5, -2.0, 0.1)

# name -> (covariance kind, rho)
TABLE_DESIGNS = {
    "table1": ("independent", 0.0),
    "table2": ("cs", 0.5),
    "table3": ("cs", 0.8),
    "table4": ("ar1", 0.5),
    "table5": ("ar1", 0.8),
}

# method -> (loss, folded concave family, default a)
METHODS = {
    "tobit_lasso": ("tobit", None, None),
    "tobit_scad": ("tobit", "scad", 3.0),
    "tobit_mcp": ("tobit", "mcp", 3.0),
    "ls_lasso": ("ls", None, None),
    "ls_scad": ("ls", "scad", 3.7),
}
BASELINES = ("ols_oracle", "ols")
DEFAULT_METHODS = ("ls_lasso", "ls_scad", "tobit_lasso", "tobit_scad", "ols_oracle", "ols")
METRIC_NAMES = ("mse", "l2", "l1", "fp", "fn")

THREADS_ENV = "PENTOBIT_THREADS"

# Replication runs cap cycles lower than the library default: fits needing
# more are deep in the near-saturated end of the path, which CV truncates.
SIM_SOLVER = SolverConfig(max_cycles=3000)


class StratificationError(DegenerateDataError):
    pass


@dataclass(frozen=True, eq=False)
class SimDesign:
    n_train: int = 100
    n_test: int = 5000
    p: int = 50
    covariance: str = "independent"
    rho: float = 0.0
    q: float = 0.125
    beta0: float = 3.0
    beta: np.ndarray | None = None
    sigma: float = 1.0
    replications: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError(f"censored fraction q must be in (0, 1), got {self.q}")
        beta = np.zeros(self.p)
        given = np.asarray(DEFAULT_BETA if self.beta is None else self.beta, dtype=float)
        if given.size > self.p:
            raise ValueError(f"beta has {given.size} entries but p = {self.p}")
        beta[:given.size] = given
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.replications < 1 or self.n_train < 2 or self.n_test < 1:
            raise ValueError("replications, n_train and n_test must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        build_covariance(self.covariance, self.rho, self.p)

    @classmethod
    def from_table(cls, name, **kwargs):
        try:
            kind, rho = TABLE_DESIGNS[name]
        except KeyError:
            raise ValueError(f"unknown design {name!r}; expected one of {sorted(TABLE_DESIGNS)}")
        return cls(covariance=kind, rho=rho, **kwargs)

    @property
    def truth(self):
        return NaturalParams(self.beta0, self.beta, self.sigma)


@dataclass(frozen=True, eq=False)
class Metrics:
    mse: float
    l1: float
    l2: float
    fp: int
    fn: int

    def as_dict(self):
        return {"mse": self.mse, "l2": self.l2, "l1": self.l1, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True, eq=False)
class SimData:
    train: Dataset
    test: Dataset
    truth: NaturalParams
    c_q: float


def build_covariance(kind, rho, p):
    """Identity, compound symmetry ``cs(rho)`` or ``ar1(rho)`` correlation matrix."""
    if kind == "independent":
        return np.eye(p)
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    if kind == "cs":
        if p > 1 and not rho > -1.0 / (p - 1):
            raise ValueError(f"cs({rho}) is not positive definite for p = {p}")
        sigma = np.full((p, p), float(rho))
        np.fill_diagonal(sigma, 1.0)
        return sigma
    if kind == "ar1":
        idx = np.arange(p)
        return float(rho) ** np.abs(idx[:, None] - idx[None, :])
    raise ValueError(f"unknown covariance kind {kind!r}")


def replication_rng(seed, rep_index, stream=0):
    # counter-based: each (seed, replication, stream) gets its own generator
    return np.random.default_rng([int(seed), int(rep_index), int(stream)])


def gen_dataset(design, rep_index):
    """Draw train and test sets censored at the pooled q-quantile of y*."""
    rng = replication_rng(design.seed, rep_index)
    chol = np.linalg.cholesky(build_covariance(design.covariance, design.rho, design.p))
    total = design.n_train + design.n_test
    x = rng.standard_normal((total, design.p)) @ chol.T
    ystar = design.beta0 + x @ design.beta + design.sigma * rng.standard_normal(total)
    c_q = float(np.quantile(ystar, design.q))
    y = np.maximum(ystar, c_q)
    train = Dataset.from_observed(x[:design.n_train], y[:design.n_train], c_q)
    test = Dataset.from_observed(x[design.n_train:], y[design.n_train:], c_q)
    return SimData(train, test, design.truth, c_q)


# -- fitting by method name ------------------------------------------------------------


def _problem(method, data, config):
    loss = METHODS[method][0]
    cls = TobitProblem if loss == "tobit" else LeastSquaresProblem
    return cls(data, config.standardize)


def method_lambda_max(method, data, config=None):
    config = config or SolverConfig()
    return _problem(method, data, config).lambda_max()


def method_paths(data, methods, lambdas, config=None, steps=3, a=None, stop_unconverged=False):
    """``{method: fits}`` along decreasing grids.

    ``lambdas`` is one grid or a ``{loss: grid}`` dict.  Methods with the
    same loss share one lasso path, which is also their first LLA step.
    With ``stop_unconverged`` each path ends before its first unconverged
    fit, so paths may be shorter than the grid.
    """
    config = config or SolverConfig()
    by_loss = {}
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}")
        by_loss.setdefault(METHODS[method][0], []).append(method)
    out = {}
    for loss, group in by_loss.items():
        grid = lambdas[loss] if isinstance(lambdas, dict) else lambdas
        problem = _problem(group[0], data, config)
        lasso_fits = _path(problem, grid, None, config, stop_unconverged)
        for method in group:
            _, family, default_a = METHODS[method]
            if family is None:
                out[method] = lasso_fits
            else:
                out[method] = lla_path(problem, family, grid, a=default_a if a is None else a,
                                       steps=steps, config=config, lasso_fits=lasso_fits,
                                       stop_unconverged=stop_unconverged)
    return out


def method_path(method, data, lambdas, config=None, steps=3, a=None, stop_unconverged=False):
    """Fits of a named method along a decreasing lambda grid."""
    return method_paths(data, (method,), lambdas, config, steps, a, stop_unconverged)[method]


def predict_fit(fit, x, mode="censored_mean", censor_shift=0.0):
    """Predictions on the raw response scale; least-squares fits are linear."""
    if fit.loss == "ls":
        mode = "latent"
    return predict(fit.natural, x, mode, censor_shift)


def stratified_folds(d, k, rng):
    """Fold labels 0..k-1 balancing censored and uncensored rows separately."""
    d = np.asarray(d, dtype=bool)
    if not 2 <= k <= d.size:
        raise ValueError(f"need 2 <= k <= n, got k = {k}, n = {d.size}")
    folds = np.empty(d.size, dtype=int)
    offset = 0
    for group in (np.flatnonzero(d), np.flatnonzero(~d)):
        order = rng.permutation(group)
        folds[order] = (offset + np.arange(order.size)) % k
        offset += order.size
    return folds


@dataclass(frozen=True, eq=False)
class CVResult:
    best_lambda: float
    best_index: int
    lambdas: np.ndarray
    curve: np.ndarray
    fit: object
    folds: np.ndarray = field(repr=False, default=None)


def _score_fold(job):
    data, held, methods, grids, config, steps, a, stop_unconverged, predict_mode = job
    paths = method_paths(data.subset(~held), methods, grids, config, steps, a, stop_unconverged)
    observed = data.y[held] + data.censor_shift
    x_held = data.x[held]
    out = {}
    for method, fits in paths.items():
        err = np.zeros(grids[METHODS[method][0]].size)
        for i, fit in enumerate(fits):
            pred = predict_fit(fit, x_held, predict_mode, data.censor_shift)
            err[i] = float(np.sum((observed - pred) ** 2))
        out[method] = (err, len(fits))
    return out


def cross_validate(data, methods, k=5, lambdas=None, n_lambda=100, lambda_min_ratio=None,
                   folds=None, seed=0, config=None, predict_mode="censored_mean", steps=3,
                   a=None, stop_unconverged=True, threads=None):
    """K-fold CV of several methods on shared folds; returns ``{method: CVResult}``.

    The score is held-out prediction MSE of the censored response.  Each
    loss gets one lambda grid from the full data, shared by every fold.
    Ties go to the larger lambda.  ``folds`` may fix the fold labels.
    With ``stop_unconverged`` a fold path ends at its first unconverged fit
    (near-saturated fits at tiny lambda) and lambdas not reached by every
    fold score ``inf``.  ``threads > 1`` scores folds in worker processes.
    """
    config = config or SolverConfig()
    methods = tuple(methods)
    grids = {}
    for method in methods:
        loss = METHODS[method][0] if method in METHODS else None
        if loss is None:
            raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}")
        if loss in grids:
            continue
        if lambdas is not None:
            grids[loss] = np.asarray(lambdas, dtype=float)
        else:
            lam_max = method_lambda_max(method, data, config)
            grids[loss] = _lambda_grid(lam_max, data.n, data.p, n_lambda, lambda_min_ratio)
    if folds is None:
        folds = stratified_folds(data.d, k, np.random.default_rng(seed))
    folds = np.asarray(folds)
    if folds.shape != (data.n,):
        raise ValueError(f"folds must have one label per row ({data.n})")
    jobs = []
    for label in np.unique(folds):
        held = folds == label
        if not data.d[~held].any():
            raise StratificationError(f"fold {label}: training part has no uncensored rows")
        jobs.append((data, held, methods, grids, config, steps, a, stop_unconverged, predict_mode))
    threads = 1 if threads is None else max(1, int(threads))
    if threads == 1:
        scored = [_score_fold(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            scored = list(pool.map(_score_fold, jobs))
    sq_err = {m: np.zeros(grids[METHODS[m][0]].size) for m in methods}
    reached = {m: grids[METHODS[m][0]].size for m in methods}
    for fold in scored:  # ordered reduction, independent of threads
        for method, (err, length) in fold.items():
            sq_err[method] += err
            reached[method] = min(reached[method], length)
    out = {}
    for method in methods:
        grid = grids[METHODS[method][0]]
        if reached[method] == 0:
            raise DegenerateDataError(f"{method}: no lambda converged in every fold")
        curve = sq_err[method] / data.n
        curve[reached[method]:] = np.inf
        # equal up to rounding counts as a tie; ties go to the larger lambda
        low = curve.min()
        best = int(np.flatnonzero(curve <= low + 1e-12 * abs(low))[0])
        full = method_path(method, data, grid[:best + 1], config, steps, a)
        out[method] = CVResult(float(grid[best]), best, grid, curve, full[-1], folds)
    return out


def kfold_cv(data, method, k=5, lambdas=None, n_lambda=100, lambda_min_ratio=None,
             folds=None, seed=0, config=None, predict_mode="censored_mean", steps=3, a=None,
             stop_unconverged=True, threads=None):
    """Single-method :func:`cross_validate`."""
    return cross_validate(data, (method,), k, lambdas, n_lambda, lambda_min_ratio, folds, seed,
                          config, predict_mode, steps, a, stop_unconverged, threads)[method]


# -- evaluation ---------------------------------------------------------------------------


def evaluate(fit, test, truth, selection=None, mode="censored_mean", linear=False):
    """Test MSE against the censored response plus estimation/selection errors.

    ``fit`` is a :class:`NaturalParams` on the raw x scale.  ``selection``
    defaults to the nonzero slopes; pass ``linear=True`` for least-squares
    predictions.
    """
    observed = test.y + test.censor_shift
    pred = predict(fit, test.x, "latent" if linear else mode, test.censor_shift)
    mse = float(np.mean((observed - pred) ** 2))
    diff = fit.beta - truth.beta
    true_support = set(np.flatnonzero(truth.beta).tolist())
    if selection is None:
        selection = np.flatnonzero(fit.beta)
    selected = set(int(j) for j in selection)
    return Metrics(mse, float(np.sum(np.abs(diff))), float(np.sqrt(np.dot(diff, diff))),
                   len(selected - true_support), len(true_support - selected))


def _ols(train, columns):
    x = np.column_stack([np.ones(train.n), train.x[:, columns]])
    coef, *_ = np.linalg.lstsq(x, train.y, rcond=None)
    beta = np.zeros(train.p)
    beta[columns] = coef[1:]
    resid = train.y - x @ coef
    sigma = max(float(np.sqrt(np.mean(resid ** 2))), 1e-300)
    return NaturalParams(coef[0], beta, sigma)


def _replicate(job):
    design, rep, methods, n_lambda, k, predict_mode, config, fixed_lambda = job
    sim = gen_dataset(design, rep)
    penalized = [m for m in methods if m in METHODS]
    fits = {}
    if penalized and fixed_lambda is not None:
        paths = method_paths(sim.train, penalized, np.array([fixed_lambda]), config)
        fits = {m: path[0] for m, path in paths.items()}
    elif penalized:
        folds = stratified_folds(sim.train.d, k, replication_rng(design.seed, rep, 1))
        cv = cross_validate(sim.train, penalized, folds=folds, n_lambda=n_lambda, config=config,
                            predict_mode=predict_mode)
        fits = {m: r.fit for m, r in cv.items()}
    out = {}
    for method in methods:
        if method in BASELINES:
            cols = np.flatnonzero(design.beta) if method == "ols_oracle" else np.arange(design.p)
            out[method] = evaluate(_ols(sim.train, cols), sim.test, sim.truth, selection=cols,
                                   linear=True)
        else:
            fit = fits[method]
            out[method] = evaluate(fit.natural, sim.test, sim.truth, mode=predict_mode,
                                   linear=fit.loss == "ls")
    return out


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    design: SimDesign
    methods: tuple
    per_rep: tuple  # one {method: Metrics} per replication

    def summary(self):
        """``{method: {metric: (mean, se)}}`` with se = sd / sqrt(reps)."""
        table = {}
        for method in self.methods:
            rows = {}
            for metric in METRIC_NAMES:
                vals = np.array([getattr(r[method], metric) for r in self.per_rep], dtype=float)
                se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else math.nan
                rows[metric] = (float(np.mean(vals)), se)
            table[method] = rows
        return table

    def to_csv(self):
        buf = io.StringIO()
        buf.write("method,metric,mean,se\n")
        for method, rows in self.summary().items():
            for metric, (mean, se) in rows.items():
                buf.write(f"{method},{metric},{mean!r},{se!r}\n")
        return buf.getvalue()

    def format_table(self):
        summary = self.summary()
        head = f"{'method':<12}" + "".join(f"{m:>16}" for m in METRIC_NAMES)
        lines = [head, "-" * len(head)]
        for method, rows in summary.items():
            cells = []
            for metric in METRIC_NAMES:
                mean, se = rows[metric]
                cells.append(f"{'-':>16}" if math.isnan(mean) else f"{f'{mean:.3g}({se:.2g})':>16}")
            lines.append(f"{method:<12}" + "".join(cells))
        return "\n".join(lines)


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(design, methods=DEFAULT_METHODS, n_lambda=100, k=5, threads=None,
                   predict_mode="censored_mean", config=None, fixed_lambda=None):
    """Replicate ``design`` and collect per-method metrics.

    Penalized methods are tuned by ``k``-fold CV unless ``fixed_lambda``
    is given.  Replications are independent and seeded from
    ``(design.seed, rep)``, so the result does not depend on ``threads``.
    """
    methods = tuple(methods)
    for method in methods:
        if method not in METHODS and method not in BASELINES:
            raise ValueError(f"unknown method {method!r}")
        if method in BASELINES and design.p + 1 > design.n_train:
            raise ValueError(f"{method} needs p < n_train (p = {design.p}, n = {design.n_train})")
    config = config or SIM_SOLVER
    threads = default_threads() if threads is None else max(1, int(threads))
    jobs = [(design, rep, methods, n_lambda, k, predict_mode, config, fixed_lambda)
            for rep in range(design.replications)]
    if threads == 1:
        per_rep = [_replicate(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(_replicate, jobs))
    return ExperimentResult(design, methods, tuple(per_rep))
