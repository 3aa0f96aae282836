"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 degenerate data, 4 non-convergence,
5 failed self-check.
"""

import argparse
import csv
import sys

import numpy as np

from . import diagnostics, simlab
from .gcd import SolverConfig, _lambda_grid, fit_weighted_lasso
from .lla import LlaConfig, fit_folded_concave
from .modelfile import ModelFile
from .penalty import DEFAULT_A, PenaltySpec
from .tobit import Dataset, DegenerateDataError, TobitError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_CHECK = 5

MODES = {"latent": "latent", "censored-mean": "censored_mean", "prob": "prob_uncensored"}


class InputError(TobitError):
    pass


class ConvergenceFailure(Exception):
    pass


# -- CSV ------------------------------------------------------------------------


def read_columns(path, wanted=None, exclude=()):
    """Parse a headed numeric CSV into ``(names, matrix)``.

    ``wanted`` selects columns by name (all others are ignored); otherwise
    every column not in ``exclude`` must be numeric.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file, a header row is required") from None
        except csv.Error as exc:
            raise InputError(f"{path}, line {reader.line_num}: {exc}") from exc
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise InputError(f"{path}, line 1: duplicate column names")
        if wanted is None:
            wanted = [h for h in header if h not in set(exclude)]
        missing = [w for w in wanted if w not in header]
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(map(repr, missing))}")
        index = [header.index(w) for w in wanted]
        rows = []
        try:
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    raise InputError(f"{path}, line {reader.line_num}: expected {len(header)} "
                                     f"fields, found {len(row)}")
                values = []
                for k, name in zip(index, wanted):
                    try:
                        values.append(float(row[k]))
                    except ValueError:
                        raise InputError(
                            f"{path}, line {reader.line_num}, column {name!r}: cannot parse "
                            f"{row[k]!r} as a number (use --exclude for non-numeric columns)"
                        ) from None
                rows.append(values)
        except csv.Error as exc:
            raise InputError(f"{path}, line {reader.line_num}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    matrix = np.array(rows, dtype=float)
    if not np.all(np.isfinite(matrix)):
        r, c = np.argwhere(~np.isfinite(matrix))[0]
        raise InputError(f"{path}: non-finite value in column {wanted[c]!r}, data row {r + 1}")
    return list(wanted), matrix


def load_dataset(args):
    exclude = [c for c in (args.exclude or "").split(",") if c]
    names, matrix = read_columns(args.csv, exclude=exclude)
    if args.response not in names:
        raise InputError(f"{args.csv}: response column {args.response!r} not found")
    j = names.index(args.response)
    predictors = names[:j] + names[j + 1:]
    if not predictors:
        raise InputError(f"{args.csv}: no predictor columns")
    x = np.delete(matrix, j, axis=1)
    y = matrix[:, j]
    try:
        data = Dataset.from_observed(x, y, args.censor_value)
    except DegenerateDataError:
        raise
    except TobitError as exc:
        raise InputError(f"{args.csv}: {exc}") from exc
    return data, predictors


def write_rows(path, header, rows):
    if path in (None, "-"):
        _write(sys.stdout, header, rows)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write(fh, header, rows)


def _write(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


# -- helpers ----------------------------------------------------------------------------


def _solver(args):
    return SolverConfig(tol=args.tol, max_cycles=args.max_cycles)


def _threads(args):
    return simlab.default_threads() if args.threads is None else max(1, args.threads)


def _check_converged(converged, args, what):
    if not converged and not args.allow_nonconverged:
        raise ConvergenceFailure(f"{what} did not converge (rerun with --allow-nonconverged "
                                 "to accept it)")


def _fit_at(data, args, lam):
    solver = _solver(args)
    if args.penalty == "lasso":
        return fit_weighted_lasso(data, lam, config=solver)
    spec = PenaltySpec(args.penalty, lam, args.a)
    return fit_folded_concave(data, spec, LlaConfig(steps=args.steps), solver)


def _method(args):
    return f"tobit_{args.penalty}"


def _a(args):
    return None if args.penalty == "lasso" else (args.a or DEFAULT_A[args.penalty])


# -- subcommands ----------------------------------------------------------------------


def cmd_fit(args):
    data, names = load_dataset(args)
    if args.cv:
        result = simlab.kfold_cv(data, _method(args), k=args.k, n_lambda=args.n_lambda,
                                 lambda_min_ratio=args.lambda_min_ratio, seed=args.seed,
                                 config=_solver(args), steps=args.steps, a=args.a,
                                 threads=_threads(args))
        fit = result.fit
    else:
        fit = _fit_at(data, args, args.lam)
    _check_converged(fit.converged, args, "fit")
    model = ModelFile.from_fit(fit, args.penalty, _a(args), data.censor_shift, names)
    model.save(args.output)
    print(f"lambda: {fit.lam!r}")
    print(f"support size: {fit.support.size}")
    print(f"objective: {fit.objective!r}")
    print(f"kkt residual: {fit.kkt_residual:.3e}")
    print(f"converged: {fit.converged}")
    return EXIT_OK


def cmd_predict(args):
    try:
        model = ModelFile.load(args.model)
    except OSError as exc:
        raise InputError(f"cannot open {args.model}: {exc.strerror}") from exc
    _, x = read_columns(args.csv, wanted=list(model.column_names))
    pred = model.predict(x, MODES[args.mode])
    write_rows(args.output, ["prediction"], ([repr(float(v))] for v in pred))
    return EXIT_OK


def _grid(data, args):
    lam_max = simlab.method_lambda_max(_method(args), data, _solver(args))
    return _lambda_grid(lam_max, data.n, data.p, args.n_lambda, args.lambda_min_ratio)


def cmd_path(args):
    data, names = load_dataset(args)
    lambdas = _grid(data, args)
    fits = simlab.method_path(_method(args), data, lambdas, _solver(args), args.steps, args.a)
    header = ["lambda", "nonzero", "objective", "kkt_residual", "cycles", "converged",
              "beta0", "sigma"] + names
    rows = ([repr(f.lam), f.support.size, repr(f.objective), repr(f.kkt_residual),
             f.cycles_used, int(f.converged), repr(f.natural.beta0), repr(f.natural.sigma)]
            + [repr(float(b)) for b in f.natural.beta] for f in fits)
    write_rows(args.output, header, rows)
    bad = sum(not f.converged for f in fits)
    if bad:
        print(f"{bad} of {len(fits)} path fits did not converge", file=sys.stderr)
    _check_converged(bad == 0, args, "path")
    return EXIT_OK


def cmd_cv(args):
    data, _ = load_dataset(args)
    result = simlab.kfold_cv(data, _method(args), k=args.k, n_lambda=args.n_lambda,
                             lambda_min_ratio=args.lambda_min_ratio, seed=args.seed,
                             config=_solver(args), steps=args.steps, a=args.a,
                             threads=_threads(args))
    write_rows(args.output, ["lambda", "cv_mse"],
               ([repr(float(l)), repr(float(c))] for l, c in zip(result.lambdas, result.curve)))
    print(f"best lambda: {result.best_lambda!r} (index {result.best_index})", file=sys.stderr)
    _check_converged(result.fit.converged, args, "refit at the selected lambda")
    return EXIT_OK


def cmd_simulate(args):
    methods = tuple(m for m in args.methods.split(",") if m)
    design = simlab.SimDesign.from_table(
        args.design, q=args.q, p=args.p, replications=args.reps, seed=args.seed,
        n_train=args.n_train, n_test=args.n_test)
    config = SolverConfig(tol=args.tol, max_cycles=args.max_cycles or simlab.SIM_SOLVER.max_cycles)
    result = simlab.run_experiment(design, methods, n_lambda=args.n_lambda, k=args.k,
                                   threads=_threads(args), predict_mode=MODES[args.mode],
                                   config=config)
    text = result.to_csv()
    if args.output in (None, "-"):
        sys.stdout.write(text)
        print(result.format_table(), file=sys.stderr)
    else:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        print(result.format_table())
    return EXIT_OK


def cmd_check(args):
    results = diagnostics.run_all(seed=args.seed, quick=args.quick)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


# -- parser ---------------------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_data_args(p):
    p.add_argument("csv", help="input CSV with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--censor-value", type=float, default=0.0,
                   help="left-censoring threshold c; responses equal to c are censored "
                        "(default 0)")
    p.add_argument("--exclude", default="", help="comma-separated columns to ignore")


def _add_penalty_args(p, with_grid=True):
    p.add_argument("--penalty", choices=("lasso", "scad", "mcp"), default="scad")
    p.add_argument("--a", type=float, default=None, help="concavity parameter (default 3)")
    p.add_argument("--steps", type=_positive_int, default=3, help="LLA steps (default 3)")
    if with_grid:
        p.add_argument("--n-lambda", type=_positive_int, default=100)
        p.add_argument("--lambda-min-ratio", type=float, default=None,
                       help="smallest lambda as a fraction of lambda_max "
                            "(default 0.01, or 0.05 when p > n)")


def _add_solver_args(p, max_cycles=10_000):
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-cycles", type=_positive_int, default=max_cycles)
    p.add_argument("--allow-nonconverged", action="store_true",
                   help="exit 0 even when a fit did not converge")


def _add_parallel_args(p):
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help=f"worker processes (default ${simlab.THREADS_ENV} or 1)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pentobit", description="Penalized Tobit regression for left-censored responses.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model and save it as JSON")
    _add_data_args(p)
    _add_penalty_args(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambda", dest="lam", type=float, help="penalty level")
    group.add_argument("--cv", action="store_true", help="choose lambda by K-fold CV")
    p.add_argument("--k", type=int, default=5, help="CV folds (default 5)")
    _add_solver_args(p)
    _add_parallel_args(p)
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict from a saved model")
    p.add_argument("model", help="model file written by 'fit'")
    p.add_argument("csv", help="CSV containing the model's predictor columns")
    p.add_argument("--mode", choices=tuple(MODES), default="censored-mean")
    p.add_argument("-o", "--output", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("path", help="fit a warm-started lambda path")
    _add_data_args(p)
    _add_penalty_args(p)
    _add_solver_args(p)
    p.add_argument("-o", "--output", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("cv", help="K-fold cross-validation curve")
    _add_data_args(p)
    _add_penalty_args(p)
    p.add_argument("--k", type=int, default=5, help="folds (default 5)")
    _add_solver_args(p)
    _add_parallel_args(p)
    p.add_argument("-o", "--output", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="replicate a simulation design")
    p.add_argument("--design", choices=sorted(simlab.TABLE_DESIGNS), default="table1")
    p.add_argument("--q", type=float, default=0.125, help="censored fraction")
    p.add_argument("--p", type=_positive_int, default=50)
    p.add_argument("--reps", type=_positive_int, default=20)
    p.add_argument("--n-train", type=_positive_int, default=100)
    p.add_argument("--n-test", type=_positive_int, default=5000)
    p.add_argument("--methods", default=",".join(simlab.DEFAULT_METHODS))
    p.add_argument("--n-lambda", type=_positive_int, default=100)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--mode", choices=("censored-mean", "latent"), default="censored-mean")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-cycles", type=_positive_int, default=None,
                   help=f"per-fit cycle cap (default {simlab.SIM_SOLVER.max_cycles})")
    _add_parallel_args(p)
    p.add_argument("-o", "--output", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run the numerical self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller sample sizes")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (TobitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
