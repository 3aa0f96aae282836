"""Numerical self-checks: derivative agreement, the unit-curvature
majorization, and bounds on the inverse Mills ratio and its derivatives.
"""

import math
from dataclasses import dataclass

import numpy as np

from .special import SQRT_2_OVER_PI, hazard_h, mills_g, mills_g_second_derivative
from .tobit import Dataset, OlsenParams, gradient, hessian, neg_loglik, standardize


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def random_instance(rng, n, p, censored=0.3, standardized=True):
    """Random Tobit data with roughly a ``censored`` fraction of zeros, and a point."""
    x = rng.standard_normal((n, p))
    beta = rng.normal(0.0, 1.0, p)
    ystar = x @ beta + rng.standard_normal(n)
    c = np.quantile(ystar, censored)
    y = np.maximum(ystar - c, 0.0)
    if not np.any(y > 0):
        y[np.argmax(ystar)] = 1.0
    data = Dataset(x, y, y > 0)
    if standardized:
        data, _ = standardize(data)
    theta = OlsenParams(rng.normal(0, 1), rng.normal(0, 0.7, p), rng.uniform(0.3, 2.5))
    return data, theta


def _rel_err(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.abs(b))


def gradient_check(rng, instances=100, step=1e-5):
    """Analytic gradient vs central differences of the loss, Hessian vs
    central differences of the gradient."""
    worst_g = worst_h = 0.0
    for _ in range(instances):
        n = int(rng.integers(5, 51))
        p = int(rng.integers(1, 9))
        data, theta = random_instance(rng, n, p, censored=rng.uniform(0.1, 0.7))
        v = theta.to_vector()
        fd_g = np.empty(v.size)
        fd_h = np.empty((v.size, v.size))
        for k in range(v.size):
            e = np.zeros(v.size)
            e[k] = step
            plus, minus = OlsenParams.from_vector(v + e), OlsenParams.from_vector(v - e)
            fd_g[k] = (neg_loglik(plus, data) - neg_loglik(minus, data)) / (2 * step)
            fd_h[:, k] = (gradient(plus, data) - gradient(minus, data)) / (2 * step)
        worst_g = max(worst_g, float(np.max(_rel_err(gradient(theta, data), fd_g))))
        worst_h = max(worst_h, float(np.max(_rel_err(hessian(theta, data), fd_h))))
    return [
        CheckResult("gradient vs finite differences", worst_g <= 1e-6, f"worst rel err {worst_g:.2e}"),
        CheckResult("hessian vs finite differences", worst_h <= 1e-5, f"worst rel err {worst_h:.2e}"),
    ]


def majorization_check(rng, tuples=1000, slack=1e-9):
    """``l(t + a e_j) <= l(t) + l_j'(t) a + a^2 / 2`` on standardized data."""
    worst = -math.inf
    for _ in range(tuples):
        n = int(rng.integers(5, 41))
        p = int(rng.integers(1, 7))
        data, theta = random_instance(rng, n, p, censored=rng.uniform(0.1, 0.8))
        v = theta.to_vector()
        j = int(rng.integers(0, p + 1))  # 0 is the intercept
        a = float(rng.normal(0.0, 2.0))
        base = neg_loglik(theta, data)
        deriv = gradient(theta, data)[j]
        moved = v.copy()
        moved[j] += a
        gap = neg_loglik(OlsenParams.from_vector(moved), data) - (base + deriv * a + 0.5 * a * a)
        worst = max(worst, gap)
    return [CheckResult("unit-curvature majorization", worst <= slack, f"max excess {worst:.2e}")]


def special_function_sweeps(points=100_000):
    s = np.linspace(-50.0, 50.0, points)
    h = np.asarray(hazard_h(s))  # extended precision: h(50) is ~1e-542
    h_ok = bool(np.all(h > 0) and np.all(h < 1))

    analytic = np.abs(np.asarray(mills_g_second_derivative(s), dtype=float))
    step = 1e-3
    g_plus = np.asarray(mills_g(s + step), dtype=np.longdouble)
    g_mid = np.asarray(mills_g(s), dtype=np.longdouble)
    g_minus = np.asarray(mills_g(s - step), dtype=np.longdouble)
    numeric = np.abs(np.asarray((g_plus - 2 * g_mid + g_minus) / step ** 2, dtype=float))
    g2 = max(float(analytic.max()), float(numeric.max()))

    t = np.linspace(0.0, 100.0, points)
    kes = np.asarray(mills_g(-t), dtype=float) - (t + SQRT_2_OVER_PI)
    gvals = np.asarray(mills_g(np.linspace(-400.0, 40.0, points)))
    mono_ok = bool(np.all(gvals > 0) and np.all(np.diff(gvals) <= 0))
    return [
        CheckResult("0 < h(s) < 1", h_ok,
                    f"min {np.format_float_scientific(h.min(), precision=3)}, max {float(h.max()):.6f}"),
        CheckResult("|g''(s)| < 4.3", g2 < 4.3, f"max {g2:.4f}"),
        CheckResult("g(-s) <= s + sqrt(2/pi)", bool(kes.max() <= 1e-12),
                    f"max excess {kes.max():.2e}"),
        CheckResult("g positive and nonincreasing", mono_ok, f"{points} points on [-400, 40]"),
    ]


def run_all(seed=0, quick=False):
    rng = np.random.default_rng(seed)
    results = []
    results += gradient_check(rng, instances=20 if quick else 100)
    results += majorization_check(rng, tuples=200 if quick else 1000)
    results += special_function_sweeps(20_000 if quick else 100_000)
    return results
