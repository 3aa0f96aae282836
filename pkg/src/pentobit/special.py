"""Normal-tail special functions used by the Tobit loss.

``mills_g(s) = phi(s) / Phi(s)`` and ``hazard_h(s) = g(s) * (s + g(s))``.

Both are evaluated through the scaled complementary error function on the
heavy (negative) tail, so nothing overflows or cancels for very negative
arguments.  On the light (positive) tail the ratio drops below the smallest
double near s = 37.5, so the public functions return ``np.longdouble``;
the solver kernels use their own float64 copies, where that tail is
irrelevant.
"""

import math

import numpy as np
from scipy import special

SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# below this, s + g(s) is taken from its asymptotic series
_EXCESS_SERIES_CUTOFF = -30.0
_EXCESS_SERIES_TERMS = 12


def _excess_series(t):
    # 1 - t R(t) for the Mills ratio R, t >= 30: sum_k (-1)^(k+1) (2k-1)!! / t^(2k)
    inv_t2 = 1.0 / (t * t)
    term = inv_t2
    total = np.zeros_like(t)
    for k in range(1, _EXCESS_SERIES_TERMS + 1):
        total += term if k % 2 else -term
        term = term * (2 * k + 1) * inv_t2
    return total


def mills_g64(s):
    """float64 inverse Mills ratio; underflows to 0 past s ~ 38.5."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    neg = s < 0
    out[neg] = SQRT_2_OVER_PI / special.erfcx(-s[neg] / SQRT2)
    pos = ~neg
    sp = s[pos]
    out[pos] = INV_SQRT_2PI * np.exp(-0.5 * sp * sp) / special.ndtr(sp)
    return out


def mills_excess64(s):
    """``s + g(s)`` without cancellation on the far negative tail."""
    s = np.asarray(s, dtype=float)
    g = mills_g64(s)
    out = s + g
    far = s < _EXCESS_SERIES_CUTOFF
    if np.any(far):
        t = -s[far]
        mills_ratio = 1.0 / g[far]
        out[far] = _excess_series(t) / mills_ratio
    return out


def hazard_h64(s):
    s = np.asarray(s, dtype=float)
    return mills_g64(s) * mills_excess64(s)


def _as_output(values, scalar):
    return values[0] if scalar else values


def mills_g(s):
    """Inverse Mills ratio ``phi(s) / Phi(s)`` in extended precision.

    Strictly positive and nonincreasing on the whole real line, with
    relative error near machine precision for s in [-400, 40] and beyond.
    """
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = mills_g64(s).astype(np.longdouble)
    pos = s > 0
    if np.any(pos):
        sp = s[pos].astype(np.longdouble)
        dens = np.exp(-sp * sp / 2) / np.sqrt(np.longdouble(2) * np.pi)
        out[pos] = dens / special.ndtr(s[pos])
    return _as_output(out, scalar)


def hazard_h(s):
    """``h(s) = g(s) (s + g(s))``, the curvature weight of a censored row.

    Lies strictly inside (0, 1); it is also ``-g'(s)``.
    """
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    g = mills_g(s)
    excess = mills_excess64(s).astype(np.longdouble)
    pos = s > 0
    excess[pos] = s[pos].astype(np.longdouble) + g[pos]
    return _as_output(g * excess, scalar)


def mills_g_second_derivative(s):
    """Analytic ``g''(s) = h(s) (s + g(s)) - g(s) (1 - h(s))``."""
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    g = mills_g(s)
    h = hazard_h(s)
    excess = np.where(s > 0, s + g, mills_excess64(s).astype(np.longdouble))
    return _as_output(h * excess - g * (1 - h), scalar)


def log_ndtr(s):
    """log Phi(s), evaluated in log space."""
    return special.log_ndtr(s)
