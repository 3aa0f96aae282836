"""Lasso, weighted lasso, SCAD and MCP penalties and the LLA weight map."""

from dataclasses import dataclass

import numpy as np

FAMILIES = ("lasso", "weighted_lasso", "scad", "mcp")
DEFAULT_A = {"scad": 3.0, "mcp": 3.0}


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """Penalty family, level ``lam`` and concavity ``a`` (SCAD/MCP only).

    ``weights`` applies to ``weighted_lasso`` and multiplies ``lam``
    coordinate-wise.
    """

    family: str
    lam: float
    a: float | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.lam) or self.lam == np.inf) or self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        a = self.a
        if self.family in DEFAULT_A:
            a = DEFAULT_A[self.family] if a is None else float(a)
            if self.family == "scad" and not a > 2:
                raise ValueError(f"SCAD requires a > 2, got {a}")
            if self.family == "mcp" and not a > 1:
                raise ValueError(f"MCP requires a > 1, got {a}")
        object.__setattr__(self, "a", a)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be a finite nonnegative vector")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def folded_concave(self):
        return self.family in ("scad", "mcp")

    def coordinate_weights(self, p):
        if self.weights is None:
            return np.ones(p)
        if self.weights.size != p:
            raise ValueError(f"weights have length {self.weights.size}, expected {p}")
        return np.asarray(self.weights)


def _nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("penalty arguments must be nonnegative")
    return t


def penalty_deriv(spec, t):
    """``P'_lam(t)`` for ``t >= 0`` (right derivative at 0)."""
    t = _nonneg(t)
    lam, a = spec.lam, spec.a
    if spec.family == "scad":
        out = np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1.0))
    elif spec.family == "mcp":
        out = np.maximum(lam - t / a, 0.0)
    else:
        out = np.full_like(t, lam)
    return out[()] if out.ndim == 0 else out


def penalty_value(spec, t):
    """``P_lam(t)`` for ``t >= 0``, closed form, ``P_lam(0) = 0``."""
    t = _nonneg(t)
    lam, a = spec.lam, spec.a
    if spec.family == "scad":
        mid = (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1))
        out = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, (a + 1) * lam * lam / 2))
    elif spec.family == "mcp":
        out = np.where(t <= a * lam, lam * t - t * t / (2 * a), a * lam * lam / 2)
    else:
        out = lam * t
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def penalty_total(spec, delta):
    """Sum of coordinate penalties ``sum_j w_j P_lam(|delta_j|)``."""
    delta = np.asarray(delta, dtype=float)
    if spec.lam == 0:
        return 0.0
    vals = np.atleast_1d(penalty_value(spec, np.abs(delta)))
    return float(np.dot(spec.coordinate_weights(delta.size), vals))


def lla_weights(spec, delta):
    """Tangent weights ``w_j = P'_lam(|delta_j|)`` for the next LLA step."""
    if not spec.folded_concave:
        raise ValueError(f"LLA weights are defined for scad/mcp, not {spec.family!r}")
    return np.atleast_1d(penalty_deriv(spec, np.abs(np.asarray(delta, dtype=float))))
