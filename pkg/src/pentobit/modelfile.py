"""Self-describing JSON persistence for fitted models.

Floats are written with ``repr`` precision, so a file read back and written
again is byte-identical and reloaded coefficients are exact.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .tobit import NaturalParams, TobitError, predict

SCHEMA_VERSION = 1


class ModelFileError(TobitError):
    pass


def _num(value):
    # JSON has no inf/nan; store them as strings
    value = float(value)
    if math.isfinite(value):
        return value
    return repr(value)


def _unnum(value):
    return float(value)


@dataclass(frozen=True, eq=False)
class ModelFile:
    family: str
    lam: float
    a: float | None
    natural: NaturalParams
    censor_shift: float
    column_names: tuple
    means: tuple | None = None
    scales: tuple | None = None
    objective: float = math.nan
    kkt_residual: float = math.nan
    cycles: int = 0
    converged: bool = True
    loss: str = "tobit"

    def __post_init__(self):
        if len(self.column_names) != self.natural.beta.size:
            raise ModelFileError(
                f"{len(self.column_names)} column names for {self.natural.beta.size} coefficients")
        object.__setattr__(self, "column_names", tuple(str(c) for c in self.column_names))

    @classmethod
    def from_fit(cls, fit, family, a, censor_shift, column_names):
        std = fit.standardization
        return cls(
            family=family, lam=fit.lam, a=a, natural=fit.natural, censor_shift=censor_shift,
            column_names=tuple(column_names),
            means=None if std is None else tuple(float(v) for v in std.means),
            scales=None if std is None else tuple(float(v) for v in std.scales),
            objective=fit.objective, kkt_residual=fit.kkt_residual, cycles=fit.cycles_used,
            converged=fit.converged, loss=fit.loss)

    def predict(self, x, mode="censored_mean"):
        if self.loss == "ls":
            mode = "latent"
        return predict(self.natural, x, mode, self.censor_shift)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "loss": self.loss,
            "family": self.family,
            "lambda": _num(self.lam),
            "a": None if self.a is None else _num(self.a),
            "beta0": _num(self.natural.beta0),
            "beta": [_num(b) for b in self.natural.beta],
            "sigma": _num(self.natural.sigma),
            "censor_shift": _num(self.censor_shift),
            "column_names": list(self.column_names),
            "standardization": None if self.means is None else {
                "means": [_num(v) for v in self.means],
                "scales": [_num(v) for v in self.scales],
            },
            "diagnostics": {
                "objective": _num(self.objective),
                "kkt_residual": _num(self.kkt_residual),
                "cycles": int(self.cycles),
                "converged": bool(self.converged),
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc):
        try:
            version = doc["schema_version"]
            if version != SCHEMA_VERSION:
                raise ModelFileError(f"unsupported schema_version {version!r}")
            std = doc["standardization"]
            diag = doc["diagnostics"]
            return cls(
                family=doc["family"],
                lam=_unnum(doc["lambda"]),
                a=None if doc["a"] is None else _unnum(doc["a"]),
                natural=NaturalParams(_unnum(doc["beta0"]),
                                      np.array([_unnum(b) for b in doc["beta"]]),
                                      _unnum(doc["sigma"])),
                censor_shift=_unnum(doc["censor_shift"]),
                column_names=tuple(doc["column_names"]),
                means=None if std is None else tuple(_unnum(v) for v in std["means"]),
                scales=None if std is None else tuple(_unnum(v) for v in std["scales"]),
                objective=_unnum(diag["objective"]),
                kkt_residual=_unnum(diag["kkt_residual"]),
                cycles=int(diag["cycles"]),
                converged=bool(diag["converged"]),
                loss=doc.get("loss", "tobit"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelFileError):
                raise
            raise ModelFileError(f"malformed model file: {exc!r}") from exc

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"model file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ModelFileError("model file must hold a JSON object")
        return cls.from_dict(doc)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
