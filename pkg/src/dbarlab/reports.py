"""Report records and their JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scaled_field import ScaledComplex, sc_add

SCHEMA_VERSION = 1


def _jsonable(x):
    if isinstance(x, ScaledComplex):
        return x.to_json()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if hasattr(x, "to_json"):
        return x.to_json()
    return x


def to_json(obj, **kw) -> str:
    return json.dumps(_jsonable(obj), **kw)


@dataclass
class MarginReport:
    """``margin = lhs - sum(rhs_terms)`` together with its error budget.

    The margin only has a meaningful sign when its magnitude exceeds
    ``error_budget``; :attr:`holds` is ``margin >= -error_budget``.
    """

    lemma: str
    tau: float
    resolution: int
    lhs: ScaledComplex
    rhs_terms: list
    margin: ScaledComplex
    error_budget: ScaledComplex
    hypothesis_status: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        s = sc_add(self.margin, self.error_budget)
        return s.mantissa.real >= 0

    @property
    def rhs_total(self) -> ScaledComplex:
        out = ScaledComplex(0j, 0)
        for _, v in self.rhs_terms:
            out = sc_add(out, v)
        return out

    def to_json(self) -> dict:
        return {
            "lemma": self.lemma,
            "tau": self.tau,
            "resolution": self.resolution,
            "lhs": self.lhs.to_json(),
            "rhs_terms": [{"label": k, "value": v.to_json()} for k, v in self.rhs_terms],
            "margin": self.margin.to_json(),
            "error_budget": self.error_budget.to_json(),
            "holds": self.holds,
            "hypothesis_status": _jsonable(self.hypothesis_status),
            "extra": _jsonable(self.extra),
        }


@dataclass
class RatioReport:
    """Per-annulus measurements of a constructed map."""

    kind: str
    n: int
    resolution: int
    sup_ratio: float
    c_n: float
    fd_budget: float
    values: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "resolution": self.resolution,
             "sup_ratio": self.sup_ratio, "C_n": self.c_n, "fd_budget": self.fd_budget}
        d.update(_jsonable(self.values))
        return d
