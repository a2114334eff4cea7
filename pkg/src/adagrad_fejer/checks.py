"""Verdict records and tolerance lookup shared by diagnostics and the acceptance run."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass


def tolerance(name: str, default: float) -> float:
    """Tolerance for verdict ``name``; ``CHECK_TOL_<NAME>`` overrides the default."""
    key = "CHECK_TOL_" + name.upper().replace("-", "_")
    raw = os.environ.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"{key}={raw!r} is not a number") from None


@dataclass
class Verdict:
    """Outcome of one numerical check.

    ``margin`` is the worst observed slack (bound minus checked quantity, so
    negative values are violations) and ``tolerance`` the absolute violation
    allowed for floating point rounding. ``passed`` is ``None`` when the check
    could not be evaluated.
    """

    name: str
    passed: bool | None
    margin: float = math.nan
    tolerance: float = math.nan
    detail: str = ""

    @classmethod
    def from_margin(cls, name: str, margin: float, tol: float, detail: str = "") -> "Verdict":
        ok = bool(math.isfinite(margin) and margin >= -tol)
        return cls(name, ok, float(margin), float(tol), detail)

    @classmethod
    def unavailable(cls, name: str, reason: str) -> "Verdict":
        return cls(name, None, detail=reason)

    @property
    def available(self) -> bool:
        return self.passed is not None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for key in ("margin", "tolerance"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d
