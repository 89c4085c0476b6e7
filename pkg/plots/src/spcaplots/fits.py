"""Curve fits for scaling figures: polynomials and power laws.

Power-law fits run in log-log space by least squares; points with
non-positive coordinates are excluded and counted.  R-squared is computed in
the space the fit was performed in, clamped into [0, 1]; a zero-variance
target is reported as degenerate rather than +-inf.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FitResult:
    kind: str  # 'poly' or 'power'
    coefficients: dict
    r2: float
    degenerate: bool = False
    excluded: int = 0
    space: str = "linear"

    def describe(self):
        coeffs = ", ".join(f"{k}={v:.6g}" for k, v in self.coefficients.items())
        r2 = "degenerate" if self.degenerate else f"{self.r2:.6f}"
        line = f"fit {self.kind} [{self.space} space]: {coeffs}; R^2 = {r2}"
        if self.excluded:
            line += f"; excluded {self.excluded} non-positive point(s)"
        return line


def _r_squared(y, yhat):
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return (1.0, False) if ss_res == 0.0 else (0.0, True)
    return (min(1.0, max(0.0, 1.0 - ss_res / ss_tot)), False)


def poly_fit(x, y, degree):
    """Least-squares polynomial of the given degree (2 or 3)."""
    if degree not in (2, 3):
        raise ValueError(f"polynomial degree must be 2 or 3, got {degree}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < degree + 1:
        return FitResult("poly", {"degree": degree}, 0.0, degenerate=True)
    coeffs = np.polyfit(x, y, degree)
    r2, degenerate = _r_squared(y, np.polyval(coeffs, x))
    named = {f"c{degree - i}": float(c) for i, c in enumerate(coeffs)}
    named["degree"] = degree
    return FitResult("poly", named, r2, degenerate=degenerate)


def power_fit(x, y, exponent=None):
    """``y = a * x^b`` by least squares on log-log coordinates.

    ``exponent`` pins ``b`` (the paper uses -1 and -2); ``None`` fits it.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    excluded = int((~mask).sum())
    x, y = x[mask], y[mask]
    if x.size < 2:
        return FitResult("power", {"a": 0.0, "b": 0.0}, 0.0, degenerate=True,
                         excluded=excluded, space="log-log")
    lx, ly = np.log(x), np.log(y)
    if exponent is not None:
        b = float(exponent)
        a = float(np.exp(np.mean(ly - b * lx)))
    else:
        b, loga = np.polyfit(lx, ly, 1)
        a, b = float(np.exp(loga)), float(b)
    r2, degenerate = _r_squared(ly, np.log(a) + b * lx)
    return FitResult("power", {"a": a, "b": b}, r2, degenerate=degenerate,
                     excluded=excluded, space="log-log")


def fit_from_name(name, x, y):
    """Dispatch a fit spec string: poly2, poly3, power-1, power-2, powerfree."""
    if name in ("none", "", None):
        return None
    if name in ("poly2", "poly3"):
        return poly_fit(x, y, int(name[-1]))
    if name in ("power-1", "power-2"):
        return power_fit(x, y, exponent=float(name[5:]))
    if name == "powerfree":
        return power_fit(x, y, exponent=None)
    raise ValueError(f"unknown fit spec {name!r}")
