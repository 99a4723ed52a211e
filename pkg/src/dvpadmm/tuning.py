"""Choosing the privacy level: fit the risk-vs-alpha curve, then trade it off
against a privacy utility.

The program solved by :func:`optimize_alpha` is

    min_alpha  U_sec(alpha) - U_pri(alpha)
    s.t.       0 < alpha <= 1,   0 <= U_sec(alpha) <= U1

where ``U_sec`` is the fitted risk curve ``c5 exp(-c6 alpha) + c7``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import least_squares

from .errors import AlphaOutOfDomain, DegenerateFit, InfeasibleConstraint

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class UtilityCurve:
    c5: float
    c6: float
    c7: float
    residual_norm: float = 0.0

    def __post_init__(self):
        if self.c5 < 0 or self.c6 < 0:
            raise ValueError("risk curve must be non-increasing (c5, c6 >= 0)")

    def __call__(self, alpha):
        return self.c5 * np.exp(-self.c6 * np.asarray(alpha, dtype=float)) + self.c7

    def slope(self, alpha):
        return -self.c5 * self.c6 * np.exp(-self.c6 * np.asarray(alpha, dtype=float))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PrivacyUtility:
    """``cv1 * ln(cv2 / (cv3 alpha + cv4 alpha^2))`` on ``0 < alpha <= 1``."""

    cv1: float = 20.0
    cv2: float = 6.0
    cv3: float = 5.0
    cv4: float = 1.0

    def __post_init__(self):
        if min(self.cv1, self.cv2, self.cv3, self.cv4) <= 0:
            raise ValueError("privacy utility constants must be positive")

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=float)
        return self.cv1 * np.log(self.cv2 / (self.cv3 * a + self.cv4 * a * a))

    def slope(self, alpha):
        a = np.asarray(alpha, dtype=float)
        return -self.cv1 * (self.cv3 + 2 * self.cv4 * a) / (self.cv3 * a + self.cv4 * a * a)


def privacy_utility(alpha: float, p: PrivacyUtility) -> float:
    if not 0 < alpha <= 1:
        raise AlphaOutOfDomain(f"alpha={alpha} outside (0, 1]")
    return float(p(alpha))


def fit_security_curve(points: Iterable[tuple[float, float]]) -> UtilityCurve:
    """Fit ``risk ~ c5 exp(-c6 alpha) + c7`` with ``c7`` pinned to the
    smallest observed risk.

    A weighted log-linear fit of the positive residuals seeds a bounded
    nonlinear least-squares refinement on the raw residuals.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    a, r = pts[:, 0], pts[:, 1]
    if len(np.unique(a)) < 3:
        raise DegenerateFit("need at least 3 distinct alpha values")
    c7 = float(r.min())
    excess = r - c7
    pos = excess > 0
    if pos.sum() < 2 or len(np.unique(a[pos])) < 2:
        raise DegenerateFit("risk shows no decaying component above its minimum")

    # weights ~ excess: log errors scale like 1/excess
    w = excess[pos]
    A = np.column_stack([np.ones(pos.sum()), -a[pos]]) * w[:, None]
    coef, *_ = np.linalg.lstsq(A, np.log(excess[pos]) * w, rcond=None)
    c5_0, c6_0 = math.exp(coef[0]), max(float(coef[1]), 1e-8)

    def resid(p):
        return p[0] * np.exp(-p[1] * a) + c7 - r

    sol = least_squares(resid, [c5_0, c6_0], bounds=([0, 0], [np.inf, np.inf]),
                        x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10_000)
    c5, c6 = (float(v) for v in sol.x)
    if c5 <= 0:
        raise DegenerateFit("fit collapsed to a constant curve")
    return UtilityCurve(c5, c6, c7, float(np.linalg.norm(sol.fun)))


def _golden(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    c, d = hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo)
    fc, fd = fn(c), fn(d)
    while hi - lo > tol * max(1.0, abs(lo)):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = fn(d)
    return c if fc <= fd else d


def _boundary(feasible: Callable[[float], bool], inside: float, outside: float) -> float:
    """Bisect for the last feasible point between an inside and outside point."""
    for _ in range(200):
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside):
            break
        if feasible(mid):
            inside = mid
        else:
            outside = mid
    return inside


def optimize_alpha(
    sec: Callable,
    pri: Callable,
    U1: float,
    alpha_min: float = 1e-4,
    n_scan: int = 4001,
) -> float:
    """Minimizer of ``sec - pri`` over the feasible part of ``[alpha_min, 1]``.

    The privacy utility diverges at alpha -> 0, so the open end of the
    domain is replaced by ``alpha_min``.  Each feasible run of a coarse scan
    is trimmed to its exact constraint boundaries; every scan-local minimum
    is refined by golden-section search.  Ties go to the smaller alpha.
    """
    def Z(x):
        return float(sec(x) - pri(x))

    def feasible(x):
        s = float(sec(x))
        return 0.0 <= s <= U1

    grid = np.linspace(alpha_min, 1.0, n_scan)
    s = np.asarray(sec(grid), dtype=float)
    ok = (s >= 0) & (s <= U1)
    if not ok.any():
        # constraint satisfied only between scan points is treated as infeasible
        raise InfeasibleConstraint(f"no alpha in [{alpha_min}, 1] has 0 <= U_sec <= {U1}")
    z = np.asarray(sec(grid) - pri(grid), dtype=float)

    candidates: list[float] = []
    idx = np.flatnonzero(ok)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        i0, i1 = int(run[0]), int(run[-1])
        lo = grid[i0] if i0 == 0 else _boundary(feasible, grid[i0], grid[i0 - 1])
        hi = grid[i1] if i1 == len(grid) - 1 else _boundary(feasible, grid[i1], grid[i1 + 1])
        candidates += [lo, hi]
        zr = z[i0:i1 + 1]
        for k in range(len(zr)):
            left = zr[k - 1] if k > 0 else np.inf
            right = zr[k + 1] if k < len(zr) - 1 else np.inf
            if zr[k] <= left and zr[k] <= right:
                a = max(lo, grid[i0 + max(k - 1, 0)])
                b = min(hi, grid[i0 + min(k + 1, len(zr) - 1)])
                candidates.append(_golden(Z, a, b) if b > a else a)
    candidates = sorted(c for c in candidates if feasible(c))
    vals = [Z(c) for c in candidates]
    best = min(vals)
    a = next(c for c, v in zip(candidates, vals) if v <= best)

    # on a plateau of equal values slide down to its smallest alpha
    def attains(x):
        return feasible(x) and Z(x) <= best

    j = int(np.searchsorted(grid, a)) - 1
    while j >= 0 and attains(grid[j]):
        j -= 1
    if j < 0:
        return float(grid[0]) if attains(grid[0]) else a
    left = grid[j + 1] if grid[j + 1] < a else a
    return _boundary(attains, left, grid[j])


@dataclass(frozen=True)
class TuningResult:
    curve: UtilityCurve
    privacy: PrivacyUtility
    U1: float
    alpha_star: float
    objective: float

    def to_dict(self) -> dict:
        return {
            "c5": self.curve.c5, "c6": self.curve.c6, "c7": self.curve.c7,
            "residual_norm": self.curve.residual_norm,
            "cv": [self.privacy.cv1, self.privacy.cv2, self.privacy.cv3, self.privacy.cv4],
            "U1": self.U1, "alpha_star": self.alpha_star, "objective": self.objective,
        }


def tune(points, privacy: PrivacyUtility = PrivacyUtility(), U1: float | None = None,
         alpha_min: float = 1e-4) -> TuningResult:
    """Fit the risk curve and solve for alpha.  ``U1`` defaults to the curve's
    value at ``alpha_min`` (constraint inactive)."""
    curve = fit_security_curve(points)
    if U1 is None:
        U1 = float(curve(alpha_min))
    a = optimize_alpha(curve, privacy, U1, alpha_min)
    return TuningResult(curve, privacy, U1, a, float(curve(a) - privacy(a)))
