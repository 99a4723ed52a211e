"""Inner minimizer for the per-node ADMM subproblem.

Both the plain and the perturbed augmented Lagrangians reduce, up to an
additive constant, to

    F(f) = w * sum_i L(y_i x_i.f) + (c/2) ||f||^2 + g.f

with ``w = C1/n``, curvature ``c`` and linear term ``g``.  ``minimize`` solves
this form for one linear term ``g`` of shape ``(d,)`` or for a batch of
shape ``(B, d)`` at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverDidNotConverge
from .objective import LOGISTIC, Loss

_ARMIJO = 1e-4


@dataclass(frozen=True)
class SolverCfg:
    method: str = "newton"  # or "gd"
    tol: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        if self.method not in ("newton", "gd"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass
class SolveResult:
    f: np.ndarray
    iterations: int
    grad_norm: float


def _value(F, X, y, w, c, g, loss):
    z = (F @ X.T) * y
    return w * loss.value(z).sum(axis=1) + 0.5 * c * np.einsum("bi,bi->b", F, F) + np.einsum("bi,bi->b", g, F)


def _grad(F, X, y, w, c, g, loss):
    z = (F @ X.T) * y
    return w * ((loss.d1(z) * y) @ X) + c * F + g, z


def minimize(
    X: np.ndarray,
    y: np.ndarray,
    w: float,
    c: float,
    g: np.ndarray,
    x0: np.ndarray,
    cfg: SolverCfg = SolverCfg(),
    loss: Loss = LOGISTIC,
) -> SolveResult:
    single = np.ndim(g) == 1
    G = np.atleast_2d(np.asarray(g, dtype=float))
    F = np.array(np.broadcast_to(np.atleast_2d(x0), G.shape), dtype=float)
    d = F.shape[1]
    eye = np.eye(d)
    step = np.ones(len(F))  # carried step for gd

    grad, z = _grad(F, X, y, w, c, G, loss)
    gnorm = np.linalg.norm(grad, axis=1)
    active = gnorm > cfg.tol
    it = 0
    while active.any():
        if it >= cfg.max_iter:
            worst = float(gnorm.max())
            raise SolverDidNotConverge(
                f"{cfg.method}: gradient norm {worst:.3e} > tol {cfg.tol:g} after {it} iterations",
                worst, it,
            )
        it += 1
        idx = np.flatnonzero(active)
        Fa, Ga, ga = F[idx], G[idx], grad[idx]
        if cfg.method == "newton":
            h = loss.d2(z[idx]) * w
            if len(idx) == 1:
                H = ((X * h[0][:, None]).T @ X)[None] + c * eye
            else:
                H = np.einsum("bn,ni,nj->bij", h, X, X) + c * eye
            p = -np.linalg.solve(H, ga[..., None])[..., 0]
            t = np.ones(len(idx))
        else:
            p = -ga
            t = np.minimum(step[idx] * 2.0, 1e6)
        f0 = _value(Fa, X, y, w, c, Ga, loss)
        slope = np.einsum("bi,bi->b", ga, p)
        # decreases below float resolution of F: estimate the change by the
        # trapezoid rule on the directional derivative instead
        flat = np.abs(slope) <= 1e-12 * np.maximum(1.0, np.abs(f0))
        done = np.zeros(len(idx), dtype=bool)
        newF = Fa.copy()
        for _ in range(80):
            cand = Fa + t[:, None] * p
            fc = _value(cand, X, y, w, c, Ga, loss)
            ok = fc <= f0 + _ARMIJO * t * slope
            if flat.any():
                gc, _ = _grad(cand[flat], X, y, w, c, Ga[flat], loss)
                s1 = np.einsum("bi,bi->b", gc, p[flat])
                ok[flat] = 0.5 * (slope[flat] + s1) <= _ARMIJO * slope[flat]
            take = ok & ~done
            newF[take] = cand[take]
            done |= ok
            if done.all():
                break
            t = np.where(done, t, 0.5 * t)
        if not done.any():
            worst = float(gnorm[idx].max())
            raise SolverDidNotConverge(
                f"{cfg.method}: line search stalled at gradient norm {worst:.3e}", worst, it
            )
        step[idx] = np.where(done, t, step[idx])
        F[idx] = newF
        grad[idx], z[idx] = _grad(newF, X, y, w, c, Ga, loss)
        gnorm[idx] = np.linalg.norm(grad[idx], axis=1)
        active = gnorm > cfg.tol
    f = F[0] if single else F
    return SolveResult(f, it, float(gnorm.max()))
