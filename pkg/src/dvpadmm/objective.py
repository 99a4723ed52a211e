"""Logistic loss, ridge regularizer, local/centralized objectives, prediction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .dataset import NodeDataset
from .errors import DimensionMismatch, EmptyDataset

_TINY = np.nextafter(0.0, 1.0)


def logistic_loss(z):
    """log(1 + exp(-z)), stable for any magnitude of z."""
    return np.logaddexp(0.0, -np.asarray(z, dtype=float))


def logistic_loss_d1(z):
    return -expit(-np.asarray(z, dtype=float))


def logistic_loss_d2(z):
    # s(1-s) with s <= 1/2 keeps 1-s exact, so the product never rounds above 1/4;
    # floored so underflow never reports zero curvature
    s = expit(-np.abs(np.asarray(z, dtype=float)))
    return np.maximum(s * (1.0 - s), _TINY)


@dataclass(frozen=True)
class Loss:
    """Margin loss ``L(y f.x)`` with its first two derivatives."""

    value: Callable
    d1: Callable
    d2: Callable
    name: str = "custom"


LOGISTIC = Loss(logistic_loss, logistic_loss_d1, logistic_loss_d2, "logistic")


def regularizer(f) -> float:
    f = np.asarray(f, dtype=float)
    return 0.5 * float(f @ f)


def regularizer_grad(f) -> np.ndarray:
    return np.array(f, dtype=float)


@dataclass(frozen=True)
class Hyper:
    """C1: loss weight, rho: regularizer weight, eta: ADMM step,
    C2: bound on the loss curvature (1/4 for logistic)."""

    C1: float
    rho: float
    eta: float = 1.0
    C2: float = 0.25
    loss: Loss = LOGISTIC

    def __post_init__(self):
        for name in ("C1", "rho", "eta", "C2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def check_sizes(self, sizes: Sequence[int]) -> None:
        """Enforce ``C1 <= n_v`` for every participating node."""
        small = [n for n in sizes if n < self.C1]
        if small:
            raise ValueError(f"C1={self.C1} exceeds node dataset size {min(small)}")


def _check(f, d: NodeDataset) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if d.n == 0:
        raise EmptyDataset("dataset has no samples")
    if f.shape[-1] != d.d:
        raise DimensionMismatch(f"classifier has dim {f.shape[-1]}, data has dim {d.d}")
    return f


def margins(f, d: NodeDataset) -> np.ndarray:
    return d.y * (d.X @ f)


def empirical_risk(f, d: NodeDataset, C1: float, loss: Loss = LOGISTIC) -> float:
    """Weighted loss term ``(C1/n) sum_i L(y_i f.x_i)`` without regularizer."""
    f = _check(f, d)
    return float(C1 / d.n * np.sum(loss.value(margins(f, d))))


def empirical_risk_grad(f, d: NodeDataset, C1: float, loss: Loss = LOGISTIC) -> np.ndarray:
    f = _check(f, d)
    return (C1 / d.n) * (d.X.T @ (loss.d1(margins(f, d)) * d.y))


def local_objective(f, d: NodeDataset, h: Hyper) -> float:
    return empirical_risk(f, d, h.C1, h.loss) + h.rho * regularizer(f)


def local_objective_grad(f, d: NodeDataset, h: Hyper) -> np.ndarray:
    return empirical_risk_grad(f, d, h.C1, h.loss) + h.rho * regularizer_grad(f)


def centralized_objective(f, all_data: Sequence[NodeDataset], h: Hyper, kappa: float | None = None) -> float:
    """Pooled objective ``sum_v (C1/n_v) sum_i L + kappa R(f)``.

    ``kappa`` defaults to ``rho / P``.  Note that the consensus iterations
    converge to the minimizer with ``kappa = P * rho`` (see
    :func:`consensus_kappa`).
    """
    if kappa is None:
        kappa = h.rho / len(all_data)
    return sum(empirical_risk(f, d, h.C1, h.loss) for d in all_data) + kappa * regularizer(f)


def centralized_objective_grad(f, all_data: Sequence[NodeDataset], h: Hyper, kappa: float | None = None):
    if kappa is None:
        kappa = h.rho / len(all_data)
    g = sum(empirical_risk_grad(f, d, h.C1, h.loss) for d in all_data)
    return g + kappa * regularizer_grad(f)


def consensus_kappa(h: Hyper, P: int) -> float:
    """Regularizer weight of the pooled problem whose minimizer is the
    consensus fixed point, i.e. ``sum_v Z_v(f)`` with every ``f_v = f``."""
    return P * h.rho


def predict(f, x):
    """Label +1 (attack) when ``f.x >= 0``, else -1."""
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != f.shape[-1]:
        raise DimensionMismatch(f"classifier has dim {f.shape[-1]}, input has dim {x.shape[-1]}")
    s = x @ f
    out = np.where(s >= 0, 1, -1)
    return int(out) if out.ndim == 0 else out
