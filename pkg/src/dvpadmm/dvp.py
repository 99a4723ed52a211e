"""Dual variable perturbation: per-iteration differentially private ADMM.

At every round each node picks a privacy level alpha, derives the noise rate
and extra curvature from it, perturbs its dual variable with noise of density
proportional to ``exp(-zeta ||eps||)`` and minimizes the perturbed augmented
Lagrangian.  The dual recursion itself stays noise-free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .consensus import (
    NOISE_TAG,
    NodeState,
    PrivacyRecord,
    Trajectory,
    augmented_local,
    augmented_local_grad,
    iterate,
    solve_local,
)
from .dataset import NodeDataset
from .errors import DimensionMismatch, InvalidAlpha, InvalidZeta, NotNeighbors
from .objective import Hyper
from .solver import SolverCfg, minimize
from .topology import Topology, TopologySchedule


@dataclass(frozen=True)
class PrivacySetting:
    alpha: float
    alpha_hat: float  # value before the else-branch reassignment
    phi: float
    zeta: float


def curvature_ratio(n_v: int, h: Hyper, N_v: int) -> float:
    """``C2 / ((n_v/C1)(rho + 2 eta N_v))``."""
    return h.C2 / ((n_v / h.C1) * (h.rho + 2.0 * h.eta * N_v))


def compute_privacy_params(alpha: float, n_v: int, h: Hyper, N_v: int) -> PrivacySetting:
    if not (alpha > 0 and math.isfinite(alpha)):
        raise InvalidAlpha(f"alpha must be positive and finite, got {alpha}")
    if n_v < 1:
        raise ValueError("n_v must be >= 1")
    alpha_hat = alpha - 2.0 * math.log1p(curvature_ratio(n_v, h, N_v))
    if alpha_hat > 0:
        return PrivacySetting(alpha, alpha_hat, 0.0, alpha_hat)
    phi = h.C2 / ((n_v / h.C1) * math.expm1(alpha / 4.0)) - h.rho - 2.0 * h.eta * N_v
    return PrivacySetting(alpha, alpha_hat, phi, alpha / 2.0)


def sample_noise(d: int, zeta: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the density proportional to ``exp(-zeta ||eps||)`` on R^d.

    The norm of such a vector is Gamma(d, 1/zeta) distributed and its
    direction is uniform on the sphere.
    """
    if not (zeta > 0 and math.isfinite(zeta)):
        raise InvalidZeta(f"zeta must be positive and finite, got {zeta}")
    if d < 1:
        raise ValueError("d must be >= 1")
    shape = (d,) if size is None else (size, d)
    u = rng.standard_normal(shape)
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    r = rng.gamma(d, 1.0 / zeta, size=None if size is None else (size, 1))
    return r * u


def perturb_dual(lam, eps, C1: float, n_v: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if lam.shape != eps.shape:
        raise DimensionMismatch(f"dual {lam.shape} vs noise {eps.shape}")
    return lam + (C1 / (2.0 * n_v)) * eps


def private_augmented_local(f, beta, phi: float, state: NodeState, neighbor_f,
                            d: NodeDataset, h: Hyper) -> float:
    f = np.asarray(f, dtype=float)
    shifted = NodeState(state.f, np.asarray(beta, dtype=float))
    return augmented_local(f, shifted, neighbor_f, d, h) + 0.5 * phi * float(f @ f)


def private_augmented_local_grad(f, beta, phi: float, state: NodeState, neighbor_f,
                                 d: NodeDataset, h: Hyper) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    shifted = NodeState(state.f, np.asarray(beta, dtype=float))
    return augmented_local_grad(f, shifted, neighbor_f, d, h) + phi * f


def private_primal_update(state: NodeState, beta, phi: float, neighbor_f, d: NodeDataset,
                          h: Hyper, solver: SolverCfg = SolverCfg(), x0=None, info: bool = False):
    res = solve_local(state, neighbor_f, d, h, np.asarray(beta, dtype=float), phi, solver, x0)
    return (res.f, res) if info else res.f


AlphaSchedule = float | Mapping[int, float] | Callable[[int, int], float]


def _alpha_fn(alpha_schedule: AlphaSchedule) -> Callable[[int, int], float]:
    if callable(alpha_schedule):
        return alpha_schedule
    if isinstance(alpha_schedule, Mapping):
        return lambda v, t: float(alpha_schedule[v])
    a = float(alpha_schedule)
    return lambda v, t: a


def noise_rng(seed: int, node: int, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, NOISE_TAG, node, t])


def run_private(
    sched: TopologySchedule | Topology,
    data,
    h: Hyper,
    alpha_schedule: AlphaSchedule,
    T: int | None = None,
    seed: int = 0,
    solver: SolverCfg = SolverCfg(),
    noise: bool = True,
) -> Trajectory:
    """DVP-ADMM.  ``noise=False`` forces every eps to zero (debug mode)."""
    if isinstance(sched, Topology):
        sched = TopologySchedule.fixed(sched, T)
    alpha_of = _alpha_fn(alpha_schedule)

    def perturb(v: int, t: int, state: NodeState, n_v: int, N_v: int):
        ps = compute_privacy_params(alpha_of(v, t), n_v, h, N_v)
        d = state.lam.shape[0]
        eps = sample_noise(d, ps.zeta, noise_rng(seed, v, t)) if noise else np.zeros(d)
        beta = perturb_dual(state.lam, eps, h.C1, n_v)
        return beta, ps.phi, PrivacyRecord(ps.alpha, ps.alpha_hat, ps.phi, ps.zeta,
                                           float(np.linalg.norm(eps)))

    return iterate(sched, data, h, T, seed, solver, perturb)


# --- empirical privacy check ---------------------------------------------

def hamming(a: NodeDataset, b: NodeDataset) -> int:
    if a.n != b.n or a.d != b.d:
        return max(a.n, b.n)
    rows = np.any(a.X != b.X, axis=1) | (a.y != b.y)
    return int(rows.sum())


def one_round_outputs(dataset: NodeDataset, alpha: float, trials: int, rng: np.random.Generator,
                      h: Hyper, n_neighbors: int, state: NodeState, neighbor_f,
                      solver: SolverCfg) -> np.ndarray:
    """``trials`` independent draws of f_v(1) after one DVP round on ``dataset``."""
    ps = compute_privacy_params(alpha, dataset.n, h, n_neighbors)
    eps = sample_noise(dataset.d, ps.zeta, rng, size=trials)
    beta = perturb_dual(np.broadcast_to(state.lam, eps.shape), eps, h.C1, dataset.n)
    center = sum(state.f + fi for fi in neighbor_f) if n_neighbors else np.zeros(dataset.d)
    curvature = h.rho + ps.phi + 2.0 * h.eta * n_neighbors
    linear = 2.0 * beta - h.eta * center
    res = minimize(dataset.X, dataset.y, h.C1 / dataset.n, curvature, linear, state.f, solver, h.loss)
    return res.f


def ddp_ratio_check(
    dataset: NodeDataset,
    neighbor_dataset: NodeDataset,
    alpha: float,
    trials: int = 100_000,
    bins: int = 50,
    seed: int = 0,
    h: Hyper | None = None,
    n_neighbors: int = 3,
    projection=None,
    solver: SolverCfg = SolverCfg(),
) -> float:
    """Largest histogram ratio of a 1-D projection of f_v(1) under two
    datasets at Hamming distance one.

    A 1-D marginal can only reveal violations of the bound, never certify it.
    Bins have equal pooled mass; counts use add-one smoothing and the ratio is
    taken in both directions.  Starting state: f_v(0) = 0, lambda = 0 and all
    ``n_neighbors`` neighbor iterates at zero.  ``h`` defaults to
    ``C1 = n``, ``rho = 10**-2.5``, ``eta = 1``.
    """
    if hamming(dataset, neighbor_dataset) != 1:
        raise NotNeighbors("datasets must differ in exactly one sample")
    d = dataset.d
    h = h or Hyper(C1=float(dataset.n), rho=10 ** -2.5)
    state = NodeState(np.zeros(d), np.zeros(d))
    nbr_f = [np.zeros(d)] * n_neighbors
    if projection is None:
        i = int(np.flatnonzero(np.any(dataset.X != neighbor_dataset.X, axis=1)
                               | (dataset.y != neighbor_dataset.y))[0])
        u = dataset.y[i] * dataset.X[i] - neighbor_dataset.y[i] * neighbor_dataset.X[i]
        if np.linalg.norm(u) == 0:
            u = np.eye(d)[0]
    else:
        u = np.asarray(projection, dtype=float)
    u = u / np.linalg.norm(u)

    ss = np.random.SeedSequence(seed).spawn(2)
    a = one_round_outputs(dataset, alpha, trials, np.random.default_rng(ss[0]), h,
                          n_neighbors, state, nbr_f, solver) @ u
    b = one_round_outputs(neighbor_dataset, alpha, trials, np.random.default_rng(ss[1]), h,
                          n_neighbors, state, nbr_f, solver) @ u
    edges = np.quantile(np.concatenate([a, b]), np.linspace(0, 1, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    ca = np.histogram(a, edges)[0] + 1.0
    cb = np.histogram(b, edges)[0] + 1.0
    occupied = (ca + cb) > 2
    return float(np.max(np.maximum(ca / cb, cb / ca)[occupied]))
