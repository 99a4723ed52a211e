"""Non-private distributed ERM by consensus ADMM.

Each round: every node minimizes its augmented Lagrangian against the
neighbors' previous iterates, all nodes broadcast, then every node takes a
dual ascent step.  The DVP variant in :mod:`dvpadmm.dvp` reuses the same
round structure through the ``perturb`` hook of :func:`iterate`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import NodeDataset
from .errors import DimensionMismatch, UnknownNode
from .metrics import consensus_residual
from .objective import Hyper, empirical_risk, local_objective, local_objective_grad
from .solver import SolveResult, SolverCfg, minimize
from .topology import Topology, TopologySchedule, topology_at

INIT_TAG = 1
NOISE_TAG = 2
INIT_SCALE = 0.01


@dataclass
class NodeState:
    f: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.f.shape != self.lam.shape:
            raise DimensionMismatch("primal and dual dimensions differ")

    @classmethod
    def fresh(cls, seed: int, node: int, t: int, d: int) -> "NodeState":
        """Seeded uniform f in [-0.01, 0.01]^d and zero dual."""
        rng = np.random.default_rng([seed, INIT_TAG, node, t])
        return cls(rng.uniform(-INIT_SCALE, INIT_SCALE, d), np.zeros(d))


@dataclass
class PrivacyRecord:
    alpha: float
    alpha_hat: float
    phi: float
    zeta: float
    noise_norm: float


@dataclass
class Trajectory:
    """Per-iteration node states; ``snapshots[t][v] = (f_v(t), lam_v(t))``."""

    snapshots: list[dict[int, tuple[np.ndarray, np.ndarray]]] = field(default_factory=list)
    topologies: list[Topology] = field(default_factory=list)
    privacy: list[dict[int, PrivacyRecord]] = field(default_factory=list)
    inner_iterations: list[dict[int, int]] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.snapshots) - 1

    def final_f(self) -> dict[int, np.ndarray]:
        return {v: f for v, (f, _) in self.snapshots[-1].items()}

    def f_at(self, t: int) -> dict[int, np.ndarray]:
        return {v: f for v, (f, _) in self.snapshots[t].items()}

    def topology_of_snapshot(self, t: int) -> Topology:
        """Graph the snapshot at ``t`` was produced on (the first phase for t=0)."""
        return self.topologies[max(t - 1, 0)]

    def residuals(self) -> list[float]:
        out = []
        for t in range(len(self.snapshots)):
            topo = self.topology_of_snapshot(t)
            snap = self.f_at(t)
            out.append(consensus_residual({v: snap[v] for v in topo.node_ids if v in snap}, topo,
                                          strict=False))
        return out

    def risk_trace(self, data: Mapping[int, NodeDataset], C1: float) -> list[dict[int, float]]:
        return [{v: empirical_risk(f, data[v], C1) for v, (f, _) in snap.items()}
                for snap in self.snapshots]

    def to_csv(self, path: str | Path, data, h: Hyper) -> None:
        """Rows (iter, node, empirical_risk, consensus_residual) plus the
        privacy columns (alpha, phi, zeta, noise_norm) when present."""
        data = as_node_map(data)
        res = self.residuals()
        private = bool(self.privacy)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["iter", "node", "empirical_risk", "consensus_residual"]
            if private:
                head += ["alpha", "phi", "zeta", "noise_norm"]
            w.writerow(head)
            for t, snap in enumerate(self.snapshots):
                for v in sorted(snap):
                    row = [t, v, repr(empirical_risk(snap[v][0], data[v], h.C1, h.loss)), repr(res[t])]
                    if private:
                        rec = self.privacy[t - 1].get(v) if t > 0 else None
                        row += ([repr(rec.alpha), repr(rec.phi), repr(rec.zeta), repr(rec.noise_norm)]
                                if rec else ["", "", "", ""])
                    w.writerow(row)


def as_node_map(data) -> dict[int, NodeDataset]:
    if isinstance(data, Mapping):
        return dict(data)
    return {i: d for i, d in enumerate(data)}


# --- per-node pieces -----------------------------------------------------

def _penalty_center_sum(state: NodeState, neighbor_f: Sequence[np.ndarray]) -> np.ndarray:
    """sum_i (f_v(t) + f_i(t)), i.e. twice the sum of the penalty centers."""
    acc = np.zeros_like(state.f)
    for fi in neighbor_f:
        acc = acc + (state.f + fi)
    return acc


def augmented_local(f, state: NodeState, neighbor_f, d: NodeDataset, h: Hyper) -> float:
    f = np.asarray(f, dtype=float)
    pen = sum(float(np.sum((f - 0.5 * (state.f + fi)) ** 2)) for fi in neighbor_f)
    return local_objective(f, d, h) + 2.0 * float(state.lam @ f) + h.eta * pen


def augmented_local_grad(f, state: NodeState, neighbor_f, d: NodeDataset, h: Hyper) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    g = local_objective_grad(f, d, h) + 2.0 * state.lam
    for fi in neighbor_f:
        g = g + 2.0 * h.eta * (f - 0.5 * (state.f + fi))
    return g


def solve_local(
    state: NodeState,
    neighbor_f: Sequence[np.ndarray],
    d: NodeDataset,
    h: Hyper,
    beta: np.ndarray,
    phi: float,
    solver: SolverCfg,
    x0: np.ndarray | None = None,
) -> SolveResult:
    """Minimize ``Z_v + (phi/2)||f||^2 + 2 beta.f + eta sum_i ||f - m_i||^2``."""
    if d.d != state.f.shape[0]:
        raise DimensionMismatch(f"state dim {state.f.shape[0]} vs data dim {d.d}")
    curvature = h.rho + phi + 2.0 * h.eta * len(neighbor_f)
    linear = 2.0 * beta - h.eta * _penalty_center_sum(state, neighbor_f)
    start = state.f if x0 is None else x0
    return minimize(d.X, d.y, h.C1 / d.n, curvature, linear, start, solver, h.loss)


def primal_update(state: NodeState, neighbor_f, d: NodeDataset, h: Hyper,
                  solver: SolverCfg = SolverCfg(), x0=None, info: bool = False):
    """Minimizer of the augmented Lagrangian, warm-started at ``state.f``."""
    res = solve_local(state, neighbor_f, d, h, state.lam, 0.0, solver, x0)
    return (res.f, res) if info else res.f


def dual_update(state: NodeState, f_new, neighbor_f_new, eta: float) -> np.ndarray:
    f_new = np.asarray(f_new, dtype=float)
    if f_new.shape != state.lam.shape:
        raise DimensionMismatch("updated primal and dual dimensions differ")
    acc = np.zeros_like(state.lam)
    for fw in neighbor_f_new:
        acc = acc + (f_new - fw)
    return state.lam + (eta / 2.0) * acc


# --- full runs -----------------------------------------------------------

# perturb(v, t, state, n_v, N_v) -> (beta, phi, PrivacyRecord)
Perturbation = Callable[[int, int, NodeState, int, int], tuple[np.ndarray, float, PrivacyRecord]]


def iterate(
    sched: TopologySchedule,
    data,
    h: Hyper,
    T: int | None,
    seed: int,
    solver: SolverCfg = SolverCfg(),
    perturb: Perturbation | None = None,
) -> Trajectory:
    data = as_node_map(data)
    T = sched.total_duration if T is None else int(T)
    if not 0 <= T <= sched.total_duration:
        raise ValueError(f"T={T} outside schedule duration {sched.total_duration}")
    missing = sched.all_node_ids() - set(data)
    if missing:
        raise UnknownNode(f"no data for nodes {sorted(missing)}")
    h.check_sizes([data[v].n for v in sched.all_node_ids()])
    dims = {data[v].d for v in sched.all_node_ids()}
    if len(dims) != 1:
        raise DimensionMismatch(f"node datasets have differing dimensions {sorted(dims)}")
    d = dims.pop()

    traj = Trajectory()
    topo0 = topology_at(sched, 0) if T > 0 else sched.phases[0][0]
    states = {v: NodeState.fresh(seed, v, 0, d) for v in topo0.sorted_nodes()}
    traj.snapshots.append({v: (s.f, s.lam) for v, s in states.items()})

    for t in range(T):
        topo = topology_at(sched, t)
        # nodes leaving drop their state; joining nodes start fresh
        states = {v: states[v] if v in states else NodeState.fresh(seed, v, t, d)
                  for v in topo.sorted_nodes()}
        f_new, records, iters = {}, {}, {}
        for v in topo.sorted_nodes():
            st = states[v]
            nbrs = sorted(topo.neighbors(v))
            nf = [states[w].f for w in nbrs]
            if perturb is None:
                beta, phi = st.lam, 0.0
            else:
                beta, phi, records[v] = perturb(v, t, st, data[v].n, len(nbrs))
            res = solve_local(st, nf, data[v], h, beta, phi, solver)
            f_new[v], iters[v] = res.f, res.iterations
        # broadcast barrier
        for v in topo.sorted_nodes():
            nbrs = sorted(topo.neighbors(v))
            lam = dual_update(states[v], f_new[v], [f_new[w] for w in nbrs], h.eta)
            states[v] = NodeState(f_new[v], lam)
        traj.topologies.append(topo)
        traj.inner_iterations.append(iters)
        if perturb is not None:
            traj.privacy.append(records)
        traj.snapshots.append({v: (s.f, s.lam) for v, s in states.items()})
    if T == 0:
        traj.topologies.append(topo0)
    return traj


def run(sched: TopologySchedule | Topology, data, h: Hyper, T: int | None = None,
        init_seed: int = 0, solver: SolverCfg = SolverCfg()) -> Trajectory:
    """Non-private consensus ADMM for ``T`` rounds (default: schedule length)."""
    if isinstance(sched, Topology):
        sched = TopologySchedule.fixed(sched, T)
    return iterate(sched, data, h, T, init_seed, solver)
