import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dvpadmm.consensus import (
    NodeState,
    augmented_local,
    augmented_local_grad,
    dual_update,
    primal_update,
    run,
)
from dvpadmm.dataset import partition, synthesize
from dvpadmm.errors import DimensionMismatch, UnknownNode
from dvpadmm.objective import Hyper, consensus_kappa, centralized_objective, local_objective
from dvpadmm.solver import SolverCfg, minimize
from dvpadmm.topology import TopologySchedule, path_graph, ring_graph, star_graph

from test_objective import central_diff


@pytest.fixture(scope="module")
def four_parts():
    return partition(synthesize(200, 2, 10.0, 0), 4, 0)


def test_augmented_local_reduces_to_local(four_parts):
    d = four_parts[0]
    h = Hyper(C1=10, rho=1)
    st_ = NodeState(np.array([0.2, -0.1]), np.zeros(2))
    f = np.array([0.4, 0.3])
    assert augmented_local(f, st_, [], d, h) == local_objective(f, d, h)
    fi = np.array([1.0, 1.0])
    mid = 0.5 * (st_.f + fi)
    assert augmented_local(mid, st_, [fi], d, h) == pytest.approx(local_objective(mid, d, h))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(0, 4), eta=st.floats(0.1, 5))
def test_augmented_gradient_fd(seed, k, eta):
    rng = np.random.default_rng(seed)
    d = synthesize(30, 3, 2.0, seed % 997)
    h = Hyper(C1=15, rho=0.5, eta=eta)
    state = NodeState(rng.standard_normal(3), rng.standard_normal(3))
    nf = [rng.standard_normal(3) for _ in range(k)]
    f = rng.standard_normal(3)
    g = augmented_local_grad(f, state, nf, d, h)
    fd = central_diff(lambda x: augmented_local(x, state, nf, d, h), f)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(1, np.linalg.norm(g))


def test_primal_update_stationary(four_parts):
    d = four_parts[1]
    h = Hyper(C1=10, rho=1)
    state = NodeState(np.zeros(2), np.array([0.1, -0.2]))
    nf = [np.array([0.5, 0.5]), np.array([-0.3, 0.2])]
    f = primal_update(state, nf, d, h)
    assert np.linalg.norm(augmented_local_grad(f, state, nf, d, h)) <= 1e-6


def test_dual_update_examples():
    st_ = NodeState(np.zeros(2), np.zeros(2))
    assert np.array_equal(dual_update(st_, np.array([1.0, 0]), [np.zeros(2)], 1.0), [0.5, 0])
    lam = np.array([0.3, -0.7])
    s2 = NodeState(np.ones(2), lam)
    assert np.array_equal(dual_update(s2, np.ones(2), [np.ones(2), np.ones(2)], 2.0), lam)
    assert np.array_equal(dual_update(s2, np.ones(2), [], 2.0), lam)
    with pytest.raises(DimensionMismatch):
        dual_update(s2, np.ones(3), [], 1.0)


def test_single_node_is_local_erm():
    d = synthesize(100, 3, 3.0, 1)
    h = Hyper(C1=50, rho=0.1)
    traj = run(path_graph(1), [d], h, T=5)
    assert all(np.all(lam == 0) for snap in traj.snapshots for _, lam in snap.values())
    f = traj.final_f()[0]
    direct = minimize(d.X, d.y, h.C1 / d.n, h.rho, np.zeros(3), np.zeros(3), SolverCfg(tol=1e-10)).f
    assert np.allclose(f, direct, atol=1e-6)


def centralized_gd(parts, h, kappa, steps=200_000):
    """Plain gradient descent on the pooled objective, step 1/L."""
    X = np.vstack([p.X for p in parts])
    y = np.concatenate([p.y for p in parts])
    n = parts[0].n
    L = h.C1 / n * 0.25 * np.linalg.norm(X, 2) ** 2 + kappa
    f = np.zeros(X.shape[1])
    for _ in range(steps):
        z = y * (X @ f)
        g = (h.C1 / n) * ((-y / (1 + np.exp(z))) @ X) + kappa * f
        if np.linalg.norm(g) < 1e-11:
            break
        f = f - g / L
    return f


def test_path_graph_reaches_centralized_optimum(four_parts):
    h = Hyper(C1=10, rho=1)
    traj = run(path_graph(4), four_parts, h, T=100)
    assert traj.residuals()[-1] < 1e-4
    kappa = consensus_kappa(h, 4)
    f_star = centralized_gd(four_parts, h, kappa)
    opt = centralized_objective(f_star, four_parts, h, kappa)
    got = np.mean([centralized_objective(f, four_parts, h, kappa) for f in traj.final_f().values()])
    assert abs(got - opt) / abs(opt) < 1e-3


def test_dual_recomputed_bitwise(four_parts):
    h = Hyper(C1=10, rho=1, eta=0.7)
    topo = ring_graph(4)
    traj = run(topo, four_parts, h, T=12, init_seed=3)
    for v in topo.node_ids:
        lam = np.zeros(2)
        for t in range(1, traj.T + 1):
            snap = traj.f_at(t)
            acc = np.zeros(2)
            for w in sorted(topo.neighbors(v)):
                acc = acc + (snap[v] - snap[w])
            lam = lam + (h.eta / 2.0) * acc
        assert np.array_equal(lam, traj.snapshots[-1][v][1])


def test_snapshot_count_and_determinism(four_parts):
    h = Hyper(C1=10, rho=1)
    a = run(star_graph(4), four_parts, h, T=7, init_seed=5)
    b = run(star_graph(4), four_parts, h, T=7, init_seed=5)
    assert len(a.snapshots) == 8
    for sa, sb in zip(a.snapshots, b.snapshots):
        for v in sa:
            assert np.array_equal(sa[v][0], sb[v][0]) and np.array_equal(sa[v][1], sb[v][1])
    init = a.snapshots[0][0][0]
    assert np.all(np.abs(init) <= 0.01)


def test_topology_change_keeps_survivors(four_parts):
    h = Hyper(C1=10, rho=1)
    sched = TopologySchedule(((path_graph(3), 4), (path_graph(4), 3)))
    traj = run(sched, four_parts, h)
    assert set(traj.snapshots[4]) == {0, 1, 2}
    assert set(traj.snapshots[5]) == {0, 1, 2, 3}
    assert traj.T == 7


def test_missing_data_for_node(four_parts):
    with pytest.raises(UnknownNode):
        run(path_graph(5), four_parts, Hyper(C1=10, rho=1), T=2)


def test_csv_export(tmp_path, four_parts):
    h = Hyper(C1=10, rho=1)
    traj = run(path_graph(4), four_parts, h, T=3)
    traj.to_csv(tmp_path / "m.csv", four_parts, h)
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["iter", "node", "empirical_risk", "consensus_residual"]
    assert len(rows) == 1 + 4 * 4
