"""Experiment configs, multi-seed runs, alpha sweeps and their artifacts.

Output layout of :func:`run_experiment` (when ``out_dir`` is set)::

    out_dir/seed_<s>/metrics.csv   iter,node,empirical_risk,consensus_residual[,alpha,phi,zeta,noise_norm]
    out_dir/seed_<s>/roc.csv       node,fpr,tpr
    out_dir/seed_<s>/scores.csv    node,score,label   (test set, raw margins f.x)
    out_dir/seed_<s>/summary.json
    out_dir/aggregate.json         mean/std of every summary metric over seeds
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import consensus, dvp
from .dataset import (
    NodeDataset,
    fit_preprocess,
    load_nslkdd,
    partition,
    read_processed,
    synthesize,
    train_test_split,
    transform,
)
from .errors import ConfigError
from .metrics import conditional_loss, confusion_at_zero, roc
from .objective import Hyper, empirical_risk
from .solver import SolverCfg
from .topology import (
    Topology,
    TopologySchedule,
    build_topology,
    complete_graph,
    path_graph,
    random_connected,
    ring_graph,
    star_graph,
)

TOPOLOGY_KINDS = ("path", "ring", "star", "complete", "random")


@dataclass
class DataCfg:
    source: str = "synthetic"  # synthetic | nslkdd | processed
    n_per_node: int = 1250
    dim: int = 10
    separation: float = 2.0
    n_test: int = 2000
    path: str | None = None
    test_path: str | None = None
    max_records: int | None = None
    test_fraction: float = 0.2
    selected_features: list[str] | None = None


@dataclass
class TopologyCfg:
    kind: str = "star"
    avg_degree: float = 2.0


@dataclass
class ScheduleCfg:
    """Topology-varying run: phase i lasts ``k[i]`` rounds on ``nodes[i]`` vehicles."""

    k: list[int]
    nodes: list[int]

    @property
    def VT(self) -> int:
        return len(self.k)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    data: DataCfg = field(default_factory=DataCfg)
    nodes: int = 4
    topology: TopologyCfg = field(default_factory=TopologyCfg)
    schedule: ScheduleCfg | None = None
    C1: float = 650.0
    rho: float = 10 ** -2.5
    eta: float = 1.0
    C2: float = 0.25
    mode: str = "dvp"  # dvp | nonprivate
    alpha: float | dict[int, float] | None = 0.5
    T: int = 45
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    out_dir: str | None = None
    solver: SolverCfg = field(default_factory=SolverCfg)

    @property
    def hyper(self) -> Hyper:
        return Hyper(C1=self.C1, rho=self.rho, eta=self.eta, C2=self.C2)

    @property
    def max_nodes(self) -> int:
        return max(self.schedule.nodes) if self.schedule else self.nodes

    def validate(self) -> "ExperimentConfig":
        if self.mode not in ("dvp", "nonprivate"):
            raise ConfigError(f"mode must be 'dvp' or 'nonprivate', got {self.mode!r}")
        if self.data.source not in ("synthetic", "nslkdd", "processed"):
            raise ConfigError(f"unknown data source {self.data.source!r}")
        if self.data.source != "synthetic" and not self.data.path:
            raise ConfigError(f"data.path is required for source {self.data.source!r}")
        if self.topology.kind not in TOPOLOGY_KINDS:
            raise ConfigError(f"topology.kind must be one of {TOPOLOGY_KINDS}")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        for name in ("C1", "rho", "eta", "C2"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.schedule is not None:
            s = self.schedule
            if len(s.k) != len(s.nodes) or not s.k:
                raise ConfigError("schedule.k and schedule.nodes must be nonempty and equal length")
            if any(k < 1 for k in s.k) or any(p < 1 for p in s.nodes):
                raise ConfigError("schedule durations and node counts must be >= 1")
            if sum(s.k) != self.T:
                raise ConfigError(f"schedule durations sum to {sum(s.k)}, but T={self.T}")
        if self.mode == "dvp":
            if self.alpha is None:
                raise ConfigError("mode=dvp requires alpha")
            vals = self.alpha.values() if isinstance(self.alpha, dict) else [self.alpha]
            if any(not (float(a) > 0 and math.isfinite(float(a))) for a in vals):
                raise ConfigError("alpha must be positive")
            if isinstance(self.alpha, dict):
                missing = set(range(self.max_nodes)) - set(self.alpha)
                if missing:
                    raise ConfigError(f"per-node alpha missing nodes {sorted(missing)}")
        if self.data.source == "synthetic" and self.data.n_per_node < self.C1:
            raise ConfigError(f"C1={self.C1} exceeds n_per_node={self.data.n_per_node}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, raw: Mapping[str, Any], where: str):
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: Mapping[str, Any]) -> ExperimentConfig:
    raw = dict(raw)
    if "log10_rho" in raw:
        if "rho" in raw:
            raise ConfigError("give either rho or log10_rho, not both")
        raw["rho"] = 10.0 ** float(raw.pop("log10_rho"))
    if isinstance(raw.get("seeds"), int):
        raw["seeds"] = list(range(raw["seeds"]))
    if "data" in raw:
        raw["data"] = _build(DataCfg, raw["data"], "data")
    if "topology" in raw:
        raw["topology"] = _build(TopologyCfg, raw["topology"], "topology")
    if raw.get("schedule") is not None:
        raw["schedule"] = _build(ScheduleCfg, raw["schedule"], "schedule")
    if "solver" in raw:
        raw["solver"] = _build(SolverCfg, raw["solver"], "solver")
    if isinstance(raw.get("alpha"), dict):
        raw["alpha"] = {int(k): float(v) for k, v in raw["alpha"].items()}
    for key in ("C1", "rho", "eta", "C2"):
        if key in raw:
            raw[key] = float(raw[key])
    return _build(ExperimentConfig, raw, "config").validate()


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw)


# --- building blocks -----------------------------------------------------

def derive_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


def make_topology(kind: str, p: int, avg_degree: float = 2.0, seed: int = 0) -> Topology:
    if kind == "path":
        return path_graph(p)
    if kind == "ring":
        return ring_graph(p)
    if kind == "star":
        return star_graph(p)
    if kind == "complete":
        return complete_graph(p)
    if kind == "random":
        deg = min(max(avg_degree, 2 * (p - 1) / p), p - 1) if p > 1 else 0
        return random_connected(p, deg, seed)
    raise ConfigError(f"unknown topology kind {kind!r}")


def relabel(topo: Topology, perm: Sequence[int]) -> Topology:
    return build_topology([perm[v] for v in topo.node_ids], [(perm[v], perm[w]) for v, w in topo.edges])


def make_schedule(cfg: ExperimentConfig, seed: int) -> TopologySchedule:
    tc = cfg.topology
    if cfg.schedule is None:
        topo = make_topology(tc.kind, cfg.nodes, tc.avg_degree, derive_seed(seed, 10))
        return TopologySchedule.fixed(topo, cfg.T)
    phases = []
    for i, (k, p) in enumerate(zip(cfg.schedule.k, cfg.schedule.nodes)):
        topo = make_topology(tc.kind, p, tc.avg_degree, derive_seed(seed, 10, i))
        if i > 0:
            # vehicles change position: same shape, different occupants
            perm = np.random.default_rng(derive_seed(seed, 11, i)).permutation(p)
            topo = relabel(topo, [int(x) for x in perm])
        phases.append((topo, int(k)))
    return TopologySchedule(tuple(phases))


@lru_cache(maxsize=4)
def _nslkdd(path: str):
    return load_nslkdd(path)


def make_data(cfg: ExperimentConfig, seed: int) -> tuple[list[NodeDataset], NodeDataset]:
    dc = cfg.data
    P = cfg.max_nodes
    if dc.source == "synthetic":
        train = synthesize(P * dc.n_per_node, dc.dim, dc.separation, derive_seed(seed, 1))
        test = synthesize(dc.n_test, dc.dim, dc.separation, derive_seed(seed, 2))
    elif dc.source == "nslkdd":
        records = _nslkdd(dc.path)
        if dc.test_path:
            test_records = _nslkdd(dc.test_path)
        else:
            perm = np.random.default_rng(derive_seed(seed, 3)).permutation(len(records))
            n_test = int(round(dc.test_fraction * len(records)))
            test_records = [records[i] for i in perm[:n_test]]
            records = [records[i] for i in perm[n_test:]]
        if dc.max_records and len(records) > dc.max_records:
            keep = np.random.default_rng(derive_seed(seed, 4)).choice(len(records), dc.max_records, replace=False)
            records = [records[i] for i in sorted(keep)]
        spec = fit_preprocess(records, dc.selected_features)
        train, test = transform(spec, records), transform(spec, test_records)
    else:
        train = read_processed(dc.path)
        if dc.test_path:
            test = read_processed(dc.test_path)
        else:
            train, test = train_test_split(train, dc.test_fraction, derive_seed(seed, 3))
    parts = partition(train, P, derive_seed(seed, 5))
    smallest = min(p.n for p in parts)
    if smallest < cfg.C1:
        raise ConfigError(f"C1={cfg.C1} exceeds smallest node dataset ({smallest} samples)")
    return parts, test


# --- single runs ---------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    """One run; writes per-seed artifacts when ``cfg.out_dir`` is set."""
    start = time.perf_counter()
    parts, test = make_data(cfg, seed)
    sched = make_schedule(cfg, seed)
    h = cfg.hyper
    if cfg.mode == "dvp":
        traj = dvp.run_private(sched, parts, h, cfg.alpha, cfg.T, seed, cfg.solver)
    else:
        traj = consensus.run(sched, parts, h, cfg.T, seed, cfg.solver)
    final = traj.final_f()
    nodes = sorted(final)

    er = [empirical_risk(final[v], parts[v], h.C1) for v in nodes]
    rocs = {v: roc(test.X @ final[v], test.y) for v in nodes}
    conf = [confusion_at_zero(final[v], test) for v in nodes]
    trace = [float(np.mean(list(r.values()))) for r in traj.risk_trace(parts, h.C1)]
    summary = {
        "name": cfg.name,
        "seed": seed,
        "mode": cfg.mode,
        "alpha": cfg.alpha if cfg.mode == "dvp" else None,
        "nodes": len(nodes),
        "final_er": float(np.mean(er)),
        "final_mean_loss": float(np.mean(er)) / h.C1,
        "auc": float(np.mean([rocs[v].auc for v in nodes])),
        "fpr": float(np.mean([c[0] for c in conf])),
        "fnr": float(np.mean([c[1] for c in conf])),
        "test_loss_attack": float(np.mean([conditional_loss(final[v], test, 1, h.loss) for v in nodes])),
        "test_loss_normal": float(np.mean([conditional_loss(final[v], test, -1, h.loss) for v in nodes])),
        "final_residual": traj.residuals()[-1],
        "er_trace": trace,
    }
    summary["wall_time_s"] = time.perf_counter() - start

    if cfg.out_dir:
        d = Path(cfg.out_dir) / f"seed_{seed}"
        d.mkdir(parents=True, exist_ok=True)
        traj.to_csv(d / "metrics.csv", parts, h)
        _write_csv(d / "roc.csv", ["node", "fpr", "tpr"],
                   [[v, repr(x), repr(y)] for v in nodes for x, y in rocs[v].points])
        _write_csv(d / "scores.csv", ["node", "score", "label"],
                   [[v, repr(float(s)), int(lbl)] for v in nodes
                    for s, lbl in zip(test.X @ final[v], test.y)])
        (d / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


AGG_KEYS = ("final_er", "final_mean_loss", "auc", "fpr", "fnr", "test_loss_attack",
            "test_loss_normal", "final_residual", "wall_time_s")


def aggregate(summaries: Sequence[dict]) -> dict:
    out: dict[str, Any] = {"n_seeds": len(summaries)}
    for key in AGG_KEYS:
        vals = np.array([s[key] for s in summaries], dtype=float)
        out[key] = {"mean": float(vals.mean()),
                    "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0}
    traces = np.array([s["er_trace"] for s in summaries], dtype=float)
    out["er_trace_mean"] = traces.mean(axis=0).tolist()
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summaries: list[dict]
    aggregate: dict

    def values(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.summaries], dtype=float)


def _seed_job(args):
    cfg, seed = args
    return run_seed(cfg, seed)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run every seed of ``cfg``; seeds run in worker processes when ``jobs > 1``."""
    cfg.validate()
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_seed_job, [(cfg, s) for s in cfg.seeds]))
    else:
        summaries = [run_seed(cfg, s) for s in cfg.seeds]
    agg = aggregate(summaries)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "aggregate.json").write_text(json.dumps(agg, indent=2, sort_keys=True))
        (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    return ExperimentResult(cfg, summaries, agg)


SWEEP_HEADER = ["alpha", "mean_final_er", "std_final_er", "mean_final_loss", "std_final_loss",
                "mean_auc", "std_auc", "n_seeds"]


def sweep_alpha(cfg: ExperimentConfig, alphas: Sequence[float], jobs: int = 1) -> list[dict]:
    """One DVP experiment per alpha; writes ``sweep.csv`` under ``out_dir``."""
    if not alphas:
        raise ConfigError("sweep needs at least one alpha")
    rows = []
    for a in alphas:
        sub = dataclasses.replace(cfg, mode="dvp", alpha=float(a),
                                  out_dir=str(Path(cfg.out_dir) / f"alpha_{a:g}") if cfg.out_dir else None)
        agg = run_experiment(sub, jobs).aggregate
        rows.append({
            "alpha": float(a),
            "mean_final_er": agg["final_er"]["mean"], "std_final_er": agg["final_er"]["std"],
            "mean_final_loss": agg["final_mean_loss"]["mean"],
            "std_final_loss": agg["final_mean_loss"]["std"],
            "mean_auc": agg["auc"]["mean"], "std_auc": agg["auc"]["std"],
            "n_seeds": agg["n_seeds"],
        })
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        write_sweep(Path(cfg.out_dir) / "sweep.csv", rows)
    return rows


def write_sweep(path: str | Path, rows: Sequence[dict]) -> None:
    _write_csv(Path(path), SWEEP_HEADER, [[repr(r[k]) if isinstance(r[k], float) else r[k]
                                          for k in SWEEP_HEADER] for r in rows])


def read_sweep(path: str | Path, column: str = "mean_final_er") -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "alpha" not in rows[0] or column not in rows[0]:
        raise ConfigError(f"{path}: sweep CSV needs columns 'alpha' and {column!r}")
    return [(float(r["alpha"]), float(r[column])) for r in rows]


def pooled_std(*groups: Sequence[float]) -> float:
    """Root mean of the per-group sample variances."""
    return float(math.sqrt(np.mean([np.var(np.asarray(g, dtype=float), ddof=1) for g in groups])))
