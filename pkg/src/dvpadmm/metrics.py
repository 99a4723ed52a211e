"""Detection-quality and consensus metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import MissingClass, MissingNode


@dataclass(frozen=True)
class RocCurve:
    points: list[tuple[float, float]]  # (fpr, tpr), from (0,0) to (1,1)
    auc: float

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fpr", "tpr"])
            for fpr, tpr in self.points:
                w.writerow([repr(fpr), repr(tpr)])


def _classes(labels: np.ndarray) -> tuple[int, int]:
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == -1))
    if n_pos == 0 or n_neg == 0:
        raise MissingClass(f"need both labels; got {n_pos} attack and {n_neg} normal")
    return n_pos, n_neg


def confusion_at_zero(f, test) -> tuple[float, float]:
    """(FPR, FNR) of the ``sign(f.x)`` rule, margin zero counted as attack."""
    n_pos, n_neg = _classes(test.y)
    pred = np.where(test.X @ np.asarray(f, dtype=float) >= 0, 1, -1)
    fpr = np.sum((pred == 1) & (test.y == -1)) / n_neg
    fnr = np.sum((pred == -1) & (test.y == 1)) / n_pos
    return float(fpr), float(fnr)


def roc(scores, labels=None, resolution: int | None = None) -> RocCurve:
    """ROC of raw scores, one threshold per distinct score.

    ``scores`` may be a sequence of ``(score, label)`` pairs or, with
    ``labels`` given, an array of scores.  ``resolution`` thins the returned
    points (endpoints kept); the AUC always uses the full curve.
    """
    if labels is None:
        arr = np.asarray(scores, dtype=float).reshape(-1, 2)
        s, y = arr[:, 0], arr[:, 1].astype(int)
    else:
        s, y = np.asarray(scores, dtype=float), np.asarray(labels, dtype=int)
    n_pos, n_neg = _classes(y)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    cut = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y == 1)[cut]
    fp = np.cumsum(y == -1)[cut]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    pts = list(zip(fpr.tolist(), tpr.tolist()))
    if resolution is not None and len(pts) > resolution >= 2:
        keep = np.unique(np.linspace(0, len(pts) - 1, resolution).round().astype(int))
        pts = [pts[i] for i in keep]
    return RocCurve(pts, auc)


def consensus_residual(snapshot: Mapping[int, np.ndarray], topology, strict: bool = True) -> float:
    """Largest ``||f_v - f_w||`` over the graph's edges."""
    worst = 0.0
    for v, w in topology.edges:
        if v not in snapshot or w not in snapshot:
            if strict:
                raise MissingNode(f"snapshot lacks node {v if v not in snapshot else w}")
            continue
        worst = max(worst, float(np.linalg.norm(np.asarray(snapshot[v]) - np.asarray(snapshot[w]))))
    if strict:
        absent = topology.node_ids - set(snapshot)
        if absent:
            raise MissingNode(f"snapshot lacks nodes {sorted(absent)}")
    return worst


def conditional_loss(f, test, label: int, loss) -> float:
    """Mean loss over the test samples of one class."""
    mask = test.y == label
    if not mask.any():
        raise MissingClass(f"no samples with label {label}")
    z = test.y[mask] * (test.X[mask] @ np.asarray(f, dtype=float))
    return float(np.mean(loss.value(z)))
