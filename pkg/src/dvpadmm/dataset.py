"""NSL-KDD ingestion, unit-ball preprocessing, synthetic data, node partitioning.

Labels are +1 for attack traffic and -1 for normal traffic.  Every feature
vector produced here satisfies ``||x||_2 <= 1``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, ParseError, SchemaError, TooFewSamples

log = logging.getLogger(__name__)

NSLKDD_COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)
SYMBOLIC_COLUMNS = ("protocol_type", "service", "flag")
CONTINUOUS_COLUMNS = tuple(c for c in NSLKDD_COLUMNS if c not in SYMBOLIC_COLUMNS)
_SYM_IDX = tuple(NSLKDD_COLUMNS.index(c) for c in SYMBOLIC_COLUMNS)
_CONT_IDX = tuple(NSLKDD_COLUMNS.index(c) for c in CONTINUOUS_COLUMNS)


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int


@dataclass
class NodeDataset:
    """Labeled samples held by one node, stored row-wise in ``X``."""

    X: np.ndarray
    y: np.ndarray
    owner: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.y), -1)
        if self.X.shape[0] != self.y.shape[0]:
            raise SchemaError(f"{self.X.shape[0]} feature rows but {self.y.shape[0]} labels")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    @property
    def samples(self) -> list[Sample]:
        return [Sample(x, int(lbl)) for x, lbl in zip(self.X, self.y)]

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], owner: int = 0, d: int | None = None):
        if not samples:
            return cls(np.zeros((0, d or 0)), np.zeros(0, dtype=int), owner)
        X = np.stack([np.asarray(s.features, dtype=float) for s in samples])
        y = np.array([s.label for s in samples], dtype=int)
        return cls(X, y, owner)

    def subset(self, idx, owner: int | None = None) -> "NodeDataset":
        return NodeDataset(self.X[idx], self.y[idx], self.owner if owner is None else owner)


def _as_dataset(data) -> NodeDataset:
    if isinstance(data, NodeDataset):
        return data
    return NodeDataset.from_samples(list(data))


# --- NSL-KDD -------------------------------------------------------------

@dataclass(frozen=True)
class RawRecord:
    numeric: tuple[float, ...]
    symbolic: tuple[str, str, str]
    label: int
    label_name: str


def _label_of(name: str) -> int:
    return -1 if name == "normal" else 1


def load_nslkdd(path: str | Path) -> list[RawRecord]:
    """Parse a comma-separated NSL-KDD file (41 attributes, label, optional
    difficulty score)."""
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) not in (42, 43):
                raise SchemaError(f"line {lineno}: expected 42 or 43 fields, got {len(row)}")
            row = [c.strip() for c in row]
            try:
                numeric = tuple(float(row[i]) for i in _CONT_IDX)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            name = row[41].rstrip(".")
            records.append(RawRecord(numeric, tuple(row[i] for i in _SYM_IDX), _label_of(name), name))
    if not records:
        raise SchemaError(f"{path}: no records")
    return records


@dataclass
class PreprocessSpec:
    """Fitted preprocessing state; serializable with :meth:`save`/:meth:`load`."""

    symbolic_columns: list[str]
    encoding: dict[str, list[str]]
    selected_features: list[str]
    normalization: dict[str, tuple[float, float]]
    dropped: list[str] = field(default_factory=list)

    @property
    def feature_names(self) -> list[str]:
        names = list(self.selected_features)
        for col in self.symbolic_columns:
            names.extend(f"{col}={v}" for v in self.encoding[col])
        return names

    @property
    def dim(self) -> int:
        return len(self.selected_features) + sum(len(self.encoding[c]) for c in self.symbolic_columns)

    def to_dict(self) -> dict:
        return {
            "symbolic_columns": self.symbolic_columns,
            "encoding": self.encoding,
            "selected_features": self.selected_features,
            "normalization": {k: list(v) for k, v in self.normalization.items()},
            "dropped": self.dropped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessSpec":
        return cls(
            list(d["symbolic_columns"]),
            {k: list(v) for k, v in d["encoding"].items()},
            list(d["selected_features"]),
            {k: (float(v[0]), float(v[1])) for k, v in d["normalization"].items()},
            list(d.get("dropped", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "PreprocessSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_preprocess(
    records: Sequence[RawRecord], selected_features: Iterable[str] | None = None
) -> PreprocessSpec:
    """Learn one-hot vocabularies and min/max ranges from ``records``.

    Continuous columns that are constant over the fit set are dropped.  When
    ``selected_features`` is given only those continuous columns are considered.
    """
    if not records:
        raise EmptyInput("cannot fit preprocessing on zero records")
    wanted = list(CONTINUOUS_COLUMNS) if selected_features is None else list(selected_features)
    unknown = [c for c in wanted if c not in CONTINUOUS_COLUMNS]
    if unknown:
        raise SchemaError(f"not continuous NSL-KDD columns: {unknown}")
    M = np.array([r.numeric for r in records], dtype=float)
    lo, hi = M.min(axis=0), M.max(axis=0)
    selected, dropped, norm = [], [], {}
    for j, col in enumerate(CONTINUOUS_COLUMNS):
        if col not in wanted:
            continue
        if lo[j] < hi[j]:
            selected.append(col)
            norm[col] = (float(lo[j]), float(hi[j]))
        else:
            dropped.append(col)
    if dropped:
        log.info("dropping constant columns: %s", ", ".join(dropped))
    encoding = {
        col: sorted({r.symbolic[k] for r in records}) for k, col in enumerate(SYMBOLIC_COLUMNS)
    }
    return PreprocessSpec(list(SYMBOLIC_COLUMNS), encoding, selected, norm, dropped)


def transform(spec: PreprocessSpec, records: Sequence[RawRecord]) -> NodeDataset:
    """Array form of :func:`apply_preprocess`."""
    if not records:
        return NodeDataset(np.zeros((0, spec.dim)), np.zeros(0, dtype=int))
    M = np.array([r.numeric for r in records], dtype=float)
    if M.shape[1] != len(CONTINUOUS_COLUMNS):
        raise SchemaError(f"records carry {M.shape[1]} numeric attributes")
    cols = [CONTINUOUS_COLUMNS.index(c) for c in spec.selected_features]
    lo = np.array([spec.normalization[c][0] for c in spec.selected_features])
    hi = np.array([spec.normalization[c][1] for c in spec.selected_features])
    scaled = np.clip((M[:, cols] - lo) / (hi - lo), 0.0, 1.0)

    blocks = [scaled]
    unknown = 0
    for k, col in enumerate(spec.symbolic_columns):
        vocab = {v: i for i, v in enumerate(spec.encoding[col])}
        sym_pos = SYMBOLIC_COLUMNS.index(col)
        onehot = np.zeros((len(records), len(vocab)))
        for i, r in enumerate(records):
            j = vocab.get(r.symbolic[sym_pos])
            if j is None:
                unknown += 1
            else:
                onehot[i, j] = 1.0
        blocks.append(onehot)
    if unknown:
        log.warning("%d symbolic values outside the fitted vocabulary encoded as zeros", unknown)
    X = np.hstack(blocks) / math.sqrt(spec.dim)
    y = np.array([r.label for r in records], dtype=int)
    return NodeDataset(X, y)


def apply_preprocess(spec: PreprocessSpec, records: Sequence[RawRecord]) -> list[Sample]:
    return transform(spec, records).samples


# --- processed-matrix files ----------------------------------------------

def write_processed(path: str | Path, data: NodeDataset, names: Sequence[str] | None = None) -> None:
    names = list(names) if names is not None else [f"x{j}" for j in range(data.d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for x, lbl in zip(data.X, data.y):
            w.writerow([*(repr(float(v)) for v in x), int(lbl)])


def read_processed(path: str | Path) -> NodeDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise SchemaError(f"{path}: header plus at least one row required")
    width = len(rows[0])
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise SchemaError(f"{path} line {lineno}: expected {width} fields, got {len(row)}")
        try:
            body.append([float(v) for v in row])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    A = np.array(body)
    return NodeDataset(A[:, :-1], A[:, -1].astype(int))


# --- synthetic data and partitioning -------------------------------------

def synthesize(n: int, d: int, separation: float, seed: int) -> NodeDataset:
    """Two unit-variance Gaussian clusters at ``±(separation/2) u`` with
    ``u = (1, ..., 1)/sqrt(d)``, then mapped into the unit ball by
    ``x / max(1, ||x||)``.  Classes are balanced to within one sample."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) < (n + 1) // 2, 1, -1)
    y = rng.permutation(y)
    u = np.full(d, 1.0 / math.sqrt(d))
    X = rng.standard_normal((n, d)) + (0.5 * separation) * y[:, None] * u
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
    return NodeDataset(X, y)


def partition(data, P: int, seed: int) -> list[NodeDataset]:
    """Seeded shuffle followed by a contiguous near-equal split.

    Part ``v`` is owned by node ``v``; the first ``n mod P`` parts receive
    one extra sample.
    """
    pool = _as_dataset(data)
    if P < 1 or pool.n < P:
        raise TooFewSamples(f"{pool.n} samples cannot fill {P} nodes")
    perm = np.random.default_rng(seed).permutation(pool.n)
    base, extra = divmod(pool.n, P)
    parts, start = [], 0
    for v in range(P):
        size = base + (1 if v < extra else 0)
        parts.append(pool.subset(perm[start:start + size], owner=v))
        start += size
    return parts


def split_by_label(d: NodeDataset) -> tuple[NodeDataset, NodeDataset]:
    """``(attack part, normal part)`` of ``d``."""
    return d.subset(d.y == 1), d.subset(d.y == -1)


def train_test_split(data: NodeDataset, test_fraction: float, seed: int) -> tuple[NodeDataset, NodeDataset]:
    perm = np.random.default_rng(seed).permutation(data.n)
    n_test = int(round(test_fraction * data.n))
    return data.subset(perm[n_test:]), data.subset(perm[:n_test])
