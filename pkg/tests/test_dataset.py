import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.linear_model import LogisticRegression

from dvpadmm.dataset import (
    CONTINUOUS_COLUMNS,
    NodeDataset,
    PreprocessSpec,
    RawRecord,
    apply_preprocess,
    fit_preprocess,
    load_nslkdd,
    partition,
    read_processed,
    split_by_label,
    synthesize,
    transform,
    write_processed,
)
from dvpadmm.errors import EmptyInput, ParseError, SchemaError, TooFewSamples


def record(numeric, protocol="tcp", label=-1):
    return RawRecord(tuple(float(v) for v in numeric), (protocol, "http", "SF"), label,
                     "normal" if label == -1 else "neptune")


def test_labels_mapped(kdd_file):
    recs = load_nslkdd(kdd_file(40))
    for r in recs:
        assert r.label == (-1 if r.label_name == "normal" else 1)
    names = {r.label_name for r in recs}
    assert "neptune" in names and "normal" in names


def test_neptune_is_attack_and_trailing_dot(tmp_path, kdd_file):
    path = kdd_file(1, label="neptune.", difficulty=False)
    (r,) = load_nslkdd(path)
    assert r.label == 1 and r.label_name == "neptune"


def test_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    with pytest.raises(SchemaError):
        load_nslkdd(p)


def test_wrong_column_count(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0,tcp,http,SF,normal\n")
    with pytest.raises(SchemaError):
        load_nslkdd(p)


def test_parse_error_has_line(kdd_file):
    path = kdd_file(3)
    lines = path.read_text().splitlines()
    fields = lines[2].split(",")
    fields[0] = "abc"
    lines[2] = ",".join(fields)
    path.write_text("\n".join(lines))
    with pytest.raises(ParseError) as err:
        load_nslkdd(path)
    assert err.value.line == 3


def test_one_hot_vocabulary_and_dropped_column():
    recs = [record(np.arange(38) * (i + 1), p) for i, p in enumerate(["tcp", "udp", "tcp"])]
    recs = [RawRecord(r.numeric[:5] + (7.0,) + r.numeric[6:], r.symbolic, r.label, r.label_name)
            for r in recs]
    spec = fit_preprocess(recs)
    assert spec.encoding["protocol_type"] == ["tcp", "udp"]
    assert CONTINUOUS_COLUMNS[5] in spec.dropped
    assert CONTINUOUS_COLUMNS[5] not in spec.selected_features
    assert CONTINUOUS_COLUMNS[0] in spec.dropped  # all zeros


def test_empty_fit():
    with pytest.raises(EmptyInput):
        fit_preprocess([])


def test_fit_then_apply_unit_ball(kdd_file):
    recs = load_nslkdd(kdd_file(80))
    spec = fit_preprocess(recs)
    data = transform(spec, recs)
    assert np.all(np.linalg.norm(data.X, axis=1) <= 1 + 1e-12)
    assert set(np.unique(data.y)) <= {-1, 1}


def test_zero_record_and_max_record():
    lo = record(np.zeros(38))
    hi = record(np.full(38, 10.0))
    spec = fit_preprocess([lo, hi])
    d = spec.dim
    x_lo = transform(spec, [lo]).X[0]
    x_hi = transform(spec, [hi]).X[0]
    n_cont = len(spec.selected_features)
    assert np.all(x_lo[:n_cont] == 0)
    assert np.linalg.norm(x_lo) <= 1
    assert np.allclose(x_hi[:n_cont], 1 / math.sqrt(d))
    active = n_cont + 3  # three one-hot bits
    assert np.linalg.norm(x_hi) == pytest.approx(math.sqrt(active) / math.sqrt(d))


def test_clamping_above_fit_max():
    spec = fit_preprocess([record(np.zeros(38)), record(np.full(38, 10.0))])
    x = transform(spec, [record(np.full(38, 100.0))]).X[0]
    assert np.allclose(x[: len(spec.selected_features)], 1 / math.sqrt(spec.dim))


def test_unknown_category_is_zeros(caplog):
    spec = fit_preprocess([record(np.zeros(38)), record(np.ones(38))])
    x = transform(spec, [record(np.ones(38), protocol="icmp")]).X[0]
    n_cont = len(spec.selected_features)
    assert x[n_cont] == 0  # protocol block has one slot: tcp
    assert "outside the fitted vocabulary" in caplog.text


def test_spec_round_trip(tmp_path, kdd_file):
    recs = load_nslkdd(kdd_file(30))
    spec = fit_preprocess(recs)
    spec.save(tmp_path / "spec.json")
    again = PreprocessSpec.load(tmp_path / "spec.json")
    assert np.array_equal(transform(spec, recs).X, transform(again, recs).X)


def test_apply_is_idempotent_under_second_scaling(kdd_file):
    recs = load_nslkdd(kdd_file(50))
    spec = fit_preprocess(recs)
    X = transform(spec, recs).X * math.sqrt(spec.dim)
    n = len(spec.selected_features)
    cont = X[:, :n]
    rescaled = np.clip((cont - 0.0) / 1.0, 0, 1)
    assert np.array_equal(rescaled, cont)
    samples = apply_preprocess(spec, recs)
    assert len(samples) == len(recs)


def test_processed_round_trip(tmp_path):
    d = synthesize(20, 3, 2.0, 0)
    write_processed(tmp_path / "p.csv", d)
    back = read_processed(tmp_path / "p.csv")
    assert np.array_equal(back.X, d.X) and np.array_equal(back.y, d.y)
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header.endswith(",label")


def test_partition_sizes():
    d = synthesize(8, 2, 1.0, 0)
    assert [p.n for p in partition(d, 4, 0)] == [2, 2, 2, 2]
    d9 = synthesize(9, 2, 1.0, 0)
    assert sorted((p.n for p in partition(d9, 4, 0)), reverse=True) == [3, 2, 2, 2]
    a, b = partition(d9, 4, 5), partition(d9, 4, 5)
    assert all(np.array_equal(x.X, y.X) for x, y in zip(a, b))
    with pytest.raises(TooFewSamples):
        partition(d9, 10, 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 60), P=st.integers(1, 12), seed=st.integers(0, 1000))
def test_partition_is_set_partition(n, P, seed):
    if n < P:
        return
    d = NodeDataset(np.arange(n, dtype=float)[:, None], np.ones(n, dtype=int))
    parts = partition(d, P, seed)
    got = np.sort(np.concatenate([p.X[:, 0] for p in parts]))
    assert np.array_equal(got, np.arange(n))
    sizes = [p.n for p in parts]
    assert max(sizes) - min(sizes) <= 1
    assert [p.owner for p in parts] == list(range(P))


def test_split_by_label():
    d = NodeDataset(np.eye(4)[:, :2], np.array([1, 1, 1, 1]))
    att, nor = split_by_label(d)
    assert att.n == 4 and nor.n == 0
    bal = synthesize(10, 2, 1.0, 3)
    att, nor = split_by_label(bal)
    assert (att.n, nor.n) == (5, 5)
    mixed = synthesize(13, 3, 1.0, 4)
    att, nor = split_by_label(mixed)
    rows = sorted(map(tuple, np.column_stack([mixed.X, mixed.y])))
    back = sorted(map(tuple, np.vstack([np.column_stack([att.X, att.y]), np.column_stack([nor.X, nor.y])])))
    assert rows == back


def test_synthesize_unit_ball_and_determinism():
    d = synthesize(500, 7, 3.0, 11)
    assert np.all(np.linalg.norm(d.X, axis=1) <= 1 + 1e-12)
    assert np.array_equal(d.X, synthesize(500, 7, 3.0, 11).X)


def test_synthesize_separable():
    d = synthesize(200, 2, 10.0, 0)
    clf = LogisticRegression(C=1e4, max_iter=10_000).fit(d.X, d.y)
    assert clf.score(d.X, d.y) >= 0.99


def test_synthesize_no_separation():
    train, test = synthesize(4000, 2, 0.0, 0), synthesize(4000, 2, 0.0, 1)
    clf = LogisticRegression().fit(train.X, train.y)
    assert abs(clf.score(test.X, test.y) - 0.5) < 0.05
