import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lsdml.datasets import (
    FeatureDataset,
    SplitSpec,
    class_disjoint_split,
    generate_synthetic,
    ingest_csv,
    inject_symmetric_noise,
    write_csv,
    write_noise_record,
)
from lsdml.errors import DimensionError, ParseError, SchemaError, SpecError
from lsdml.numerics import Rng


def small(seed=0, **kw):
    args = dict(num_classes=6, per_class=10, dim=8, rng=Rng(seed))
    args.update(kw)
    return generate_synthetic(**args)


def foreign_fraction(ds):
    d = np.linalg.norm(ds.features[:, None, :] - ds.centroids[None, :, :], axis=-1)
    return float(np.mean(np.argmin(d, axis=1) != ds.labels))


def test_synthetic_shapes_and_determinism():
    a, b = small(3), small(3)
    assert a.features.shape == (60, 8) and a.dim == 8
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.provenance == "synthetic"


def test_synthetic_tight_clusters_are_separable():
    ds = small(1, hard_fraction=0.0, intra_spread=1e-6)
    assert foreign_fraction(ds) == 0.0


def test_hard_fraction_raises_confusion():
    base = np.mean([foreign_fraction(small(s, hard_fraction=0.0, intra_spread=1.5)) for s in range(5)])
    hard = np.mean([foreign_fraction(small(s, hard_fraction=0.3, intra_spread=1.5)) for s in range(5)])
    assert hard > base


def test_synthetic_validation():
    with pytest.raises(DimensionError):
        small(dim=1)
    with pytest.raises(SpecError):
        small(hard_fraction=1.0)
    with pytest.raises(SpecError):
        small(num_classes=0)


def test_noise_ratio_zero_is_identity():
    ds = small()
    out = inject_symmetric_noise(ds, 0.0, Rng(1))
    np.testing.assert_array_equal(out.labels, ds.labels)
    assert out.noise_record == []


def test_noise_exact_count():
    ds = FeatureDataset(np.zeros((1000, 2)), np.arange(1000) % 10)
    out = inject_symmetric_noise(ds, 0.4, Rng(2))
    assert len(out.noise_record) == 400
    assert np.sum(out.labels != ds.labels) == 400
    for i, orig, new in out.noise_record:
        assert orig == ds.labels[i] and new == out.labels[i] and new != orig


@given(st.floats(0, 0.99), st.integers(0, 2**32 - 1))
def test_noise_never_self_and_count_rounds(ratio, seed):
    ds = FeatureDataset(np.zeros((37, 2)), np.arange(37) % 4)
    out = inject_symmetric_noise(ds, ratio, Rng(seed))
    assert len(out.noise_record) == int(np.floor(ratio * 37 + 0.5))
    assert all(o != c for _, o, c in out.noise_record)


def test_noise_targets_uniform():
    ds = FeatureDataset(np.zeros((50, 2)), np.zeros(50, dtype=int))
    ds.labels[:5] = [1, 2, 3, 4, 5]
    counts = np.zeros(6)
    for seed in range(400):
        out = inject_symmetric_noise(ds, 0.5, Rng(seed))
        for _, orig, new in out.noise_record:
            if orig == 0:
                counts[new] += 1
    obs = counts[1:]
    expect = obs.sum() / 5
    assert ((obs - expect) ** 2 / expect).sum() < 13.277  # chi2(4), p = 0.01


def test_noise_single_class():
    with pytest.raises(SpecError):
        inject_symmetric_noise(FeatureDataset(np.zeros((4, 2)), np.zeros(4)), 0.5, Rng(0))


def test_split_partition():
    ds = small(num_classes=4)
    train, test = class_disjoint_split(ds, SplitSpec(0.5))
    assert len(set(train.classes)) == 2 and len(set(test.classes)) == 2
    assert not set(train.classes) & set(test.classes)
    assert len(train) + len(test) == len(ds)
    rows = {tuple(r) for r in train.features} | {tuple(r) for r in test.features}
    assert len(rows) == len(ds)


def test_split_shuffle_reproducible():
    ds = small(num_classes=10)
    a = class_disjoint_split(ds, SplitSpec(0.3, shuffle=True, seed=4))[0]
    b = class_disjoint_split(ds, SplitSpec(0.3, shuffle=True, seed=4))[0]
    np.testing.assert_array_equal(a.labels, b.labels)
    assert len(a.classes) == 3


@pytest.mark.parametrize("frac", [0.0, 0.01, 0.99, 1.0])
def test_split_rejects_empty_side(frac):
    with pytest.raises(SpecError):
        class_disjoint_split(small(num_classes=4), SplitSpec(frac))


def test_csv_fixture(tmp_path):
    path = tmp_path / "three.csv"
    path.write_text("label,f0,f1\n2,0.5,-1\n0,1e-3,2.25\n7,3,4\n", encoding="utf-8")
    ds = ingest_csv(path)
    assert len(ds) == 3 and ds.dim == 2 and ds.provenance == "ingested"
    np.testing.assert_array_equal(ds.labels, [2, 0, 7])
    np.testing.assert_array_equal(ds.features[1], [1e-3, 2.25])


def test_csv_round_trip(tmp_path):
    ds = small(5)
    write_csv(ds, tmp_path / "d.csv")
    back = ingest_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)


@pytest.mark.parametrize(
    "body, error, line",
    [
        ("label,f0,f1\n1,2,3\n1,2\n", SchemaError, 3),
        ("label,f0,f1\n1,2,3\n1,x,3\n", ParseError, 3),
        ("label,f0,f1\n-1,2,3\n", ParseError, 2),
        ("label,f0,f1\n1,2,nan\n", ParseError, 2),
        ("lbl,f0\n1,2\n", SchemaError, 1),
    ],
)
def test_csv_errors_name_the_line(tmp_path, body, error, line):
    path = tmp_path / "bad.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(error) as exc:
        ingest_csv(path)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_noise_record_export(tmp_path):
    ds = inject_symmetric_noise(small(), 0.1, Rng(3))
    write_noise_record(ds, tmp_path / "noise.csv")
    lines = (tmp_path / "noise.csv").read_text().splitlines()
    assert lines[0] == "index,original,corrupted"
    assert len(lines) == 1 + len(ds.noise_record)
