import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cxrseverity.dataset import (
    ClassLabel,
    DuplicatePathError,
    LabeledDataset,
    MalformedRowError,
    load_manifest,
    one_hot,
    severity_class,
    stratified_folds,
    stratified_split,
    stratified_split_indices,
)


@pytest.mark.parametrize("scores,expected", [
    ([2, 2, 2, 2, 2, 2], ClassLabel.SEVERE),
    ([0, 0, 0, 0, 0, 0], ClassLabel.NORMAL),
    ([2, 2, 2, 1, 1, 0], ClassLabel.NON_SEVERE),
    ([2, 2, 2, 2, 1, 0], ClassLabel.SEVERE),
    ([1, 0, 0, 0, 0, 0], ClassLabel.NON_SEVERE),
])
def test_severity_thresholds(scores, expected):
    assert severity_class(scores) == expected


def test_severity_exhaustive():
    for scores in itertools.product(range(3), repeat=6):
        total = sum(scores)
        expected = 0 if total == 0 else (1 if total <= 8 else 2)
        assert severity_class(scores) == expected


@pytest.mark.parametrize("bad", [[3, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0], [0] * 7, [-1, 0, 0, 0, 0, 0]])
def test_severity_rejects_bad_scores(bad):
    with pytest.raises(ValueError):
        severity_class(bad)


def test_one_hot():
    assert one_hot(ClassLabel.NORMAL, 3).tolist() == [1, 0, 0]
    assert one_hot(ClassLabel.NON_SEVERE, 3).tolist() == [0, 1, 0]
    assert one_hot(ClassLabel.SEVERE, 3).tolist() == [0, 0, 1]
    with pytest.raises(IndexError):
        one_hot(ClassLabel.SEVERE, 2)


@given(st.integers(1, 10).flatmap(lambda k: st.tuples(st.integers(0, k - 1), st.just(k))))
def test_one_hot_sums_to_one(args):
    assert one_hot(*args).sum() == 1.0


def test_label_parsing():
    assert ClassLabel.parse("Non-Severe") is ClassLabel.NON_SEVERE
    assert ClassLabel.parse(" severe ") is ClassLabel.SEVERE
    with pytest.raises(ValueError):
        ClassLabel.parse("mild")


def write(tmp_path, text, name="m.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_manifest_with_labels(tmp_path):
    m = load_manifest(write(tmp_path, "path,label\nimg1.pgm,severe\nimg0.pgm,normal\n"))
    assert m.paths == ["img1.pgm", "img0.pgm"]
    assert m.labels.tolist() == [ClassLabel.SEVERE, ClassLabel.NORMAL]
    assert m.resolve(0) == tmp_path / "img1.pgm"
    assert m.class_counts() == {"normal": 1, "non_severe": 0, "severe": 1}


def test_manifest_with_region_scores(tmp_path):
    m = load_manifest(write(tmp_path, "path,r1,r2,r3,r4,r5,r6\nimg2.pgm,2,2,2,2,2,0\n"))
    assert m.labels.tolist() == [ClassLabel.SEVERE]
    assert m.scores == [(2, 2, 2, 2, 2, 0)]


def test_manifest_bad_label_names_line(tmp_path):
    p = write(tmp_path, "path,label\nimg1.pgm,severe\nimg3.pgm,bad\n")
    with pytest.raises(MalformedRowError, match="line 3") as exc:
        load_manifest(p)
    assert exc.value.line == 3


@pytest.mark.parametrize("text,line", [
    ("path,label\na.pgm\n", 2),
    ("path,r1,r2,r3,r4,r5,r6\na.pgm,1,1,1,1,1,x\n", 2),
    ("path,r1,r2,r3,r4,r5,r6\na.pgm,1,1,1,1,1,3\n", 2),
    ("file,label\na.pgm,normal\n", 1),
])
def test_manifest_malformed_rows(tmp_path, text, line):
    with pytest.raises(MalformedRowError) as exc:
        load_manifest(write(tmp_path, text))
    assert exc.value.line == line


def test_manifest_duplicate_path(tmp_path):
    with pytest.raises(DuplicatePathError, match="line 3"):
        load_manifest(write(tmp_path, "path,label\na.pgm,normal\na.pgm,severe\n"))


def test_split_sizes_for_balanced_classes():
    labels = np.repeat([0, 1, 2], 584)
    train, test = stratified_split_indices(labels, 0.2, seed=1)
    assert np.bincount(labels[test]).tolist() == [116, 116, 116]
    assert np.bincount(labels[train]).tolist() == [468, 468, 468]


def test_split_warns_when_class_gets_no_test_rows():
    labels = np.array([0] * 20 + [1] * 3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, test = stratified_split_indices(labels, 0.2, seed=0)
    assert np.sum(labels[test] == 1) == 0
    assert any("no test samples" in str(w.message) for w in caught)


def test_split_deterministic_and_seed_sensitive():
    labels = np.repeat([0, 1, 2], 30)
    a = stratified_split_indices(labels, 0.3, 7)
    b = stratified_split_indices(labels, 0.3, 7)
    c = stratified_split_indices(labels, 0.3, 8)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[1], c[1])


def test_split_requires_two_per_class():
    with pytest.raises(ValueError):
        stratified_split_indices(np.array([0, 0, 1]), 0.5, 0)
    with pytest.raises(ValueError):
        stratified_split_indices(np.array([0, 0, 1, 1]), 1.0, 0)


@given(st.lists(st.integers(2, 40), min_size=1, max_size=4), st.floats(0.05, 0.95), st.integers(0, 99))
def test_split_is_disjoint_cover_and_proportional(sizes, frac, seed):
    labels = np.concatenate([np.full(n, c) for c, n in enumerate(sizes)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        train, test = stratified_split_indices(labels, frac, seed)
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(len(labels)))
    for c, n in enumerate(sizes):
        assert abs(np.sum(labels[test] == c) - n * frac) < 1.0


def test_split_of_labeled_dataset_and_manifest(tmp_path):
    ds = LabeledDataset(np.arange(20.0).reshape(10, 2), [0] * 5 + [1] * 5)
    train, test = stratified_split(ds, 0.4, seed=3)
    assert len(train) == 6 and len(test) == 4
    rows = {tuple(r) for r in train.X} | {tuple(r) for r in test.X}
    assert len(rows) == 10
    text = "path,label\n" + "".join(f"i{i}.pgm,{'normal' if i < 4 else 'severe'}\n" for i in range(8))
    mtrain, mtest = stratified_split(load_manifest(write(tmp_path, text)), 0.5, 0)
    assert sorted(mtrain.paths + mtest.paths) == sorted(f"i{i}.pgm" for i in range(8))


def test_stratified_folds():
    labels = np.repeat([0, 1, 2], [10, 7, 5])
    folds = stratified_folds(labels, 5, 0)
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(len(labels)))
    for f in folds:
        assert np.sum(labels[f] == 2) == 1
    with pytest.raises(ValueError):
        stratified_folds(labels, 6, 0)
