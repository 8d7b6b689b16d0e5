import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from privmail.exceptions import DuplicateId, ParseError
from privmail.io import load_features, parse_features, read_results, save_features, write_results
from privmail.retrieval import FeatureDataset, SweepRow
from privmail.synthetic import generate_synthetic, split_roles


def test_two_row_file(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("id,label,f0,f1\na,0,1.5,2\nb,3,-1e-3,4\n")
    ds = load_features(path)
    assert len(ds) == 2
    assert list(ds.ids) == ["a", "b"]
    assert ds.labels.tolist() == [0, 3]
    np.testing.assert_array_equal(ds.features, [[1.5, 2.0], [-1e-3, 4.0]])


@pytest.mark.parametrize("body,line,fragment", [
    ("a,0,1,2\nb,1,abc,2\n", 3, "not a number"),
    ("a,0,1,2\nb,1,nan,2\n", 3, "non-finite"),
    ("a,0,1,inf\n", 2, "non-finite"),
    ("a,0,1\n", 2, "columns"),
    ("a,x,1,2\n", 2, "label"),
    ("a,-2,1,2\n", 2, "negative"),
])
def test_parse_errors_name_line(body, line, fragment):
    with pytest.raises(ParseError) as err:
        parse_features("id,label,f0,f1\n" + body, path="feat.csv")
    assert err.value.line == line
    assert fragment in str(err.value)
    assert f"feat.csv:{line}" in str(err.value)


def test_bad_header_and_empty():
    with pytest.raises(ParseError):
        parse_features("name,label,f0\na,0,1\n")
    with pytest.raises(ParseError):
        parse_features("")
    with pytest.raises(ParseError):
        parse_features("id,label,f0\n")


def test_duplicate_id():
    with pytest.raises(DuplicateId) as err:
        parse_features("id,label,f0\na,0,1\nb,0,2\na,1,3\n")
    assert err.value.identifier == "a"
    assert err.value.line == 4


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_features(tmp_path / "nope.csv")


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_round_trip_is_lossless(tmp_path_factory, feats):
    path = tmp_path_factory.mktemp("rt") / "ds.csv"
    labels = np.arange(len(feats)) % 3
    ds = FeatureDataset([f"r{i}" for i in range(len(feats))], feats, labels)
    save_features(ds, path)
    back = load_features(path)
    assert list(back.ids) == list(ds.ids)
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.features, ds.features)


def test_results_round_trip(tmp_path):
    rows = [SweepRow(0.1, 0.5, 0.1, 3, 1e-7, 2e-5), SweepRow(1.0, 0.75, 0.0, 3, 1e-7, 2e-6)]
    write_results(tmp_path / "r.csv", rows, {"seed": 4})
    meta, back = read_results(tmp_path / "r.csv")
    assert meta == {"seed": "4"}
    assert [r["mean_recall"] for r in back] == [0.5, 0.75]
    assert back[1]["noise_stddev"] == 2e-6


def test_synthetic_single_point():
    ds = generate_synthetic(1, 1, 3, seed=0)
    assert len(ds) == 1


def test_synthetic_nearest_center_accuracy():
    ds = generate_synthetic(5, 20, 16, 0.05, seed=0)
    centers = np.array([ds.features[ds.labels == c].mean(axis=0) for c in range(5)])
    true_centers = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    pred = np.argmin(((ds.features[:, None] - true_centers[None]) ** 2).sum(-1), axis=1)
    assert np.mean(pred == ds.labels) >= 0.99


def test_synthetic_same_seed_same_bytes(tmp_path):
    save_features(generate_synthetic(4, 5, 6, seed=9), tmp_path / "a.csv")
    save_features(generate_synthetic(4, 5, 6, seed=9), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_split_roles_partition():
    ds = generate_synthetic(3, 10, 4, seed=1)
    q, p, s = split_roles(ds, 2, 3, seed=0)
    assert (len(q), len(p), len(s)) == (9, 6, 15)
    assert set(q.ids) | set(p.ids) | set(s.ids) == set(ds.ids)
    assert not set(q.ids) & set(p.ids)
