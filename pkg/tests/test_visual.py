import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapembed.errors import DataError, DimensionMismatchError
from mapembed.visual import (
    PAPER_POLICY,
    AggregationPolicy,
    FeatureRecord,
    aggregate_mean,
    load_feature_records,
    write_feature_records,
)


def rec(concept, image_id, *values):
    return FeatureRecord(concept, image_id, np.array(values, dtype=float))


def test_parse_single_line(tmp_path):
    p = tmp_path / "f.tsv"
    p.write_text("dog\timg1\t1.0,3.0\n")
    [r] = load_feature_records(p)
    assert (r.concept, r.image_id) == ("dog", "img1")
    np.testing.assert_array_equal(r.features, [1.0, 3.0])


def test_dimension_mismatch_reports_line(tmp_path):
    p = tmp_path / "f.tsv"
    p.write_text("a\t1\t" + ",".join(["0.5"] * 128) + "\nb\t2\t" + ",".join(["0.5"] * 127) + "\n")
    with pytest.raises(DimensionMismatchError, match=":2:"):
        load_feature_records(p)


def test_empty_file_is_empty(tmp_path):
    p = tmp_path / "f.tsv"
    p.write_text("")
    assert load_feature_records(p) == []


@pytest.mark.parametrize("line", ["dog\timg1\n", "dog img1 1.0\n", "dog\timg1\t1.0,x\n",
                                  "\timg1\t1.0\n", "dog\timg1\t1.0,inf\n"])
def test_malformed_lines(tmp_path, line):
    p = tmp_path / "f.tsv"
    p.write_text(line)
    with pytest.raises(DataError):
        load_feature_records(p)


def test_write_then_load(tmp_path):
    records = [rec("dog", "a", 0.1, 1 / 3), rec("cat", "b", -2.5, 1e-300)]
    p = tmp_path / "f.tsv"
    write_feature_records(records, p)
    again = load_feature_records(p)
    for r, s in zip(records, again):
        assert (r.concept, r.image_id) == (s.concept, s.image_id)
        assert np.array_equal(r.features, s.features)


def test_mean_of_two():
    table, report = aggregate_mean([rec("dog", "1", 1, 3), rec("dog", "2", 3, 1)],
                                   AggregationPolicy(min_images=1, max_images=500))
    np.testing.assert_array_equal(table["dog"], [2.0, 2.0])
    assert report.concepts_kept == 1 and report.d_v == 2


def test_floor_drops_and_reports():
    records = [rec("dog", f"{i:03d}", i) for i in range(49)] + [rec("cat", f"{i:03d}", i) for i in range(50)]
    table, report = aggregate_mean(records, AggregationPolicy(min_images=50, max_images=500))
    assert "dog" not in table and "cat" in table
    assert report.concepts_dropped == {"dog": 49}


def test_paper_policy_requires_more_than_fifty():
    records = [rec("dog", f"{i:03d}", i) for i in range(50)] + [rec("cat", f"{i:03d}", i) for i in range(51)]
    table, report = aggregate_mean(records, PAPER_POLICY)
    assert table.words == ("cat",)
    assert report.concepts_dropped == {"dog": 50}


def test_cap_uses_lexicographically_first_ids():
    rng = np.random.default_rng(0)
    ids = [f"n0001_{i}" for i in range(600)]
    values = {i: float(k) for k, i in enumerate(ids)}
    records = [rec("dog", i, values[i]) for i in rng.permutation(ids)]
    table, report = aggregate_mean(records, AggregationPolicy(min_images=1, max_images=500))
    kept = sorted(ids)[:500]  # lexicographic, so "n0001_10" precedes "n0001_2"
    expected = sum(values[i] for i in kept) / 500
    assert table["dog"][0] == pytest.approx(expected, rel=1e-15)
    assert report.concepts_capped == {"dog": 600}


def test_report_json_schema():
    _, report = aggregate_mean([rec("a", "1", 1.0), rec("b", "1", 2.0), rec("b", "2", 2.0)],
                               AggregationPolicy(min_images=2, max_images=500))
    doc = json.loads(report.to_json())
    assert doc == {"concepts_kept": 1, "concepts_dropped": {"a": 1}, "concepts_capped": {}, "d_v": 1}


def test_empty_input():
    table, report = aggregate_mean([], AggregationPolicy(1, 2))
    assert len(table) == 0 and report.concepts_kept == 0


def test_in_memory_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        aggregate_mean([rec("a", "1", 1.0), rec("a", "2", 1.0, 2.0)], AggregationPolicy(1, 2))


def test_policy_validation():
    with pytest.raises(ValueError):
        AggregationPolicy(min_images=10, max_images=5)
    with pytest.raises(ValueError):
        AggregationPolicy(min_images=0)


record_lists = st.lists(
    st.tuples(st.sampled_from("abcde"), st.integers(0, 30),
              st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3)),
    min_size=1, max_size=60,
).map(lambda rows: [FeatureRecord(c, f"img{i}", np.array(f)) for c, i, f in rows])


@settings(max_examples=100, deadline=None)
@given(record_lists, st.integers(1, 4), st.integers(0, 10), st.randoms(use_true_random=False))
def test_aggregation_properties(records, floor, extra, rnd):
    policy = AggregationPolicy(min_images=floor, max_images=floor + extra)
    table, report = aggregate_mean(records, policy)

    shuffled = list(records)
    rnd.shuffle(shuffled)
    again, _ = aggregate_mean(shuffled, policy)
    assert again == table  # bitwise, order-independent

    concepts = {r.concept for r in records}
    assert len(table) + len(report.concepts_dropped) == len(concepts)

    for word in table:
        feats = np.array([r.features for r in records if r.concept == word])
        assert np.all(feats.min(axis=0) <= table[word])
        assert np.all(table[word] <= feats.max(axis=0))
