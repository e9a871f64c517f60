import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mapembed.errors import DataError, DegenerateVectorError, DimensionMismatchError
from mapembed.vectors import (
    VectorTable,
    concat,
    cosine,
    l2_normalize,
    load_text_embeddings,
    write_text_embeddings,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


def nonzero_vectors(dim):
    return arrays(np.float64, dim, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_load_simple(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("a 1.0 2.0\nb 0.5 0.5\n")
    table = load_text_embeddings(p)
    assert table.dim == 2
    assert table.words == ("a", "b")
    np.testing.assert_array_equal(table["a"], [1.0, 2.0])
    np.testing.assert_array_equal(table["b"], [0.5, 0.5])


def test_load_dimension_mismatch_names_line(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("a 1.0 2.0\nb 3.0\n")
    with pytest.raises(DimensionMismatchError, match=":2:"):
        load_text_embeddings(p)


def test_load_expected_dim(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("a 1.0 2.0\n")
    assert load_text_embeddings(p, expected_dim=2).dim == 2
    with pytest.raises(DimensionMismatchError):
        load_text_embeddings(p, expected_dim=3)


@pytest.mark.parametrize(
    "content, exc",
    [
        ("", DataError),
        ("\n\n", DataError),
        ("a 1.0 x\n", DataError),
        ("a 1.0 nan\n", DataError),
        ("a 1.0\nA 2.0\n", DataError),  # duplicate after lowercasing
        ("a 1.0\na 2.0\n", DataError),
    ],
)
def test_load_errors(tmp_path, content, exc):
    p = tmp_path / "emb.txt"
    p.write_text(content)
    with pytest.raises(exc):
        load_text_embeddings(p)


def test_load_lowercases_unless_disabled(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("Dog 1.0\ncat 2.0\n")
    assert load_text_embeddings(p).words == ("dog", "cat")
    assert load_text_embeddings(p, lowercase=False).words == ("Dog", "cat")


def test_glove_excerpt_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    words = ["the", "dog", "garage"]
    # GloVe-style 5-decimal values plus full-precision ones
    m = np.vstack([np.round(rng.normal(0, 0.4, 300), 5), rng.normal(0, 0.4, (2, 300))])
    src = tmp_path / "glove.txt"
    src.write_text("".join(w + " " + " ".join(f"{x:.5f}" if i == 0 else repr(float(x)) for x in row) + "\n"
                           for i, (w, row) in enumerate(zip(words, m))))
    first = load_text_embeddings(src)
    out = tmp_path / "again.txt"
    write_text_embeddings(first, out)
    second = load_text_embeddings(out)
    assert first == second
    assert first.dim == 300 and len(first) == 3
    assert np.array_equal(second.matrix[1:], m[1:])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 7), elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_write_load_identity(tmp_path_factory, m):
    table = VectorTable([f"w{i}" for i in range(4)], m, name="text")
    path = tmp_path_factory.mktemp("rt") / "t.txt"
    write_text_embeddings(table, path)
    again = load_text_embeddings(path)
    assert again == table
    # bitwise, including signed zeros
    assert again.matrix.tobytes() == table.matrix.tobytes()


def test_table_is_immutable():
    t = VectorTable(["a"], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        t.matrix[0, 0] = 5.0
    with pytest.raises(ValueError):
        t["a"][0] = 5.0


@pytest.mark.parametrize("words, matrix", [
    (["a", "a"], [[1.0], [2.0]]),
    (["a b"], [[1.0]]),
    ([""], [[1.0]]),
    (["a"], [[float("inf")]]),
])
def test_table_rejects_bad_entries(words, matrix):
    with pytest.raises(DataError):
        VectorTable(words, matrix)


def test_table_rejects_ragged_shape():
    with pytest.raises(DimensionMismatchError):
        VectorTable(["a", "b"], [[1.0, 2.0]])


def test_l2_normalize_examples():
    np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(l2_normalize([0.0, 0.0, 1.0]), [0.0, 0.0, 1.0])
    with pytest.raises(DegenerateVectorError):
        l2_normalize([0.0, 0.0])


def test_cosine_examples():
    assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine([1.0, 0.0], [1.0, 1.0]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert cosine([2.0, -3.0, 0.5], [2.0, -3.0, 0.5]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DimensionMismatchError):
        cosine([1.0], [1.0, 2.0])
    with pytest.raises(DegenerateVectorError):
        cosine([0.0, 0.0], [1.0, 2.0])


def test_cosine_is_clamped():
    v = np.array([0.1, 0.2, 0.3]) * (1 + 1e-16)
    for _ in range(100):
        c = cosine(v, v * 3.0)
        assert -1.0 <= c <= 1.0


def test_concat_examples():
    np.testing.assert_array_equal(concat([1.0, 2.0], [3.0]), [1.0, 2.0, 3.0])
    assert concat(np.ones(300), np.ones(128)).size == 428
    with pytest.raises(DimensionMismatchError):
        concat([1.0], [])


@settings(max_examples=200, deadline=None)
@given(nonzero_vectors(5), nonzero_vectors(5),
       st.floats(min_value=1e-3, max_value=1e3), st.floats(min_value=1e-3, max_value=1e3))
def test_cosine_scale_invariance(u, v, a, b):
    assert cosine(a * u, b * v) == pytest.approx(cosine(u, v), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(nonzero_vectors(6))
def test_l2_normalize_idempotent(v):
    once = l2_normalize(v)
    assert np.linalg.norm(once) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(l2_normalize(once), once, rtol=0, atol=1e-12)


@given(arrays(np.float64, 2, elements=finite), arrays(np.float64, 3, elements=finite),
       arrays(np.float64, 1, elements=finite))
def test_concat_associative(u, v, w):
    assert np.array_equal(concat(concat(u, v), w), concat(u, concat(v, w)))
