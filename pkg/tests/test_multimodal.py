import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mapembed.errors import DimensionMismatchError
from mapembed.mapper import MapModel, init_model, model_hash
from mapembed.multimodal import (
    build_conc_table,
    build_map_table,
    build_mapc_table,
    build_multimodal,
    write_sidecar,
)
from mapembed.vectors import VectorTable


def text_table(n=6, d=4, seed=0):
    rng = np.random.default_rng(seed)
    return VectorTable([f"w{i}" for i in range(n)], rng.normal(size=(n, d)), name="text")


def unit_cos(u, v):
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


def test_identity_map_equals_text():
    text = text_table()
    m = MapModel("linear", np.eye(4), np.zeros(4))
    assert np.array_equal(build_map_table(m, text).matrix, text.matrix)


def test_zero_weights_map_to_bias():
    text = text_table()
    m = MapModel("linear", np.zeros((2, 4)), np.array([0.5, -1.0]))
    table = build_map_table(m, text)
    assert all(np.array_equal(table[w], [0.5, -1.0]) for w in text.words)


def test_vocabulary_covers_all_text_words():
    text = text_table(n=9)
    tables = build_multimodal(init_model("mlp", 4, 3, 5, seed=1), text)
    assert tables.map_table.words == text.words == tables.mapc_table.words
    assert tables.map_table.name == "map" and tables.mapc_table.name == "mapc"


def test_mapc_dimension():
    text = text_table(n=3, d=300)
    mapc, _ = build_mapc_table(init_model("linear", 300, 128, seed=0), text)
    assert mapc.dim == 428


def test_mapc_example():
    text = VectorTable(["a"], [[1.0, 0.0]], name="text")
    m = MapModel("linear", np.zeros((2, 2)), np.array([3.0, 4.0]))
    mapc, degenerate = build_mapc_table(m, text)
    np.testing.assert_allclose(mapc["a"], [1.0, 0.0, 0.6, 0.8], rtol=0, atol=1e-15)
    assert degenerate == ()


def test_zero_mapped_vector_is_flagged(caplog):
    text = VectorTable(["a", "b"], [[1.0, 0.0], [0.0, 1.0]], name="text")
    # maps "b" to zero, "a" to (1, 0)
    m = MapModel("linear", np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros(2))
    with caplog.at_level(logging.WARNING):
        mapc, degenerate = build_mapc_table(m, text)
    assert degenerate == ("b",)
    assert np.array_equal(mapc["b"], [0.0, 1.0, 0.0, 0.0])
    assert "zero vector" in caplog.text


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        build_map_table(init_model("linear", 5, 2), text_table(d=4))


def test_normalize_text_flag():
    text = VectorTable(["a"], [[3.0, 4.0]], name="text")
    m = MapModel("linear", np.eye(2), np.zeros(2))
    raw, _ = build_mapc_table(m, text)
    unit, _ = build_mapc_table(m, text, normalize_text=True)
    np.testing.assert_array_equal(raw["a"][:2], [3.0, 4.0])
    np.testing.assert_allclose(unit["a"][:2], [0.6, 0.8], rtol=0, atol=1e-15)


def test_normalized_input_models_map_unit_rows():
    text = VectorTable(["a", "b"], [[3.0, 4.0], [0.6, 0.8]], name="text")
    m = MapModel("linear", np.eye(2), np.zeros(2), normalize_inputs=True)
    table = build_map_table(m, text)
    np.testing.assert_allclose(table["a"], table["b"], rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-10, 10)), st.integers(0, 2**16))
def test_mapc_structure(text_matrix, seed):
    text = VectorTable([f"w{i}" for i in range(5)], text_matrix, name="text")
    m = init_model("mlp", 3, 2, 4, seed=seed)
    m = m.with_params(b2=np.array([0.3, -0.2]))
    tables = build_multimodal(m, text)
    for w in text.words:
        row = tables.mapc_table[w]
        assert np.array_equal(row[:3], text[w])
        mapped = tables.map_table[w]
        if np.linalg.norm(mapped) == 0:
            continue
        assert np.linalg.norm(row[3:]) == pytest.approx(1.0, abs=1e-12)
    for u in text.words:
        for v in text.words:
            a, b = tables.map_table[u], tables.map_table[v]
            if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
                continue
            stripped = tables.mapc_table[u][3:] @ tables.mapc_table[v][3:]
            assert stripped == pytest.approx(unit_cos(a, b), abs=1e-12)


def test_conc_baseline():
    text = VectorTable(["a", "b", "c"], [[1.0], [2.0], [3.0]], name="text")
    visual = VectorTable(["c", "a", "z"], [[0.0, 2.0], [3.0, 4.0], [1.0, 1.0]], name="visual")
    conc = build_conc_table(text, visual)
    assert conc.words == ("a", "c") and conc.name == "conc" and conc.dim == 3
    np.testing.assert_allclose(conc["a"], [1.0, 0.6, 0.8], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(conc["c"], [3.0, 0.0, 1.0])


def test_conc_empty_intersection():
    conc = build_conc_table(VectorTable(["a"], [[1.0]]), VectorTable(["b"], [[1.0, 2.0]]))
    assert len(conc) == 0 and conc.dim == 3


def test_sidecar(tmp_path):
    m = init_model("linear", 4, 2, seed=0)
    table = build_map_table(m, text_table())
    write_sidecar(table, tmp_path / "map.json", m)
    doc = json.loads((tmp_path / "map.json").read_text())
    assert doc == {"name": "map", "dim": 2, "source_model_hash": model_hash(m)}
    write_sidecar(table, tmp_path / "x.json")
    assert json.loads((tmp_path / "x.json").read_text())["source_model_hash"] is None
