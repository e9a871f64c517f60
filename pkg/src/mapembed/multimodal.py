"""MAP and MAP-C tables built from a trained mapping.

MAP is ``f(l_w)`` for every word of the text table, including words that had
no visual training vector. MAP-C is ``l_w`` followed by the unit-normalized
``f(l_w)``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError
from .mapper import MapModel, forward_batch, model_hash, normalize_rows
from .vectors import VectorTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultimodalTables:
    map_table: VectorTable
    mapc_table: VectorTable
    degenerate: tuple[str, ...] = ()


def _mapped(model: MapModel, text_table: VectorTable) -> np.ndarray:
    if text_table.dim != model.d_l:
        raise DimensionMismatchError(
            f"text table dim {text_table.dim} does not match model input dim {model.d_l}"
        )
    if len(text_table) == 0:
        return np.zeros((0, model.d_v))
    X = text_table.matrix
    if model.normalize_inputs:
        X = normalize_rows(X)
    return forward_batch(model, X)


def build_map_table(model: MapModel, text_table: VectorTable) -> VectorTable:
    return VectorTable(text_table.words, _mapped(model, text_table), name="map", dim=model.d_v)


def build_mapc_table(model: MapModel, text_table: VectorTable,
                     normalize_text: bool = False) -> tuple[VectorTable, tuple[str, ...]]:
    """Concatenate each text vector with its unit-normalized mapped vector.

    A word whose mapped vector has zero norm keeps an all-zero mapped block
    and is listed in the returned tuple of degenerate words. With
    ``normalize_text`` the text half is unit-normalized as well.
    """
    mapped = _mapped(model, text_table)
    norms = np.linalg.norm(mapped, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    unit = np.divide(mapped, norms, out=np.zeros_like(mapped), where=~zero[:, None])
    text = text_table.matrix
    if normalize_text:
        tnorms = np.linalg.norm(text, axis=1, keepdims=True)
        text = np.divide(text, tnorms, out=np.zeros_like(text), where=tnorms > 0)
    degenerate = tuple(w for w, z in zip(text_table.words, zero) if z)
    if degenerate:
        logger.warning("%d word(s) map to a zero vector; their mapped block is left at zero",
                       len(degenerate))
    table = VectorTable(text_table.words, np.hstack([text, unit]), name="mapc",
                        dim=text_table.dim + model.d_v)
    return table, degenerate


def build_multimodal(model: MapModel, text_table: VectorTable,
                     normalize_text: bool = False) -> MultimodalTables:
    mapc, degenerate = build_mapc_table(model, text_table, normalize_text)
    return MultimodalTables(build_map_table(model, text_table), mapc, degenerate)


def build_conc_table(text_table: VectorTable, visual_table: VectorTable) -> VectorTable:
    """Baseline: text vector followed by the unit-normalized raw visual vector.

    Only words present in both tables get an entry.
    """
    words = sorted(text_table.vocab() & visual_table.vocab())
    if not words:
        return VectorTable((), np.zeros((0, 1)), name="conc", dim=text_table.dim + visual_table.dim)
    vis = visual_table.rows(words)
    norms = np.linalg.norm(vis, axis=1, keepdims=True)
    unit = np.divide(vis, norms, out=np.zeros_like(vis), where=norms > 0)
    return VectorTable(words, np.hstack([text_table.rows(words), unit]), name="conc")


def write_sidecar(table: VectorTable, path, model: MapModel | None = None) -> None:
    """JSON metadata next to a written table: name, dim and source model hash."""
    doc = {
        "name": table.name,
        "dim": table.dim,
        "source_model_hash": model_hash(model) if model is not None else None,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
