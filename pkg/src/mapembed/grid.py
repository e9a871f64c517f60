"""Learning-rate x dropout sweep, plus the two reported presets.

Every cell trains its own model with a seed derived from the master seed and
the cell index, so any single cell can be rerun in isolation.
"""
from __future__ import annotations

import itertools
import json
import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DivergenceError
from .evaluation import (REGIONS, EvalResult, SimilarityBenchmark, evaluate, format_rho,
                         rows_to_tsv)
from .mapper import PRESETS, TrainConfig, train
from .multimodal import build_multimodal
from .vectors import VectorTable

logger = logging.getLogger(__name__)

LEARNING_RATES = (0.1, 0.01, 0.005)
DROPOUT_RATES = (0.5, 0.25, 0.1)


def cell_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(master_seed, spawn_key=(index,)).generate_state(1)[0])


@dataclass(frozen=True)
class CellSpec:
    index: int
    label: str
    kind: str
    config: TrainConfig
    preset: str = ""


@dataclass
class CellResult:
    spec: CellSpec
    status: str = "ok"
    error: str = ""
    final_loss: float | None = None
    results: list[EvalResult] = field(default_factory=list)


def grid_cells(kind: str, base: TrainConfig = TrainConfig(), master_seed: int = 0) -> list[CellSpec]:
    """The 9 sweep cells for ``kind`` followed by the two preset cells."""
    cells = []
    for i, (lr, p) in enumerate(itertools.product(LEARNING_RATES, DROPOUT_RATES)):
        cfg = replace(base, learning_rate=lr, dropout_rate=p, seed=cell_seed(master_seed, i))
        cells.append(CellSpec(i, f"lr={lr}/dropout={p}", kind, cfg))
    for name, settings in PRESETS.items():
        i = len(cells)
        settings = dict(settings)
        preset_kind = settings.pop("kind")
        cfg = replace(base, seed=cell_seed(master_seed, i), **settings)
        cells.append(CellSpec(i, name, preset_kind, cfg, preset=name))
    return cells


def run_cell(cell: CellSpec, text_table: VectorTable, visual_table: VectorTable,
             benchmarks: Sequence[SimilarityBenchmark], normalize_text: bool = False) -> CellResult:
    """Train, build MAP and MAP-C, and evaluate both on every benchmark."""
    try:
        model, report = train(text_table, visual_table, cell.kind, cell.config)
    except DivergenceError as exc:
        logger.warning("cell %d (%s) diverged: %s", cell.index, cell.label, exc)
        return CellResult(cell, status="diverged", error=str(exc))
    tables = build_multimodal(model, text_table, normalize_text)
    vocab = visual_table.vocab()
    results = [
        evaluate(table, bench, vocab)
        for table in (tables.map_table, tables.mapc_table)
        for bench in benchmarks
    ]
    return CellResult(cell, final_loss=report.final_loss, results=results)


def grid_search(text_table: VectorTable, visual_table: VectorTable, kind: str,
                benchmarks: Sequence[SimilarityBenchmark], base: TrainConfig = TrainConfig(),
                master_seed: int = 0, normalize_text: bool = False) -> list[CellResult]:
    """Run the 9-cell sweep and the preset rows. Divergent cells are reported, not raised."""
    return [
        run_cell(cell, text_table, visual_table, benchmarks, normalize_text)
        for cell in grid_cells(kind, base, master_seed)
    ]


GRID_COLUMNS = ("cell", "label", "preset", "kind", "learning_rate", "dropout_rate", "seed",
                "status", "table", "benchmark", "region", "rho", "n_pairs", "n_skipped_oov")


def grid_rows(cells: Sequence[CellResult]) -> list[dict]:
    rows = []
    for c in cells:
        head = {
            "cell": c.spec.index,
            "label": c.spec.label,
            "preset": c.spec.preset or "-",
            "kind": c.spec.kind,
            "learning_rate": c.spec.config.learning_rate,
            "dropout_rate": c.spec.config.dropout_rate,
            "seed": c.spec.config.seed,
            "status": c.status,
        }
        if not c.results:
            rows.append({**head, "table": "-", "benchmark": "-", "region": "-", "rho": "NA",
                         "n_pairs": 0, "n_skipped_oov": 0})
        for res in c.results:
            for region in REGIONS:
                r = res.regions[region]
                rows.append({**head, "table": res.table, "benchmark": res.benchmark,
                             "region": region, "rho": format_rho(r.rho), "n_pairs": r.n_pairs,
                             "n_skipped_oov": r.n_skipped_oov})
    return rows


def grid_to_tsv(cells: Sequence[CellResult]) -> str:
    return rows_to_tsv(grid_rows(cells), GRID_COLUMNS)


def grid_to_json(cells: Sequence[CellResult]) -> str:
    doc = [
        {
            "cell": c.spec.index,
            "label": c.spec.label,
            "preset": c.spec.preset or None,
            "kind": c.spec.kind,
            "config": asdict(c.spec.config),
            "status": c.status,
            "error": c.error,
            "final_loss": c.final_loss,
            "results": [r.to_dict() for r in c.results],
        }
        for c in cells
    ]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def best_cell(cells: Sequence[CellResult], benchmark: str, table: str = "mapc",
              region: str = "ALL") -> CellResult | None:
    """Cell with the highest rho for ``table`` on ``benchmark``/``region``."""
    best, best_rho = None, -np.inf
    for c in cells:
        for res in c.results:
            rho = res.regions[region].rho
            if res.table == table and res.benchmark == benchmark and rho is not None and rho > best_rho:
                best, best_rho = c, rho
    return best
