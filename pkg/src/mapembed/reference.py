"""Published Spearman correlations for full-scale replication runs.

Values are keyed ``row -> benchmark -> (ALL, VIS, ZS)``; ``None`` marks cells
that were not reported (visual-only rows have no ALL/ZS score). Benchmarks
use the canonical names of :data:`mapembed.evaluation.REFERENCE_BENCHMARKS`.
Reproducing them requires 300-d GloVe (Common Crawl 840B) and 128-d
VGG-m-128 ImageNet features; nothing at desk scale approaches them.
"""
from __future__ import annotations

from dataclasses import dataclass

from .evaluation import REGIONS

_ = None

REFERENCE_RHO: dict[str, dict[str, tuple]] = {
    "glove": {
        "wordsim353": (0.712, 0.632, 0.705), "men": (0.805, 0.801, 0.801),
        "semsim": (0.753, 0.768, 0.701), "vissim": (0.591, 0.606, 0.54),
        "simlex999": (0.408, 0.371, 0.429), "wordsim353-rel": (0.644, 0.759, 0.619),
        "wordsim353-sim": (0.802, 0.688, 0.783), "simverb3500": (0.283, 0.32, 0.282),
    },
    "cnn_avg": {
        "wordsim353": (_, 0.448, _), "men": (_, 0.593, _), "semsim": (_, 0.534, _),
        "vissim": (_, 0.56, _), "simlex999": (_, 0.406, _), "wordsim353-rel": (_, 0.422, _),
        "wordsim353-sim": (_, 0.526, _), "simverb3500": (_, 0.235, _),
    },
    "conc": {
        "wordsim353": (_, 0.606, _), "men": (_, 0.8, _), "semsim": (_, 0.734, _),
        "vissim": (_, 0.651, _), "simlex999": (_, 0.442, _), "wordsim353-rel": (_, 0.665, _),
        "wordsim353-sim": (_, 0.664, _), "simverb3500": (_, 0.437, _),
    },
    "map_nn": {
        "wordsim353": (0.443, 0.534, 0.391), "men": (0.703, 0.761, 0.68),
        "semsim": (0.729, 0.732, 0.718), "vissim": (0.658, 0.659, 0.655),
        "simlex999": (0.322, 0.451, 0.296), "wordsim353-rel": (0.33, 0.606, 0.267),
        "wordsim353-sim": (0.536, 0.599, 0.475), "simverb3500": (0.213, 0.513, 0.21),
    },
    "map_lin": {
        "wordsim353": (0.402, 0.539, 0.366), "men": (0.701, 0.774, 0.674),
        "semsim": (0.738, 0.738, 0.74), "vissim": (0.646, 0.644, 0.651),
        "simlex999": (0.322, 0.412, 0.286), "wordsim353-rel": (0.28, 0.553, 0.243),
        "wordsim353-sim": (0.505, 0.569, 0.477), "simverb3500": (0.212, 0.338, 0.21),
    },
    "mapc_nn": {
        "wordsim353": (0.687, 0.644, 0.673), "men": (0.813, 0.82, 0.806),
        "semsim": (0.783, 0.791, 0.754), "vissim": (0.65, 0.657, 0.626),
        "simlex999": (0.405, 0.404, 0.417), "wordsim353-rel": (0.623, 0.778, 0.589),
        "wordsim353-sim": (0.769, 0.696, 0.745), "simverb3500": (0.286, 0.49, 0.284),
    },
    "mapc_lin": {
        "wordsim353": (0.694, 0.649, 0.684), "men": (0.811, 0.819, 0.802),
        "semsim": (0.785, 0.791, 0.764), "vissim": (0.641, 0.647, 0.623),
        "simlex999": (0.41, 0.388, 0.422), "wordsim353-rel": (0.629, 0.797, 0.601),
        "wordsim353-sim": (0.781, 0.698, 0.766), "simverb3500": (0.286, 0.371, 0.285),
    },
}

# Pairs per region (ALL, VIS, ZS).
REFERENCE_COUNTS: dict[str, tuple[int, int, int]] = {
    "wordsim353": (353, 63, 290), "men": (3000, 795, 2205), "semsim": (6933, 5238, 1695),
    "vissim": (6933, 5238, 1695), "simlex999": (999, 261, 738),
    "wordsim353-rel": (252, 28, 224), "wordsim353-sim": (203, 45, 158),
    "simverb3500": (3500, 41, 3459),
}

REPLICATION_TOLERANCE = 0.03


@dataclass(frozen=True)
class Comparison:
    row: str
    benchmark: str
    region: str
    observed: float | None
    reference: float

    @property
    def delta(self) -> float | None:
        return None if self.observed is None else self.observed - self.reference

    def within(self, tol: float = REPLICATION_TOLERANCE) -> bool:
        return self.observed is not None and abs(self.delta) <= tol


def compare(row: str, observed: dict[str, dict[str, float | None]]) -> list[Comparison]:
    """Pair observed ``{benchmark: {region: rho}}`` with the reference row.

    Benchmarks missing from ``observed`` are skipped; so are unreported cells.
    """
    out = []
    for bench, refs in REFERENCE_RHO[row].items():
        if bench not in observed:
            continue
        for region, ref in zip(REGIONS, refs):
            if ref is not None:
                out.append(Comparison(row, bench, region, observed[bench].get(region), ref))
    return out
