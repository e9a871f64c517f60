"""Word-similarity benchmarks scored with Spearman correlation.

Each benchmark is split into a VIS region (both words have a visual training
vector) and its complement ZS. Pairs with a word missing from the evaluated
table are skipped and counted, never silently dropped.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Collection, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateStatisticsError, DegenerateVectorError
from .vectors import VectorTable, cosine

REGIONS = ("ALL", "VIS", "ZS")

# Column order of the reference results table.
REFERENCE_BENCHMARKS = (
    "wordsim353", "men", "semsim", "vissim",
    "simlex999", "wordsim353-rel", "wordsim353-sim", "simverb3500",
)
# Reported only for completeness: its two subsets are the actual tests.
REDUNDANT_BENCHMARKS = frozenset({"wordsim353"})


@dataclass(frozen=True)
class SimilarityBenchmark:
    name: str
    pairs: tuple[tuple[str, str, float], ...]

    def __post_init__(self):
        seen = set()
        for w1, w2, rating in self.pairs:
            if not math.isfinite(rating):
                raise DataError(f"{self.name}: non-finite rating for ({w1}, {w2})")
            if (w1, w2) in seen:
                raise DataError(f"{self.name}: duplicate pair ({w1}, {w2})")
            seen.add((w1, w2))

    @property
    def redundant(self) -> bool:
        return self.name in REDUNDANT_BENCHMARKS

    def __len__(self) -> int:
        return len(self.pairs)


def load_benchmark(path, format_hint: str = "auto", name: str | None = None) -> SimilarityBenchmark:
    """Parse ``word1 word2 rating`` lines.

    ``format_hint`` is ``"tsv"`` (tab-separated), ``"space"`` (any whitespace)
    or ``"auto"`` (tab if the line has one, whitespace otherwise). Lines
    starting with ``#`` and blank lines are skipped; words are lowercased.
    """
    if format_hint not in ("auto", "tsv", "space"):
        raise ValueError(f"unknown benchmark format {format_hint!r}")
    path = Path(path)
    name = name or path.stem.lower()
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if format_hint == "tsv" or (format_hint == "auto" and "\t" in line):
                parts = [p.strip() for p in line.split("\t")]
            else:
                parts = line.split()
            if len(parts) != 3 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{lineno}: expected word1, word2, rating")
            try:
                rating = float(parts[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed rating {parts[2]!r}") from None
            if not math.isfinite(rating):
                raise DataError(f"{path}:{lineno}: non-finite rating")
            pairs.append((parts[0].lower(), parts[1].lower(), rating))
    try:
        return SimilarityBenchmark(name, tuple(pairs))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_benchmark(benchmark: SimilarityBenchmark, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for w1, w2, rating in benchmark.pairs:
            fh.write(f"{w1}\t{w2}\t{rating!r}\n")


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the positions they span."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of the tie-averaged ranks.

    Raises:
        DataError: the sequences differ in length or have fewer than 2 items.
        DegenerateStatisticsError: either side is constant.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DataError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if len(xs) < 2:
        raise DataError("spearman needs at least two observations")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateStatisticsError("spearman is undefined for constant input")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


def spearman_no_ties(xs, ys) -> float:
    """Closed form ``1 - 6 sum d^2 / (n (n^2 - 1))``; valid only without ties."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(np.unique(xs)) != len(xs) or len(np.unique(ys)) != len(ys):
        raise ValueError("closed-form spearman requires tie-free input")
    n = len(xs)
    d = average_ranks(xs) - average_ranks(ys)
    return 1.0 - 6.0 * float(np.dot(d, d)) / (n * (n * n - 1))


def split_regions(benchmark: SimilarityBenchmark, visual_vocab: Collection[str]):
    """Partition pairs into (VIS, ZS): VIS has both words in ``visual_vocab``."""
    vis, zs = [], []
    for pair in benchmark.pairs:
        (vis if pair[0] in visual_vocab and pair[1] in visual_vocab else zs).append(pair)
    return vis, zs


@dataclass
class RegionResult:
    rho: float | None
    n_pairs: int
    n_skipped_oov: int
    n_skipped_degenerate: int = 0
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "n_pairs": self.n_pairs,
            "n_skipped_oov": self.n_skipped_oov,
            "n_skipped_degenerate": self.n_skipped_degenerate,
            "note": self.note,
        }


@dataclass
class EvalResult:
    table: str
    benchmark: str
    regions: dict[str, RegionResult] = field(default_factory=dict)
    redundant: bool = False

    def __getitem__(self, region: str) -> RegionResult:
        return self.regions[region]

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "benchmark": self.benchmark,
            "redundant": self.redundant,
            "regions": {r: self.regions[r].to_dict() for r in REGIONS},
        }


def _score_region(table: VectorTable, pairs: Iterable[tuple[str, str, float]]) -> RegionResult:
    preds, gold = [], []
    oov = degenerate = 0
    for w1, w2, rating in pairs:
        if w1 not in table or w2 not in table:
            oov += 1
            continue
        try:
            preds.append(cosine(table[w1], table[w2]))
        except DegenerateVectorError:
            degenerate += 1
            continue
        gold.append(rating)
    n = len(preds)
    if n < 2:
        return RegionResult(None, n, oov, degenerate, note=f"only {n} usable pair(s)")
    try:
        rho = spearman(preds, gold)
    except DegenerateStatisticsError as exc:
        return RegionResult(None, n, oov, degenerate, note=str(exc))
    return RegionResult(rho, n, oov, degenerate)


def evaluate(table: VectorTable, benchmark: SimilarityBenchmark,
             visual_vocab: Collection[str]) -> EvalResult:
    """Cosine-vs-rating Spearman correlation over ALL, VIS and ZS."""
    vis, zs = split_regions(benchmark, visual_vocab)
    return EvalResult(
        table=table.name,
        benchmark=benchmark.name,
        regions={
            "ALL": _score_region(table, benchmark.pairs),
            "VIS": _score_region(table, vis),
            "ZS": _score_region(table, zs),
        },
        redundant=benchmark.redundant,
    )


REPORT_COLUMNS = ("table", "benchmark", "region", "rho", "n_pairs", "n_skipped_oov",
                  "n_skipped_degenerate", "redundant")


def format_rho(rho: float | None) -> str:
    return "NA" if rho is None else repr(rho)


def results_to_rows(results: Iterable[EvalResult]) -> list[dict]:
    rows = []
    for res in results:
        for region in REGIONS:
            r = res.regions[region]
            rows.append({
                "table": res.table,
                "benchmark": res.benchmark,
                "region": region,
                "rho": format_rho(r.rho),
                "n_pairs": r.n_pairs,
                "n_skipped_oov": r.n_skipped_oov,
                "n_skipped_degenerate": r.n_skipped_degenerate,
                "redundant": int(res.redundant),
            })
    return rows


def rows_to_tsv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), delimiter="\t",
                            lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def results_to_tsv(results: Iterable[EvalResult]) -> str:
    return rows_to_tsv(results_to_rows(results), REPORT_COLUMNS)


def results_to_json(results: Iterable[EvalResult]) -> str:
    return json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True) + "\n"


def results_matrix(results: Iterable[EvalResult]) -> dict[str, dict[str, dict[str, float | None]]]:
    """``{table: {benchmark: {region: rho}}}``, the layout of the reference table."""
    out: dict = {}
    for res in results:
        out.setdefault(res.table, {})[res.benchmark] = {
            region: res.regions[region].rho for region in REGIONS
        }
    return out
