"""Synthetic ground truth for end-to-end checks.

Text vectors are i.i.d. standard normal. A fixed linear map ``W*`` (entries
``N(0, visual_scale**2 / d_l)``, so true visual coordinates have standard
deviation about ``visual_scale``) gives every word a true visual vector.
Concepts chosen to "have images" get ``images_per_concept`` copies with
``N(0, noise_sigma**2)`` noise as feature records.
Benchmark ratings mix text and true-visual cosine similarity.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .evaluation import SimilarityBenchmark, write_benchmark
from .vectors import VectorTable, write_text_embeddings
from .visual import FeatureRecord, write_feature_records


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 0
    n_words: int = 1000
    d_l: int = 20
    d_v: int = 10
    noise_sigma: float = 0.1
    benchmark_size: int = 500
    alpha: float = 0.5
    visual_fraction: float = 0.5
    images_per_concept: int = 10
    visual_scale: float = 1.0

    def __post_init__(self):
        if self.n_words < 2 or self.d_l < 1 or self.d_v < 1:
            raise ValueError("n_words must be >= 2 and dims positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.visual_fraction <= 1.0:
            raise ValueError("visual_fraction must lie in [0, 1]")
        if not self.visual_scale > 0:
            raise ValueError("visual_scale must be positive")
        if self.images_per_concept < 1:
            raise ValueError("images_per_concept must be positive")
        max_pairs = self.n_words * (self.n_words - 1) // 2
        if not 2 <= self.benchmark_size <= max_pairs:
            raise ValueError(f"benchmark_size must lie in [2, {max_pairs}] for {self.n_words} words")


@dataclass(frozen=True)
class SyntheticData:
    spec: SyntheticSpec
    text: VectorTable
    true_visual: VectorTable
    true_map: np.ndarray
    records: tuple[FeatureRecord, ...]
    visual_words: frozenset[str]
    benchmark: SimilarityBenchmark


def _unit_rows(M: np.ndarray) -> np.ndarray:
    return M / np.linalg.norm(M, axis=1, keepdims=True)


def generate(spec: SyntheticSpec) -> SyntheticData:
    rng = np.random.default_rng(spec.seed)
    width = len(str(spec.n_words - 1))
    words = [f"w{i:0{width}d}" for i in range(spec.n_words)]
    L = rng.standard_normal((spec.n_words, spec.d_l))
    W_star = rng.standard_normal((spec.d_v, spec.d_l)) * (spec.visual_scale / np.sqrt(spec.d_l))
    V = L @ W_star.T

    n_vis = int(round(spec.visual_fraction * spec.n_words))
    vis_idx = np.sort(rng.choice(spec.n_words, size=n_vis, replace=False))
    records = []
    for i in vis_idx:
        noise = rng.normal(0.0, spec.noise_sigma, size=(spec.images_per_concept, spec.d_v))
        for k in range(spec.images_per_concept):
            records.append(FeatureRecord(words[i], f"{words[i]}_{k:04d}", V[i] + noise[k]))

    # Sample distinct unordered pairs via their linear index in the upper triangle.
    n = spec.n_words
    flat = rng.choice(n * (n - 1) // 2, size=spec.benchmark_size, replace=False)
    iu, ju = np.triu_indices(n, k=1)
    a, b = iu[flat], ju[flat]
    Lu, Vu = _unit_rows(L), _unit_rows(V)
    text_cos = np.einsum("ij,ij->i", Lu[a], Lu[b])
    vis_cos = np.einsum("ij,ij->i", Vu[a], Vu[b])
    ratings = spec.alpha * text_cos + (1.0 - spec.alpha) * vis_cos
    pairs = tuple((words[i], words[j], float(r)) for i, j, r in zip(a, b, ratings))

    return SyntheticData(
        spec=spec,
        text=VectorTable(words, L, name="text"),
        true_visual=VectorTable(words, V, name="true_visual"),
        true_map=W_star,
        records=tuple(records),
        visual_words=frozenset(words[i] for i in vis_idx),
        benchmark=SimilarityBenchmark("synthetic", pairs),
    )


def write_synthetic(data: SyntheticData, out_dir) -> dict[str, Path]:
    """Write every artifact of ``data`` into ``out_dir``; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "text": out / "text.txt",
        "features": out / "features.tsv",
        "benchmark": out / "synthetic.tsv",
        "true_visual": out / "true_visual.txt",
        "true_map": out / "true_map.json",
        "visual_vocab": out / "visual_vocab.txt",
    }
    write_text_embeddings(data.text, paths["text"])
    write_feature_records(data.records, paths["features"])
    write_benchmark(data.benchmark, paths["benchmark"])
    write_text_embeddings(data.true_visual, paths["true_visual"])
    doc = {"spec": asdict(data.spec), "shape": list(data.true_map.shape),
           "W": data.true_map.ravel().tolist()}
    paths["true_map"].write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")
    paths["visual_vocab"].write_text("".join(w + "\n" for w in sorted(data.visual_words)),
                                     encoding="utf-8")
    return paths


def load_true_map(path) -> np.ndarray:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.asarray(doc["W"], dtype=np.float64).reshape(doc["shape"])
