"""Per-image feature records and their aggregation into concept vectors.

Feature files are TSV: ``concept<TAB>image_id<TAB>f1,f2,...,fd``. Records of
a concept (possibly coming from several synsets) are pooled and averaged.
"""
from __future__ import annotations

import json
from collections import defaultdict
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionMismatchError
from .vectors import VectorTable, format_float


@dataclass(frozen=True)
class FeatureRecord:
    concept: str
    image_id: str
    features: np.ndarray


@dataclass(frozen=True)
class AggregationPolicy:
    """Image-count floor and cap applied per concept.

    A concept is kept when it has at least ``min_images`` records. Concepts
    with more than ``max_images`` records are averaged over the
    ``max_images`` lexicographically-first image ids.
    """

    min_images: int = 50
    max_images: int = 500

    def __post_init__(self):
        if self.min_images < 1 or self.max_images < 1:
            raise ValueError("min_images and max_images must be positive")
        if self.min_images > self.max_images:
            raise ValueError("min_images must not exceed max_images")


# "more than 50 images" per concept, capped at 500.
PAPER_POLICY = AggregationPolicy(min_images=51, max_images=500)


@dataclass
class AggregationReport:
    concepts_kept: int
    d_v: int | None
    concepts_dropped: dict[str, int] = field(default_factory=dict)
    concepts_capped: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "concepts_kept": self.concepts_kept,
            "concepts_dropped": dict(sorted(self.concepts_dropped.items())),
            "concepts_capped": dict(sorted(self.concepts_capped.items())),
            "d_v": self.d_v,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def iter_feature_records(path) -> Iterator[FeatureRecord]:
    """Stream records from a feature TSV in file order.

    Blank lines are skipped. The feature dimension is fixed by the first record.
    """
    path = Path(path)
    dim = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not parts[0].strip() or not parts[1].strip():
                raise DataError(f"{path}:{lineno}: expected concept<TAB>image_id<TAB>features")
            concept, image_id, feats = parts[0].strip().lower(), parts[1].strip(), parts[2]
            try:
                vec = np.array(feats.split(","), dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable feature values") from None
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DimensionMismatchError(
                    f"{path}:{lineno}: dimension mismatch, expected {dim} features, got {vec.size}"
                )
            yield FeatureRecord(concept, image_id, vec)


def load_feature_records(path) -> list[FeatureRecord]:
    return list(iter_feature_records(path))


def write_feature_records(records: Iterable[FeatureRecord], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            values = ",".join(map(format_float, np.asarray(r.features).tolist()))
            fh.write(f"{r.concept}\t{r.image_id}\t{values}\n")


def aggregate_mean(
    records: Iterable[FeatureRecord],
    policy: AggregationPolicy = AggregationPolicy(),
    name: str = "visual",
) -> tuple[VectorTable, AggregationReport]:
    """Average image features per concept under ``policy``.

    Records of each concept are ordered by ``(image_id, features)`` before
    the cap is applied and before summation, so the output does not depend
    on input order, bit for bit.
    """
    groups: dict[str, list[FeatureRecord]] = defaultdict(list)
    dim = None
    for r in records:
        feats = np.asarray(r.features, dtype=np.float64)
        if dim is None:
            dim = feats.size
        elif feats.size != dim:
            raise DimensionMismatchError(
                f"record {r.concept}/{r.image_id} has {feats.size} features, expected {dim}"
            )
        groups[r.concept].append(r)

    report = AggregationReport(concepts_kept=0, d_v=dim)
    words: list[str] = []
    means: list[np.ndarray] = []
    for concept in sorted(groups):
        group = groups[concept]
        n = len(group)
        if n < policy.min_images:
            report.concepts_dropped[concept] = n
            continue
        group = sorted(group, key=lambda r: (r.image_id, tuple(np.asarray(r.features).tolist())))
        if n > policy.max_images:
            report.concepts_capped[concept] = n
            group = group[: policy.max_images]
        total = np.zeros(dim)
        lo = np.full(dim, np.inf)
        hi = np.full(dim, -np.inf)
        for r in group:
            total += r.features
            np.minimum(lo, r.features, out=lo)
            np.maximum(hi, r.features, out=hi)
        words.append(concept)
        # rounding in the running sum can push the mean an ulp outside the hull
        means.append(np.clip(total / len(group), lo, hi))

    report.concepts_kept = len(words)
    if not words:
        return VectorTable((), np.zeros((0, dim or 1)), name=name, dim=dim or 1), report
    return VectorTable(words, np.stack(means), name=name), report
