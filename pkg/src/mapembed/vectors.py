"""Dense vector primitives and the word-embedding text format.

Vectors are plain 1-D ``float64`` numpy arrays. A :class:`VectorTable` is an
immutable word -> vector map backed by one read-only matrix.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateVectorError, DimensionMismatchError

logger = logging.getLogger(__name__)


def as_vector(values) -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float64 array with at least one entry."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatchError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DataError("vector contains non-finite entries")
    return v


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm.

    Raises:
        DegenerateVectorError: if ``v`` has zero norm.
    """
    v = as_vector(v)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateVectorError("cannot normalize a zero-norm vector")
    return v / norm


def cosine(u1, u2) -> float:
    """Cosine similarity, clamped to [-1, 1]."""
    u1 = as_vector(u1)
    u2 = as_vector(u2)
    if u1.shape != u2.shape:
        raise DimensionMismatchError(f"dimension mismatch: {u1.size} vs {u2.size}")
    n1 = np.linalg.norm(u1)
    n2 = np.linalg.norm(u2)
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateVectorError("cosine undefined for a zero-norm operand")
    c = float(np.dot(u1, u2) / (n1 * n2))
    return min(1.0, max(-1.0, c))


def concat(u, v) -> np.ndarray:
    """Concatenate two vectors; ``u`` occupies the leading coordinates."""
    return np.concatenate([as_vector(u), as_vector(v)])


def format_float(x: float) -> str:
    # repr() of a Python float is the shortest string that round-trips exactly.
    return repr(float(x))


class VectorTable(Mapping):
    """Immutable word -> vector table with a uniform dimensionality.

    Args:
        words: unique, non-empty tokens without whitespace.
        matrix: array of shape ``(len(words), dim)``. Copied and frozen.
        name: label for the space, e.g. ``"text"`` or ``"mapc"``.
        dim: required when ``words`` is empty.
    """

    def __init__(self, words: Iterable[str], matrix, name: str = "", dim: int | None = None):
        words = tuple(words)
        m = np.array(matrix, dtype=np.float64, copy=True)
        if len(words) == 0:
            if dim is None:
                dim = m.shape[1] if m.ndim == 2 else None
            if dim is None or dim < 1:
                raise DimensionMismatchError("an empty table needs an explicit positive dim")
            m = np.zeros((0, dim))
        if m.ndim != 2 or m.shape[0] != len(words):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match {len(words)} words"
            )
        if m.shape[1] < 1:
            raise DimensionMismatchError("table dim must be positive")
        if dim is not None and m.shape[1] != dim:
            raise DimensionMismatchError(f"expected dim {dim}, got {m.shape[1]}")
        if not np.all(np.isfinite(m)):
            raise DataError("table contains non-finite entries")
        index: dict[str, int] = {}
        for i, w in enumerate(words):
            if not isinstance(w, str) or not w or any(c.isspace() for c in w):
                raise DataError(f"invalid word {w!r}")
            if w in index:
                raise DataError(f"duplicate word {w!r}")
            index[w] = i
        m.flags.writeable = False
        self._words = words
        self._index = index
        self._matrix = m
        self.name = name

    @classmethod
    def from_mapping(cls, entries: Mapping[str, object], name: str = "", dim: int | None = None):
        words = list(entries)
        if not words:
            return cls((), np.zeros((0, dim or 1)), name=name, dim=dim)
        return cls(words, np.stack([as_vector(entries[w]) for w in words]), name=name, dim=dim)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def words(self) -> tuple[str, ...]:
        return self._words

    @property
    def matrix(self) -> np.ndarray:
        """Read-only ``(len(self), dim)`` view, rows ordered as :attr:`words`."""
        return self._matrix

    def vocab(self) -> frozenset[str]:
        return frozenset(self._words)

    def __getitem__(self, word: str) -> np.ndarray:
        return self._matrix[self._index[word]]

    def __contains__(self, word) -> bool:
        return word in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._words)

    def __len__(self) -> int:
        return len(self._words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorTable):
            return NotImplemented
        return (
            self.name == other.name
            and self._words == other._words
            and self._matrix.shape == other._matrix.shape
            and np.array_equal(self._matrix, other._matrix)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"VectorTable(name={self.name!r}, n={len(self)}, dim={self.dim})"

    def rows(self, words: Iterable[str]) -> np.ndarray:
        """Stack the vectors of ``words`` into a matrix."""
        idx = [self._index[w] for w in words]
        return self._matrix[idx]

    def subset(self, words: Iterable[str], name: str | None = None) -> VectorTable:
        words = list(words)
        return VectorTable(words, self.rows(words), name=self.name if name is None else name,
                           dim=self.dim)


def load_text_embeddings(
    path,
    expected_dim: int | None = None,
    name: str = "text",
    lowercase: bool = True,
) -> VectorTable:
    """Read a whitespace-separated embedding file (GloVe/word2vec text, no header).

    Each non-blank line is a token followed by its float components. Tokens
    are lowercased unless ``lowercase=False``; a token that repeats (after
    lowercasing) is an error rather than last-wins.

    Raises:
        DataError: empty file, unparsable or non-finite float, duplicate word.
        DimensionMismatchError: a line whose float count differs from the
            first record (or from ``expected_dim``).
    """
    path = Path(path)
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: dict[str, int] = {}
    dim = expected_dim
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token = parts[0].lower() if lowercase else parts[0]
            if len(parts) < 2:
                raise DimensionMismatchError(f"{path}:{lineno}: token {token!r} has no values")
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise DimensionMismatchError(
                    f"{path}:{lineno}: dimension mismatch, expected {dim} values, "
                    f"got {len(parts) - 1}"
                )
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparsable float ({exc})") from None
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if token in seen:
                raise DataError(
                    f"{path}:{lineno}: duplicate word {token!r} (first seen at line {seen[token]})"
                )
            seen[token] = lineno
            words.append(token)
            rows.append(vec)
    if not words:
        raise DataError(f"{path}: empty embedding file")
    logger.debug("loaded %d vectors of dim %d from %s", len(words), dim, path)
    return VectorTable(words, np.stack(rows), name=name)


def write_text_embeddings(table: VectorTable, path) -> None:
    """Write ``table`` in the text format read by :func:`load_text_embeddings`."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for word, row in zip(table.words, table.matrix):
            fh.write(word)
            fh.write(" ")
            fh.write(" ".join(map(format_float, row.tolist())))
            fh.write("\n")

