"""Word embedding pipeline: load raw vectors, reduce them with PCA on the
dimension correlation matrix, and normalize rows into link-ready weights.

Link-ready vectors have every entry strictly inside (0, 1) and unit L2
magnitude, which is what the network layer expects for PO-to-semantic links.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

EPSILON = 1e-3


class EmbeddingError(ValueError):
    """Raised for malformed embedding input or invalid pipeline requests."""


class Stage(Enum):
    RAW = "raw"
    REDUCED = "reduced"
    LINK_READY = "link_ready"


@dataclass
class EmbeddingTable:
    tokens: tuple[str, ...]
    matrix: np.ndarray
    stage: Stage

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.tokens):
            raise EmbeddingError("matrix shape does not match token count")
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.matrix[self._index[token]]
        except KeyError:
            raise EmbeddingError(f"token not in embedding table: {token!r}") from None


@dataclass
class PCAProjection:
    """Top-p eigenpairs of the dimension correlation matrix.

    eigenvalues are sorted descending; components has orthonormal columns with
    a deterministic sign (the largest-magnitude entry of each column is
    positive).
    """

    eigenvalues: np.ndarray
    components: np.ndarray

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.components


def load_embeddings(source) -> EmbeddingTable:
    """Read whitespace-separated text embeddings.

    An optional first line "<n> <k>" declares the counts; every other line is
    a token followed by k numbers.  Errors carry 1-based line numbers.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines()]
    rows, tokens = [], []
    declared = None
    dim = None
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2:
            try:
                declared = (int(head[0]), int(head[1]))
                start = 1
            except ValueError:
                declared = None
    for lineno in range(start, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        parts = line.split()
        token, values = parts[0], parts[1:]
        if dim is None:
            if declared is not None and len(values) != declared[1]:
                raise EmbeddingError(
                    f"line {lineno + 1}: expected {declared[1]} values, found {len(values)}")
            dim = len(values)
            if dim == 0:
                raise EmbeddingError(f"line {lineno + 1}: no vector values")
        elif len(values) != dim:
            raise EmbeddingError(
                f"line {lineno + 1}: expected {dim} values, found {len(values)}")
        if token in tokens:
            raise EmbeddingError(f"line {lineno + 1}: duplicate token {token!r}")
        try:
            rows.append([float(v) for v in values])
        except ValueError as exc:
            raise EmbeddingError(f"line {lineno + 1}: {exc}") from None
        tokens.append(token)
    if not tokens:
        raise EmbeddingError("no embedding rows found")
    if declared is not None and declared[0] != len(tokens):
        raise EmbeddingError(
            f"header declared {declared[0]} tokens, found {len(tokens)}")
    return EmbeddingTable(tokens=tuple(tokens), matrix=np.array(rows), stage=Stage.RAW)


def _correlation_matrix(x: np.ndarray) -> np.ndarray:
    """Pearson correlations between dimensions; zero-variance dimensions get
    all-zero correlations (logged) instead of NaNs."""
    centered = x - x.mean(axis=0)
    ss = np.sqrt((centered ** 2).sum(axis=0))
    dead = ss == 0.0
    if dead.any():
        log.warning("zero-variance embedding dimensions: %s", np.flatnonzero(dead).tolist())
    safe = np.where(dead, 1.0, ss)
    normed = centered / safe
    corr = normed.T @ normed
    corr[dead, :] = 0.0
    corr[:, dead] = 0.0
    return corr


def reduce_dimensions(table: EmbeddingTable, p: int) -> tuple[EmbeddingTable, PCAProjection]:
    """Project token vectors onto the top-p eigenvectors of the dimension
    correlation matrix."""
    k = table.dim
    if p < 1 or p > k:
        raise EmbeddingError(f"cannot keep {p} of {k} dimensions")
    corr = _correlation_matrix(table.matrix)
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1][:p]
    values = eigvals[order]
    vectors = eigvecs[:, order]
    # deterministic sign: the largest-magnitude entry of each column positive
    for j in range(vectors.shape[1]):
        pivot = np.argmax(np.abs(vectors[:, j]))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]
    projection = PCAProjection(eigenvalues=values, components=vectors)
    reduced = EmbeddingTable(tokens=table.tokens,
                             matrix=projection.project(table.matrix),
                             stage=Stage.REDUCED)
    return reduced, projection


def normalize_for_links(table: EmbeddingTable) -> EmbeddingTable:
    """Min-max each dimension into [eps, 1-eps], then L2-normalize each row.

    A constant dimension maps to 0.5.  The result has entries strictly inside
    (0, 1) and unit-magnitude rows.
    """
    x = table.matrix
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    flat = span == 0.0
    safe = np.where(flat, 1.0, span)
    scaled = EPSILON + (1.0 - 2.0 * EPSILON) * (x - lo) / safe
    scaled[:, flat] = 0.5
    norms = np.linalg.norm(scaled, axis=1, keepdims=True)
    return EmbeddingTable(tokens=table.tokens, matrix=scaled / norms, stage=Stage.LINK_READY)


def link_ready_pipeline(source, p: int = 10) -> tuple[EmbeddingTable, PCAProjection]:
    """load -> reduce -> normalize, returning the link-ready table and projection."""
    raw = source if isinstance(source, EmbeddingTable) else load_embeddings(source)
    reduced, projection = reduce_dimensions(raw, p)
    return normalize_for_links(reduced), projection


def similarity_matrix(table: EmbeddingTable) -> np.ndarray:
    """Pearson correlation between token rows: symmetric with unit diagonal;
    a zero-variance row correlates 0 with everything else."""
    x = table.matrix
    centered = x - x.mean(axis=1, keepdims=True)
    ss = np.sqrt((centered ** 2).sum(axis=1))
    dead = ss == 0.0
    safe = np.where(dead, 1.0, ss)
    normed = centered / safe[:, None]
    sim = normed @ normed.T
    sim[dead, :] = 0.0
    sim[:, dead] = 0.0
    np.fill_diagonal(sim, 1.0)
    return np.clip(sim, -1.0, 1.0)
