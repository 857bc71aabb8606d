"""Similarity matrices, degree vectors and graph Laplacians over sample columns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ArgumentError, DataError

__all__ = [
    "AUTO",
    "KernelSpec",
    "SimilarityMatrix",
    "DegreeMatrix",
    "median_bandwidth",
    "similarity_matrix",
    "degree_matrix",
    "graph_laplacian",
]

AUTO = "auto"
KINDS = ("gaussian", "linear", "polynomial")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus parameters.

    ``sigma`` is the Gaussian bandwidth, or ``"auto"`` for the median heuristic.
    The polynomial kernel is ``(<x, y> + offset) ** degree``.
    """

    kind: str = "gaussian"
    sigma: float | str = AUTO
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gaussian" and self.sigma != AUTO:
            if not (isinstance(self.sigma, (int, float)) and np.isfinite(self.sigma) and self.sigma > 0):
                raise ArgumentError(f"gaussian sigma must be > 0 or 'auto', got {self.sigma!r}")
        if self.kind == "polynomial" and int(self.degree) < 1:
            raise ArgumentError("polynomial degree must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "degree": self.degree, "offset": self.offset}


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DegreeMatrix:
    diag: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diag)


def median_bandwidth(points: np.ndarray) -> float:
    """Lower median of all pairwise Euclidean distances between columns; 1.0 if that is 0."""
    d = np.sort(pdist(np.asarray(points, dtype=float).T))
    med = float(d[(d.size - 1) // 2])
    return med if med > 0 else 1.0


def _check_points(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.ndim != 2:
        raise ArgumentError(f"points must be a d x N matrix, got shape {P.shape}")
    if P.shape[1] < 2:
        raise ArgumentError("need at least two points (columns)")
    if not np.all(np.isfinite(P)):
        raise DataError("non-finite entries in points")
    return P


def similarity_matrix(points, kind: str | KernelSpec = "gaussian", **params) -> SimilarityMatrix:
    """Symmetric ``N x N`` similarity between the columns of ``points``.

    Gaussian: ``exp(-||x_i - x_j||^2 / (2 sigma^2))``.
    """
    spec = kind if isinstance(kind, KernelSpec) else KernelSpec(kind=kind, **params)
    P = _check_points(points)

    if spec.kind == "gaussian":
        sigma = median_bandwidth(P) if spec.sigma == AUTO else float(spec.sigma)
        sq = squareform(pdist(P.T, "sqeuclidean"))
        K = np.exp(-sq / (2.0 * sigma * sigma))
        np.fill_diagonal(K, 1.0)
        used = {"sigma": sigma}
    elif spec.kind == "linear":
        K = P.T @ P
        used = {}
    else:
        K = (P.T @ P + spec.offset) ** int(spec.degree)
        used = {"degree": int(spec.degree), "offset": float(spec.offset)}
    K = 0.5 * (K + K.T)
    return SimilarityMatrix(values=K, kind=spec.kind, params=used)


def degree_matrix(K: SimilarityMatrix | np.ndarray) -> DegreeMatrix:
    vals = K.values if isinstance(K, SimilarityMatrix) else np.asarray(K, dtype=float)
    return DegreeMatrix(diag=vals.sum(axis=1))


def graph_laplacian(K: SimilarityMatrix | np.ndarray) -> np.ndarray:
    """``D - K``.  Positive semidefinite whenever ``K`` is entrywise non-negative."""
    vals = K.values if isinstance(K, SimilarityMatrix) else np.asarray(K, dtype=float)
    vals = 0.5 * (vals + vals.T)
    L = -vals.copy()
    L[np.diag_indices_from(L)] += vals.sum(axis=1)
    return L
