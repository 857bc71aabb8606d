"""Low-rank coding of each sample over its own k-nearest-neighbour dictionary.

For view ``X`` (``D x N``) and neighbour lists ``nbr[i]`` (``K`` indices), solve

    min_Z  ||Z||_* + lam * sum_i ||x_i - X[:, nbr[i]] z_i||^2   s.t.  1^T z_i = 1

with ADMM on the split ``Z = J``: singular value thresholding for ``J``, a
closed-form equality-constrained least squares for every column of ``Z``.
The nuclear norm is taken over the stacked ``K x N`` coefficient matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ArgumentError, DivergenceError, NumericError

__all__ = [
    "NeighborIndex",
    "SolverOpts",
    "LowRankCode",
    "ReconstructionMatrix",
    "knn_neighbors",
    "nuclear_norm",
    "svt",
    "lowrank_objective",
    "solve_lowrank_codes",
    "assemble_reconstruction_matrix",
    "default_k",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class NeighborIndex:
    """``indices[i]`` lists the ``K`` nearest other samples of ``i``, closest first."""

    indices: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    def __getitem__(self, i):
        return self.indices[i]


@dataclass(frozen=True)
class SolverOpts:
    mu: float = 1.0
    tol: float = 1e-6
    max_iters: int = 500

    def __post_init__(self):
        if not self.mu > 0:
            raise ArgumentError(f"mu must be > 0, got {self.mu}")
        if not self.tol > 0:
            raise ArgumentError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iters) < 1:
            raise ArgumentError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class LowRankCode:
    Z: np.ndarray
    neighbors: NeighborIndex
    residual_norm: float
    solver_iters: int
    converged: bool
    objective: float = float("nan")
    lam: float = 1.0
    objective_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class ReconstructionMatrix:
    """``N x N`` scatter of a :class:`LowRankCode`; column ``i`` is supported on ``nbr[i]``."""

    M: np.ndarray

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def structure(self) -> np.ndarray:
        """``(I - M)^T (I - M)``, the matrix every embedding variant preserves."""
        R = np.eye(self.n) - self.M
        Q = R.T @ R
        return 0.5 * (Q + Q.T)


def default_k(n: int) -> int:
    return min(10, n - 1)


def knn_neighbors(X, K: int) -> NeighborIndex:
    """Exact Euclidean k-NN over columns, self excluded; ties go to the lower index."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if not (1 <= K <= n - 1):
        raise ArgumentError(f"K must satisfy 1 <= K <= N-1 = {n - 1}, got {K}")
    D = cdist(X.T, X.T, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    # stable sort keeps ascending index order among equal distances
    idx = np.argsort(D, axis=1, kind="stable")[:, :K]
    return NeighborIndex(indices=idx.astype(np.int64))


def nuclear_norm(Z) -> float:
    return float(np.linalg.svd(np.asarray(Z, dtype=float), compute_uv=False).sum())


def svt(A, tau: float) -> np.ndarray:
    """Proximal operator of ``tau * ||.||_*``: soft-threshold the singular values."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (U * s) @ Vt


def _dictionaries(X, neighbors: NeighborIndex) -> np.ndarray:
    # (N, D, K): dictionary of sample i in slice i
    return np.transpose(X[:, neighbors.indices], (1, 0, 2))


def _residuals(X, dicts, Z) -> np.ndarray:
    return X - np.einsum("ndk,kn->dn", dicts, Z)


def lowrank_objective(X, neighbors: NeighborIndex, Z, lam: float) -> float:
    """``||Z||_* + lam * ||E||_F^2`` with ``E`` the per-sample reconstruction residuals."""
    X = np.asarray(X, dtype=float)
    E = _residuals(X, _dictionaries(X, neighbors), Z)
    return nuclear_norm(Z) + lam * float(np.sum(E * E))


def solve_lowrank_codes(X, neighbors: NeighborIndex, lam: float = 1.0, opts: SolverOpts | None = None) -> LowRankCode:
    opts = opts or SolverOpts()
    if not (np.isfinite(lam) and lam > 0):
        raise ArgumentError(f"lambda must be > 0, got {lam}")
    X = np.asarray(X, dtype=float)
    n, K = neighbors.indices.shape
    if X.shape[1] != n:
        raise ArgumentError(f"neighbour index covers {n} samples but X has {X.shape[1]}")
    mu = float(opts.mu)
    dicts = _dictionaries(X, neighbors)

    # per-column system (2 lam D_i^T D_i + mu I) z = rhs + nu 1, fixed across iterations
    G = 2.0 * lam * np.einsum("ndk,ndl->nkl", dicts, dicts)
    A = G + mu * np.eye(K)[None]
    conds = np.linalg.cond(A)
    for i in np.flatnonzero(~(conds <= _COND_LIMIT)):
        A[i] += 1e-10 * np.trace(A[i]) * np.eye(K)
    conds = np.linalg.cond(A)
    bad = np.flatnonzero(~(conds < 1.0 / np.finfo(float).eps))
    if bad.size:
        raise NumericError(f"singular coding system for sample {int(bad[0])} even after ridge")
    Ainv = np.linalg.inv(A)
    b0 = 2.0 * lam * np.einsum("ndk,dn->kn", dicts, X)
    c = np.einsum("nkl,l->kn", Ainv, np.ones(K))
    csum = c.sum(axis=0)

    Z = np.full((K, n), 1.0 / K)
    Y = np.zeros_like(Z)
    trace = []
    converged = False
    it = 0
    for it in range(1, int(opts.max_iters) + 1):
        J = svt(Z + Y / mu, 1.0 / mu)
        a = np.einsum("nkl,ln->kn", Ainv, b0 + mu * J - Y)
        nu = (1.0 - a.sum(axis=0)) / csum
        Z = a + nu * c
        R = Z - J
        Y = Y + mu * R
        if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(Y))):
            raise DivergenceError(
                f"low-rank ADMM produced non-finite iterates at iteration {it}; try a smaller mu"
            )
        # feasible iterate; the J-based value undershoots while Z != J
        E = _residuals(X, dicts, Z)
        trace.append(nuclear_norm(Z) + lam * float(np.sum(E * E)))
        if np.linalg.norm(R) / max(1.0, np.linalg.norm(Z)) < opts.tol:
            converged = True
            break

    E = _residuals(X, dicts, Z)
    return LowRankCode(
        Z=Z,
        neighbors=neighbors,
        residual_norm=float(np.linalg.norm(E)),
        solver_iters=it,
        converged=converged,
        objective=nuclear_norm(Z) + lam * float(np.sum(E * E)),
        lam=float(lam),
        objective_trace=trace,
    )


def assemble_reconstruction_matrix(code: LowRankCode, n: int) -> ReconstructionMatrix:
    idx = code.neighbors.indices
    if idx.size and (idx.max() >= n or idx.min() < 0):
        raise ArgumentError(f"neighbour index out of range for n={n}")
    if idx.shape[0] != n:
        raise ArgumentError(f"code has {idx.shape[0]} columns, expected {n}")
    M = np.zeros((n, n))
    cols = np.broadcast_to(np.arange(n)[:, None], idx.shape)
    M[idx, cols] = code.Z.T
    return ReconstructionMatrix(M=M)
