"""Single-view low-rank preserving embedding.

All three variants minimise ``tr(U Q U^T)`` with ``Q = (I - M)^T (I - M)``:

* direct:  ``U U^T = I``
* linear:  ``U = W^T X`` with ``W^T (X X^T + eps I) W = I``
* kernel:  ``U = beta^T K`` with ``beta^T (K K + eps I) beta = I``

and each reduces to a dense symmetric eigenproblem.  The multi-view optimiser
reuses :func:`embed_structure` with ``Q`` augmented by its consensus term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ArgumentError, DataError, NumericError
from .lowrank import ReconstructionMatrix

__all__ = [
    "EigenResult",
    "Embedding",
    "VARIANTS",
    "smallest_eigenvectors",
    "generalized_smallest",
    "embed_direct",
    "embed_linear",
    "embed_kernel",
    "embed_structure",
    "default_ridge",
]

VARIANTS = ("direct", "linear", "kernel")
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray  # columns


@dataclass
class Embedding:
    """A ``d x N`` embedding plus whatever carries it (projection or kernel coefficients).

    ``objective`` is ``tr(U Q U^T)`` for the structure matrix ``Q`` it was solved
    against and ``eigenvalues`` are the selected (generalised) eigenvalues.
    """

    U: np.ndarray
    variant: str = "direct"
    W: np.ndarray | None = None
    beta: np.ndarray | None = None
    kernel: dict | None = None
    eps: float = 0.0
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")
    # references kept only for constraint checks
    X: np.ndarray | None = field(default=None, repr=False)
    Kphi: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.U.shape[0]

    def constraint_residual(self) -> float:
        """Frobenius distance of the variant's constraint Gram matrix from ``I_d``."""
        I = np.eye(self.d)
        if self.variant == "direct":
            return float(np.linalg.norm(self.U @ self.U.T - I))
        if self.variant == "linear":
            XW = self.X.T @ self.W
            G = XW.T @ XW + self.eps * (self.W.T @ self.W)
            return float(np.linalg.norm(G - I))
        KB = self.Kphi @ self.beta
        G = KB.T @ KB + self.eps * (self.beta.T @ self.beta)
        return float(np.linalg.norm(G - I))

    def constraint_tol(self) -> float:
        return 1e-8 if self.variant == "direct" else 1e-6


def _sign_fix(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax returns the first on ties
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def _order_degenerate(w: np.ndarray, V: np.ndarray):
    order = np.arange(w.size)
    start = 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i] - w[i - 1] > DEGENERACY_TOL:
            if i - start > 1:
                block = V[:, start:i]
                # lexsort treats its last key as primary; row 0 must lead
                sub = np.lexsort(block[::-1])
                order[start:i] = start + sub
            start = i
    return w[order], V[:, order]


def _finish(w, V, d):
    V = _sign_fix(V)
    w, V = _order_degenerate(w, V)
    return EigenResult(values=w[:d].copy(), vectors=V[:, :d].copy())


def smallest_eigenvectors(A, d: int) -> EigenResult:
    """The ``d`` smallest eigenpairs of a symmetric matrix, deterministically signed and ordered."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if not (1 <= d <= n):
        raise ArgumentError(f"d must satisfy 1 <= d <= {n}, got {d}")
    if not np.all(np.isfinite(A)):
        raise DataError("non-finite entries in eigenproblem matrix")
    w, V = linalg.eigh(0.5 * (A + A.T))
    return _finish(w, V, d)


def _ridged_cholesky(B, eps, scale, what):
    n = B.shape[0]
    cap = 1e-4 * scale
    tried = eps
    while True:
        try:
            return linalg.cholesky(B + tried * np.eye(n), lower=True), tried
        except linalg.LinAlgError:
            pass
        tried = max(tried * 10.0, 1e-12 * scale)
        if tried > cap:
            raise NumericError(
                f"{what} constraint matrix is not positive definite even with ridge {cap:.3g}"
            )


def generalized_smallest(A, B, d: int, eps: float, scale: float, what: str = "generalized"):
    """Smallest ``d`` solutions of ``A v = lam (B + eps I) v`` normalised to ``V^T (B + eps I) V = I``.

    Reduced to a standard problem through the Cholesky factor of ``B + eps I``;
    the ridge grows tenfold on failure up to ``1e-4 * scale``.  Returns
    ``(EigenResult, eps_used)``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    if not (1 <= d <= n):
        raise ArgumentError(f"d must satisfy 1 <= d <= {n}, got {d}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise DataError("non-finite entries in generalized eigenproblem")
    L, eps_used = _ridged_cholesky(0.5 * (B + B.T), eps, scale, what)
    T = linalg.solve_triangular(L, 0.5 * (A + A.T), lower=True)
    C = linalg.solve_triangular(L, T.T, lower=True)
    w, Y = linalg.eigh(0.5 * (C + C.T))
    res = _finish(w, Y, d)
    V = linalg.solve_triangular(L.T, res.vectors, lower=False)
    return EigenResult(values=res.values, vectors=V), eps_used


def default_ridge(G: np.ndarray) -> float:
    """``1e-8 * trace(G) / dim``, scale-matched to the constraint Gram matrix."""
    return 1e-8 * float(np.trace(G)) / G.shape[0]


def _objective(U, Q):
    return float(np.einsum("ij,jk,ik->", U, Q, U))


def embed_structure(Q, d: int, variant: str = "direct", X=None, Kphi=None, eps=None, kernel=None) -> Embedding:
    """Minimise ``tr(psi Q psi^T)`` under the constraint of ``variant``."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if variant == "direct":
        res = smallest_eigenvectors(Q, d)
        U = res.vectors.T.copy()
        return Embedding(U=U, variant="direct", eigenvalues=res.values, objective=_objective(U, Q))

    if variant == "linear":
        if X is None:
            raise ArgumentError("linear variant needs the data matrix X")
        X = np.asarray(X, dtype=float)
        if X.shape[1] != n:
            raise ArgumentError(f"X has {X.shape[1]} samples, structure matrix has {n}")
        if d > min(X.shape):
            raise ArgumentError(f"d={d} exceeds min(D, N)={min(X.shape)}")
        A = X @ Q @ X.T
        B = X @ X.T
        scale = float(np.trace(B)) / B.shape[0]
        eps = default_ridge(B) if eps is None else float(eps)
        res, eps_used = generalized_smallest(A, B, d, eps, scale, "linear")
        W = res.vectors
        U = W.T @ X
        return Embedding(U=U, variant="linear", W=W, eps=eps_used, eigenvalues=res.values,
                         objective=_objective(U, Q), X=X)

    if variant == "kernel":
        if Kphi is None:
            raise ArgumentError("kernel variant needs the kernel matrix Kphi")
        K = np.asarray(Kphi, dtype=float)
        if K.shape != (n, n):
            raise ArgumentError(f"Kphi must be {n}x{n}, got {K.shape}")
        if np.abs(K - K.T).max() > 1e-8 * max(1.0, np.abs(K).max()):
            raise ArgumentError("Kphi must be symmetric")
        K = 0.5 * (K + K.T)
        A = K @ Q @ K
        B = K @ K
        scale = float(np.trace(B)) / n
        eps = default_ridge(B) if eps is None else float(eps)
        res, eps_used = generalized_smallest(A, B, d, eps, scale, "kernel")
        beta = res.vectors
        U = beta.T @ K
        return Embedding(U=U, variant="kernel", beta=beta, kernel=kernel, eps=eps_used,
                         eigenvalues=res.values, objective=_objective(U, Q), Kphi=K)

    raise ArgumentError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _structure(M) -> np.ndarray:
    if isinstance(M, ReconstructionMatrix):
        return M.structure()
    return ReconstructionMatrix(M=np.asarray(M, dtype=float)).structure()


def embed_direct(M, d: int) -> Embedding:
    return embed_structure(_structure(M), d, "direct")


def embed_linear(X, M, d: int, eps: float | None = None) -> Embedding:
    if eps is not None and eps < 0:
        raise ArgumentError("eps must be >= 0")
    return embed_structure(_structure(M), d, "linear", X=X, eps=eps)


def embed_kernel(Kphi, M, d: int, eps: float | None = None, kernel: dict | None = None) -> Embedding:
    if eps is not None and eps < 0:
        raise ArgumentError("eps must be >= 0")
    return embed_structure(_structure(M), d, "kernel", Kphi=Kphi, eps=eps, kernel=kernel)
