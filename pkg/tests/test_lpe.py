import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from mvlpe.errors import ArgumentError, DataError, NumericError
from mvlpe.kernels import similarity_matrix
from mvlpe.lowrank import ReconstructionMatrix, assemble_reconstruction_matrix, knn_neighbors, solve_lowrank_codes
from mvlpe.lpe import (
    embed_direct,
    embed_kernel,
    embed_linear,
    embed_structure,
    generalized_smallest,
    smallest_eigenvectors,
)

from oracles import min_frame_objective


def _seeded_M(n, seed, K=3):
    X = np.random.default_rng(seed).standard_normal((4, n))
    return X, assemble_reconstruction_matrix(solve_lowrank_codes(X, knn_neighbors(X, K), 1.0), n)


def _eig_sum(M, d):
    return np.linalg.eigvalsh(M.structure())[:d].sum()


# ---------------------------------------------------------------- eigen solver


def test_diagonal():
    r = smallest_eigenvectors(np.diag([3.0, 1.0, 2.0]), 2)
    assert np.allclose(r.values, [1, 2])
    assert np.allclose(r.vectors, np.eye(3)[:, [1, 2]])


def test_identity_degenerate_deterministic():
    a = smallest_eigenvectors(np.eye(4), 2)
    b = smallest_eigenvectors(np.eye(4), 2)
    assert np.allclose(a.values, [1, 1])
    assert np.allclose(a.vectors.T @ a.vectors, np.eye(2), atol=1e-10)
    assert a.vectors.tobytes() == b.vectors.tobytes()


def test_random_frames_cannot_beat_eigenvectors():
    G = np.random.default_rng(9).standard_normal((9, 9))
    A = G + G.T
    r = smallest_eigenvectors(A, 3)
    ours = np.trace(r.vectors.T @ A @ r.vectors)
    assert ours <= min_frame_objective(A, 3, seed=9) + 1e-12


def test_eigen_errors():
    with pytest.raises(DataError):
        smallest_eigenvectors(np.array([[np.inf, 0], [0, 1.0]]), 1)
    with pytest.raises(ArgumentError):
        smallest_eigenvectors(np.eye(3), 4)
    with pytest.raises(ArgumentError):
        smallest_eigenvectors(np.eye(3), 0)


sym_matrices = st.integers(2, 10).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, 2**32 - 1), st.integers(1, n), st.booleans())
)


@given(args=sym_matrices)
@settings(max_examples=80, deadline=None)
def test_eigen_invariants(args):
    n, seed, d, rounded = args
    G = np.random.default_rng(seed).standard_normal((n, n))
    if rounded:
        G = np.round(G)  # integer matrices produce repeated eigenvalues
    A = G + G.T
    r = smallest_eigenvectors(A, d)
    V, w = r.vectors, r.values
    assert np.all(np.diff(w) >= -1e-12)
    assert np.allclose(V.T @ V, np.eye(d), atol=1e-10)
    fro = max(np.linalg.norm(A), 1.0)
    for i in range(d):
        assert np.linalg.norm(A @ V[:, i] - w[i] * V[:, i]) <= 1e-8 * fro
        j = np.argmax(np.abs(V[:, i]))
        assert V[j, i] > 0
    again = smallest_eigenvectors(A.copy(), d)
    assert again.vectors.tobytes() == V.tobytes()


def test_generalized_matches_explicit_inverse():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((5, 12))
    _, M = _seeded_M(12, 1)
    A = X @ M.structure() @ X.T
    B = X @ X.T
    res, eps = generalized_smallest(A, B, 2, 0.0, np.trace(B) / 5)
    w = np.sort(np.linalg.eigvals(np.linalg.inv(B) @ A).real)[:2]
    assert eps == 0.0
    assert np.allclose(res.values, w, rtol=1e-7, atol=1e-12)


def test_generalized_ridge_exhausted():
    with pytest.raises(NumericError):
        generalized_smallest(np.eye(2), -np.eye(2), 1, 0.0, 1.0)


# ---------------------------------------------------------------- embeddings


def test_direct_affine_patch_null_space():
    # points on a 2-D plane in 3-D, M reconstructs each exactly from 3 neighbours
    rng = np.random.default_rng(2)
    P = rng.standard_normal((2, 12))
    X = np.vstack([P, P[0] + 2 * P[1] + 1.0])
    nb = knn_neighbors(X, 3)
    M = np.zeros((12, 12))
    for i in range(12):
        D = np.vstack([X[:, nb.indices[i]], np.ones(3)])
        M[nb.indices[i], i] = np.linalg.lstsq(D, np.append(X[:, i], 1.0), rcond=None)[0]
    assert np.allclose(X @ M, X, atol=1e-10)
    e = embed_direct(M, 2)
    assert abs(e.eigenvalues[0]) <= 1e-8


def test_direct_objective_is_eigenvalue_sum():
    _, M = _seeded_M(6, 6, K=2)
    e = embed_direct(M, 2)
    assert e.objective == pytest.approx(_eig_sum(M, 2), abs=1e-8)
    assert np.linalg.norm(e.U @ e.U.T - np.eye(2)) <= 1e-8


def test_direct_permutation_equivariance():
    X, M = _seeded_M(15, 3)
    perm = np.random.default_rng(0).permutation(15)
    Xp = X[:, perm]
    Mp = assemble_reconstruction_matrix(solve_lowrank_codes(Xp, knn_neighbors(Xp, 3), 1.0), 15)
    assert embed_direct(Mp, 3).objective == pytest.approx(embed_direct(M, 3).objective, abs=1e-8)


def test_direct_zero_M():
    e = embed_direct(np.zeros((7, 7)), 3)
    assert abs(e.objective - 3.0) <= 1e-10


def test_linear_identity_data_reduces_to_direct():
    _, M = _seeded_M(8, 2)
    lin = embed_linear(np.eye(8), M, 3, eps=0.0)
    assert lin.objective == pytest.approx(embed_direct(M, 3).objective, abs=1e-8)


def test_linear_rank_deficient_ridge():
    rng = np.random.default_rng(4)
    base = rng.standard_normal((3, 10))
    X = np.vstack([base, base[:2]])  # duplicate rows
    _, M = _seeded_M(10, 4)
    e = embed_linear(X, M, 2, eps=1e-8)
    assert e.constraint_residual() <= 1e-6


def test_linear_bad_dimensions():
    _, M = _seeded_M(8, 2)
    with pytest.raises(ArgumentError):
        embed_linear(np.eye(8)[:3], M, 4)
    with pytest.raises(ArgumentError):
        embed_linear(np.eye(8), M, 2, eps=-1.0)


def test_kernel_identity_reduces_to_direct():
    _, M = _seeded_M(9, 7)
    k = embed_kernel(np.eye(9), M, 2, eps=0.0)
    assert k.objective == pytest.approx(embed_direct(M, 2).objective, abs=1e-8)


def test_kernel_linear_equivalence_full_rank():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((10, 10))
    _, M = _seeded_M(10, 8)
    lin = embed_linear(X, M, 3, eps=0.0)
    ker = embed_kernel(X.T @ X, M, 3, eps=0.0)
    assert ker.objective == pytest.approx(lin.objective, abs=1e-6)


def test_kernel_gaussian_constraint():
    P = np.random.default_rng(10).standard_normal((3, 10))
    _, M = _seeded_M(10, 10)
    K = similarity_matrix(P, "gaussian").values
    e = embed_kernel(K, M, 2)
    KB = K @ e.beta
    assert np.linalg.norm(KB.T @ KB + e.eps * e.beta.T @ e.beta - np.eye(2)) <= 1e-6


def test_kernel_rejects_asymmetric():
    _, M = _seeded_M(5, 0, K=2)
    K = np.eye(5)
    K[0, 1] = 0.5
    with pytest.raises(ArgumentError):
        embed_kernel(K, M, 2)


def test_unknown_variant():
    with pytest.raises(ArgumentError):
        embed_structure(np.eye(3), 1, "spectral")


@pytest.mark.parametrize("variant", ["direct", "linear", "kernel"])
@pytest.mark.parametrize("seed", range(3))
def test_objective_equals_eigenvalue_sum(variant, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 12))
    _, M = _seeded_M(12, seed)
    Q = M.structure()
    kw = {"X": X} if variant == "linear" else {"Kphi": similarity_matrix(X, "gaussian").values}
    prev_gap = None
    for d in (1, 2, 3, 4):
        e = embed_structure(Q, d, variant, **(kw if variant != "direct" else {}))
        assert e.objective >= -1e-12
        assert e.objective == pytest.approx(e.eigenvalues.sum(), abs=1e-8)
        gap = abs(e.objective - e.eigenvalues.sum()) / d
        if prev_gap is not None:
            assert gap <= prev_gap + 1e-8
        prev_gap = gap


def test_structure_of_reconstruction_matrix():
    M = ReconstructionMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(M.structure(), [[2, -2], [-2, 2]])
    assert np.allclose(linalg.eigvalsh(M.structure()), [0, 4])
