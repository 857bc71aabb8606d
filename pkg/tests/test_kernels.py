import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mvlpe.errors import ArgumentError, DataError
from mvlpe.kernels import (
    AUTO,
    KernelSpec,
    degree_matrix,
    graph_laplacian,
    median_bandwidth,
    similarity_matrix,
)

from oracles import brute_median_distance, double_loop_trace


def test_identical_points():
    K = similarity_matrix(np.zeros((2, 2)), "gaussian", sigma=1.0).values
    assert np.array_equal(K, np.ones((2, 2)))


def test_gaussian_by_hand():
    K = similarity_matrix(np.array([[0.0, 2.0]]), "gaussian", sigma=2.0).values
    assert K[0, 1] == pytest.approx(np.exp(-0.5), rel=1e-15)
    assert K[0, 0] == 1.0


def test_auto_bandwidth_matches_brute_force():
    P = np.random.default_rng(11).standard_normal((3, 10))
    S = similarity_matrix(P, "gaussian", sigma=AUTO)
    assert S.params["sigma"] == pytest.approx(brute_median_distance(P), rel=1e-14)


def test_auto_bandwidth_even_count_takes_lower_median():
    # 4 points on a line -> 6 distances {1,1,1,2,2,3}; lower median = 1
    P = np.array([[0.0, 1.0, 2.0, 3.0]])
    assert median_bandwidth(P) == 1.0


def test_auto_bandwidth_falls_back_to_one():
    P = np.zeros((2, 5))
    P[:, 4] = 1.0  # 6 of 10 distances are zero
    assert median_bandwidth(P) == 1.0


def test_bad_sigma():
    with pytest.raises(ArgumentError):
        similarity_matrix(np.eye(2), "gaussian", sigma=0.0)
    with pytest.raises(ArgumentError):
        KernelSpec(sigma=-1.0)


def test_nonfinite_points():
    with pytest.raises(DataError):
        similarity_matrix(np.array([[0.0, np.nan]]))


def test_linear_and_polynomial():
    P = np.random.default_rng(0).standard_normal((3, 4))
    assert np.allclose(similarity_matrix(P, "linear").values, P.T @ P)
    poly = similarity_matrix(P, "polynomial", degree=3, offset=0.5).values
    assert np.allclose(poly, (P.T @ P + 0.5) ** 3)


def test_laplacian_two_by_two():
    L = graph_laplacian(np.ones((2, 2)))
    assert np.array_equal(L, np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_laplacian_trace_identity():
    rng = np.random.default_rng(8)
    K = similarity_matrix(rng.standard_normal((4, 8)), "gaussian").values
    L = graph_laplacian(K)
    for _ in range(100):
        U = rng.standard_normal((2, 8))
        t = np.trace(U @ L @ U.T)
        assert t == pytest.approx(double_loop_trace(U, K), rel=1e-8)


def test_degree_recompute_exact():
    K = similarity_matrix(np.random.default_rng(1).standard_normal((2, 6)))
    D1, D2 = degree_matrix(K), degree_matrix(K)
    assert np.array_equal(D1.diag, D2.diag)
    assert np.all(D1.diag >= 0)


point_clouds = st.integers(2, 12).flatmap(
    lambda n: arrays(np.float64, (3, n), elements=st.floats(-50, 50, allow_nan=False, width=64))
)


@given(P=point_clouds)
@settings(max_examples=60, deadline=None)
def test_gaussian_invariants(P):
    S = similarity_matrix(P, "gaussian")
    K = S.values
    assert np.all(np.abs(K - K.T) <= 1e-12 * np.maximum(1, np.abs(K)))
    sigma = S.params["sigma"]
    sq = ((P[:, :, None] - P[:, None, :]) ** 2).sum(axis=0)
    representable = sq / (2 * sigma**2) < 700  # exp underflows to 0 beyond this
    assert np.all(K[representable] > 0) and np.all(K >= 0)
    assert np.all(K <= 1) and np.all(np.diag(K) == 1)


@given(P=point_clouds, seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_laplacian_psd_and_row_sums(P, seed):
    L = graph_laplacian(similarity_matrix(P, "gaussian"))
    assert np.allclose(L, L.T, atol=0)
    assert np.abs(L.sum(axis=1)).max() <= 1e-10 * max(1.0, np.abs(L).max())
    assert np.linalg.eigvalsh(L).min() >= -1e-10 * max(1.0, np.abs(L).max())
    x = np.random.default_rng(seed).standard_normal((1000, L.shape[0]))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    assert np.einsum("bi,ij,bj->b", x, L, x).min() >= -1e-10 * max(1.0, np.abs(L).max())


@given(scale=st.floats(0.01, 100), seed=st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_linear_kernel_rank_order_scale_invariant(scale, seed):
    P = np.random.default_rng(seed).standard_normal((3, 6))
    iu = np.triu_indices(6, 1)
    a = similarity_matrix(P, "linear").values[iu]
    b = similarity_matrix(scale * P, "linear").values[iu]
    assert np.array_equal(np.argsort(a, kind="stable"), np.argsort(b, kind="stable"))
