import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from specvi import kernels

needs_numba = pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba not installed")


def _instance(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((n, n))
    A /= A.sum(axis=1, keepdims=True)
    b = rng.random(n)
    return A, b


def test_backend_selected():
    assert kernels.ACTIVE_BACKEND in ("numba", "numpy")
    assert kernels.affine_iteration is not None


def test_affine_iteration_converges_to_fixed_point():
    A, b = _instance(8, 0)
    v, ri, r2, k, status, _, _ = kernels.affine_iteration(A, b, 0.9, 1e-12, 100000, 1e12, 0)
    ref = np.linalg.solve(np.eye(8) - 0.9 * A, b)
    assert status == kernels.STATUS_CONVERGED
    assert np.abs(v - ref).max() < 1e-10
    assert len(ri) == k == len(r2)
    assert ri[-1] <= 1e-12


def test_affine_iteration_divergence_guard():
    A = 2.0 * np.eye(2)
    b = np.ones(2)
    v, ri, r2, k, status, _, _ = kernels.affine_iteration(A, b, 0.9, 1e-12, 100000, 1e12, 0)
    assert status == kernels.STATUS_DIVERGED
    assert k < 100000


def test_affine_iteration_max_iter_status():
    A, b = _instance(5, 1)
    _, _, _, k, status, _, _ = kernels.affine_iteration(A, b, 0.99, 1e-300, 50, 1e12, 0)
    assert status == kernels.STATUS_MAX_ITER
    assert k == 50


def test_iterate_buffer_contents():
    A, b = _instance(4, 2)
    v, ri, _, k, _, buf, stored = kernels.affine_iteration(A, b, 0.5, 1e-300, 10, 1e12, 10)
    assert stored == 11
    assert_array_equal(buf[0], np.zeros(4))
    # manual recurrence replay
    x = np.zeros(4)
    for j in range(10):
        x = b + 0.5 * (A @ x)
        assert_allclose(buf[j + 1], x, rtol=0, atol=0)


def test_horner_matches_iteration_bitwise():
    A, b = _instance(6, 3)
    _, _, _, _, _, buf, stored = kernels.affine_iteration(A, b, 0.95, 1e-300, 30, 1e12, 30)
    for k in range(30):
        x, bad = kernels.horner_partial_sum(A, b, 0.95, k, 1e12)
        assert bad == -1
        assert_array_equal(x, buf[k + 1])


def test_horner_overflow_flag():
    x, bad = kernels.horner_partial_sum(3.0 * np.eye(2), np.ones(2), 0.9, 200, 1e12)
    assert bad > 0


def test_power_max_norms_contraction():
    vanished, first_k, final = kernels.power_max_norms(0.5 * np.eye(3), 100, 1e-12)
    assert vanished and first_k == 40


def test_power_max_norms_identity():
    vanished, first_k, final = kernels.power_max_norms(np.eye(3), 100, 1e-12)
    assert not vanished and final == 1.0


def test_power_max_norms_overflow_to_inf():
    with np.errstate(over="ignore"):
        vanished, _, final = kernels.power_max_norms(10.0 * np.eye(2), 5000, 1e-12)
    assert not vanished and final == np.inf


@needs_numba
class TestBackendAgreement:
    def test_affine_iteration(self):
        A, b = _instance(7, 4)
        out_j = kernels.affine_iteration_jit(A, b, 0.9, 1e-10, 100000, 1e12, 20)
        out_n = kernels.affine_iteration_numpy(A, b, 0.9, 1e-10, 100000, 1e12, 20)
        assert out_j[3] == out_n[3] and out_j[4] == out_n[4]
        assert_allclose(out_j[0], out_n[0], rtol=1e-13, atol=0)
        assert_allclose(out_j[1], out_n[1], rtol=1e-10, atol=1e-300)

    def test_horner(self):
        A, b = _instance(5, 5)
        x_j, bad_j = kernels.horner_partial_sum_jit(A, b, 0.8, 25, 1e12)
        x_n, bad_n = kernels.horner_partial_sum_numpy(A, b, 0.8, 25, 1e12)
        assert bad_j == bad_n == -1
        assert_allclose(x_j, x_n, rtol=1e-13, atol=0)

    def test_power_max_norms(self):
        rng = np.random.default_rng(6)
        A = 0.8 * rng.random((6, 6)) / 3.0
        out_j = kernels.power_max_norms_jit(A, 500, 1e-12)
        out_n = kernels.power_max_norms_numpy(A, 500, 1e-12)
        assert out_j[0] == out_n[0] and out_j[1] == out_n[1]
        assert_allclose(out_j[2], out_n[2], rtol=1e-12, atol=0)
