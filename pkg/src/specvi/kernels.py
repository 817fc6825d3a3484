"""Hot iteration kernels, numba-compiled when available.

The affine fixed-point loop, the Horner partial-sum loop and the
power-vanishing scan dominate runtime (up to 1e5 small matrix-vector
products per run), so they are compiled with numba's @njit. A pure-numpy
path runs the very same source when numba is missing or when the
environment variable SPECVI_NUMBA is set to 0/false/off.

Both backends are importable side by side (``*_numpy`` / ``*_jit``) so
``benchmarks/bench_kernels.py`` can compare them in one process; the
unsuffixed names are the selected path used by the rest of the package.
"""

import math
import os

import numpy as np

STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_DIVERGED = 2

#: Iterates whose inf-norm exceeds this are declared diverged.
DIVERGENCE_GUARD = 1e12


def _numba_requested():
    value = os.environ.get("SPECVI_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


def _affine_iteration(A, b, alpha, tol, max_iter, guard, iter_cap):
    """Run v <- b + alpha*(A @ v) from v = 0 until the stopping rule fires.

    Returns (v, res_inf, res_2, k_final, status, iter_buf, stored) where
    res_* hold one entry per executed step, iter_buf rows 0..stored-1 are
    the iterates v^(0)..v^(stored-1) (row 0 is the zero start) and status
    is one of the STATUS_* codes.
    """
    K = b.shape[0]
    v = np.zeros(K)
    res_inf = np.empty(max_iter)
    res_2 = np.empty(max_iter)
    rows = iter_cap + 1 if iter_cap > 0 else 1
    iter_buf = np.zeros((rows, K))
    stored = 1 if iter_cap > 0 else 0
    status = STATUS_MAX_ITER
    k_final = 0
    for step in range(max_iter):
        w = A @ v
        r_inf = 0.0
        r_sq = 0.0
        v_norm = 0.0
        for i in range(K):
            x = b[i] + alpha * w[i]
            d = x - v[i]
            if d < 0.0:
                d = -d
            if d > r_inf:
                r_inf = d
            r_sq += d * d
            v[i] = x
            if x < 0.0:
                x = -x
            if x > v_norm:
                v_norm = x
        res_inf[step] = r_inf
        res_2[step] = math.sqrt(r_sq)
        k_final = step + 1
        if stored > 0 and step + 1 <= iter_cap:
            for i in range(K):
                iter_buf[step + 1, i] = v[i]
            stored = step + 2
        if v_norm > guard or r_inf != r_inf or v_norm != v_norm:
            status = STATUS_DIVERGED
            break
        if r_inf <= tol:
            status = STATUS_CONVERGED
            break
    return v, res_inf[:k_final], res_2[:k_final], k_final, status, iter_buf, stored


def _horner_partial_sum(A, b, alpha, k, guard):
    """Partial sum sum_{i=0}^{k} alpha^i A^i b by Horner accumulation.

    Each sweep applies x <- b + alpha*(A @ x), the same update as the
    iteration kernel, so the two stay bit-for-bit comparable. Returns
    (x, bad_step); bad_step is -1 on success, else the 1-based sweep at
    which the guard tripped.
    """
    K = b.shape[0]
    x = b.copy()
    for step in range(k):
        w = A @ x
        x_norm = 0.0
        for i in range(K):
            y = b[i] + alpha * w[i]
            x[i] = y
            if y < 0.0:
                y = -y
            if y > x_norm:
                x_norm = y
        if x_norm > guard or x_norm != x_norm:
            return x, step + 1
    return x, -1


def _power_max_norms(A, k_max, threshold):
    """Scan max-norms of A^k for k = 1..k_max, stopping at the threshold.

    Returns (vanished, first_k, final_norm); first_k is 0 when the
    threshold was never reached. Non-finite entries (overflow) end the
    scan with final_norm = inf.
    """
    n = A.shape[0]
    B = A.copy()
    final_norm = 0.0
    for k in range(1, k_max + 1):
        norm = 0.0
        for i in range(n):
            for j in range(n):
                x = B[i, j]
                if x < 0.0:
                    x = -x
                if x > norm:
                    norm = x
        if norm != norm or norm == np.inf:
            return False, 0, np.inf
        final_norm = norm
        if norm <= threshold:
            return True, k, norm
        if k < k_max:
            B = B @ A
    return False, 0, final_norm


affine_iteration_numpy = _affine_iteration
horner_partial_sum_numpy = _horner_partial_sum
power_max_norms_numpy = _power_max_norms

try:
    import numba

    affine_iteration_jit = numba.njit(cache=True)(_affine_iteration)
    horner_partial_sum_jit = numba.njit(cache=True)(_horner_partial_sum)
    power_max_norms_jit = numba.njit(cache=True)(_power_max_norms)
    HAS_NUMBA = True
except ImportError:
    affine_iteration_jit = None
    horner_partial_sum_jit = None
    power_max_norms_jit = None
    HAS_NUMBA = False

if HAS_NUMBA and _numba_requested():
    ACTIVE_BACKEND = "numba"
    affine_iteration = affine_iteration_jit
    horner_partial_sum = horner_partial_sum_jit
    power_max_norms = power_max_norms_jit
else:
    ACTIVE_BACKEND = "numpy"
    affine_iteration = affine_iteration_numpy
    horner_partial_sum = horner_partial_sum_numpy
    power_max_norms = power_max_norms_numpy


def as_kernel_matrix(M):
    """C-contiguous float64 view/copy of a 2-D array for the kernels."""
    out = np.ascontiguousarray(M, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError("kernel matrix must be 2-D")
    return out


def as_kernel_vector(v):
    out = np.ascontiguousarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError("kernel vector must be 1-D")
    return out
