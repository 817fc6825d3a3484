"""Exact and spectrally-projected value iteration for policy evaluation.

The projected recursion runs in the K-dimensional subspace:

    v~(0) = 0,   v~(k+1) = U^T c + alpha * (U^T P U) v~(k)

with the compression A = U^T P U and constant term b = U^T c formed once.
Exact value iteration is the same affine loop with A = P, b = c. Both go
through the shared kernel, so the K = n coordinate case reproduces the
exact iterates bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    InsufficientTraceError,
    InvalidParameterError,
    PowerOverflowError,
    SingularSystemError,
    ZeroResidualError,
)
from .mdp import InducedChain, as_discount
from .spectral import CompressedOperator, OrthonormalBasis, compress, spectral_radius

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100000

#: Full iterates are kept only when the run finishes within this many steps.
ITERATE_STORAGE_CAP = 1000

#: Certificates (rho of the iteration matrix) are computed up to this size.
CERTIFICATE_SIZE_LIMIT = 500


class RunStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


_STATUS_FROM_CODE = {
    kernels.STATUS_CONVERGED: RunStatus.CONVERGED,
    kernels.STATUS_MAX_ITER: RunStatus.MAX_ITER,
    kernels.STATUS_DIVERGED: RunStatus.DIVERGED,
}


@dataclass(frozen=True)
class IterationTrace:
    """Per-step residuals (and optionally the iterates) of one run."""

    residuals_inf: np.ndarray
    residuals_2: np.ndarray
    k_final: int
    status: RunStatus
    iterates: np.ndarray | None = None

    def __post_init__(self):
        for name in ("residuals_inf", "residuals_2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.iterates is not None:
            it = np.asarray(self.iterates, dtype=np.float64)
            it.setflags(write=False)
            object.__setattr__(self, "iterates", it)


@dataclass(frozen=True)
class ConvergenceCertificate:
    """rho(A) and alpha*rho(A); certified means the product is < 1."""

    rho_A: float
    alpha_rho: float
    certified: bool


@dataclass(frozen=True)
class EvaluationResult:
    """Fixed-point estimate plus its trace and optional certificate."""

    v_fixed: np.ndarray
    trace: IterationTrace
    certificate: ConvergenceCertificate | None = None

    def __post_init__(self):
        v = np.asarray(self.v_fixed, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "v_fixed", v)


@dataclass(frozen=True)
class RateEstimate:
    """Tail-geometric-mean residual ratio vs. the predicted alpha*rho."""

    empirical_rate: float
    predicted_rate: float
    window: int


def _run_affine(A, b, alpha, tol, max_iter, store_iterates):
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    if max_iter < 1:
        raise InvalidParameterError("max_iter must be >= 1")
    cap = min(max_iter, ITERATE_STORAGE_CAP) if store_iterates else 0
    with np.errstate(over="ignore", invalid="ignore"):
        v, res_inf, res_2, k_final, code, iter_buf, stored = kernels.affine_iteration(
            kernels.as_kernel_matrix(A),
            kernels.as_kernel_vector(b),
            float(alpha),
            float(tol),
            int(max_iter),
            kernels.DIVERGENCE_GUARD,
            cap,
        )
    iterates = None
    if store_iterates and k_final <= ITERATE_STORAGE_CAP and stored >= k_final + 1:
        iterates = iter_buf[: k_final + 1].copy()
    trace = IterationTrace(
        residuals_inf=res_inf.copy(),
        residuals_2=res_2.copy(),
        k_final=int(k_final),
        status=_STATUS_FROM_CODE[code],
        iterates=iterates,
    )
    return v, trace


def exact_vi(
    chain: InducedChain,
    alpha,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    store_iterates: bool = False,
) -> EvaluationResult:
    """Plain value iteration V <- c + alpha*P V from V = 0.

    Stops when the successive-difference infinity norm falls to tol.
    Always converges eventually: alpha*||P||_inf = alpha < 1.
    """
    a = float(as_discount(alpha))
    v, trace = _run_affine(chain.P.entries, chain.c, a, tol, max_iter, store_iterates)
    return EvaluationResult(v_fixed=v, trace=trace, certificate=None)


def projected_vi(
    chain: InducedChain,
    U: OrthonormalBasis,
    alpha,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    store_iterates: bool = False,
    compute_certificate: bool | None = None,
) -> EvaluationResult:
    """Projected value iteration in the K-dimensional subspace spanned by U.

    A = U^T P U and b = U^T c are formed once, then the affine loop runs
    until tol, max_iter, or the divergence guard (inf norm above 1e12).
    Divergence is reported as a status, not an exception: it is evidence
    that alpha*rho(U^T P U) >= 1 for this instance. The certificate
    (rho(A), alpha*rho(A)) is attached by default for K <= 500;
    compute_certificate forces it on or off.
    """
    if U.n != chain.n:
        raise DimensionMismatchError(
            f"basis rows {U.n} do not match chain size {chain.n}"
        )
    a = float(as_discount(alpha))
    op = compress(chain.P, U)
    b = U.U.T @ chain.c
    v, trace = _run_affine(op.A, b, a, tol, max_iter, store_iterates)
    want_cert = (
        compute_certificate
        if compute_certificate is not None
        else U.K <= CERTIFICATE_SIZE_LIMIT
    )
    certificate = None
    if want_cert:
        rho_A = spectral_radius(op.A).rho
        certificate = ConvergenceCertificate(
            rho_A=rho_A, alpha_rho=a * rho_A, certified=a * rho_A < 1.0
        )
    return EvaluationResult(v_fixed=v, trace=trace, certificate=certificate)


def series_eval(A, b, alpha, k: int) -> np.ndarray:
    """Partial sum sum_{i=0}^{k} alpha^i A^i b via Horner accumulation.

    Never forms explicit matrix powers: each sweep applies the same
    x <- b + alpha*(A x) update as the iteration, which keeps the
    partial-sum identity with the projected iterates numerically exact.
    """
    if k < 0:
        raise InvalidParameterError("k must be >= 0")
    M = A.A if isinstance(A, CompressedOperator) else np.asarray(A, dtype=np.float64)
    vec = kernels.as_kernel_vector(b)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != vec.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: A {M.shape}, b {vec.shape}"
        )
    a = float(as_discount(alpha))
    with np.errstate(over="ignore", invalid="ignore"):
        x, bad_step = kernels.horner_partial_sum(
            kernels.as_kernel_matrix(M), vec, a, int(k), kernels.DIVERGENCE_GUARD
        )
    if bad_step >= 0:
        raise PowerOverflowError(
            f"partial sum exceeded the divergence guard at sweep {bad_step}",
            k=bad_step,
        )
    return x


def direct_solve(A, b, alpha) -> np.ndarray:
    """Fixed-point oracle: solve (I - alpha*A) x = b by dense LU.

    Backward-stable partial pivoting keeps the residual
    ||(I - alpha*A)x - b||_inf below ~1e-10*(1 + ||b||_inf) for the
    well-conditioned systems this library produces.
    """
    M = A.A if isinstance(A, CompressedOperator) else np.asarray(A, dtype=np.float64)
    vec = np.asarray(b, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != vec.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: A {M.shape}, b {vec.shape}"
        )
    a = float(as_discount(alpha))
    system = np.eye(M.shape[0]) - a * M
    try:
        x = np.linalg.solve(system, vec)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("(I - alpha*A) is singular") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("(I - alpha*A) is numerically singular")
    return x


def reconstruct(U: OrthonormalBasis, v_tilde) -> np.ndarray:
    """Lift a subspace vector back to state space: U @ v_tilde."""
    v = np.asarray(v_tilde, dtype=np.float64)
    if v.shape != (U.K,):
        raise DimensionMismatchError(
            f"expected a length-{U.K} vector, got shape {v.shape}"
        )
    return U.U @ v


@dataclass(frozen=True)
class ApproximationError:
    """Difference norms between the exact and the lifted projected solution."""

    err_inf: float
    err_2: float
    rel_inf: float


def approximation_error(v_exact, v_lifted) -> ApproximationError:
    """Error norms of v_lifted - v_exact; rel_inf uses max(1, ||v_exact||_inf)."""
    a = np.asarray(v_exact, dtype=np.float64)
    b = np.asarray(v_lifted, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch: {a.shape} vs {b.shape}")
    d = b - a
    err_inf = float(np.abs(d).max()) if d.size else 0.0
    err_2 = float(np.linalg.norm(d))
    denom = max(1.0, float(np.abs(a).max()) if a.size else 0.0)
    return ApproximationError(err_inf=err_inf, err_2=err_2, rel_inf=err_inf / denom)


def rate_estimate(trace: IterationTrace, window: int, predicted_rate: float) -> RateEstimate:
    """Empirical asymptotic rate: geometric mean of successive residual
    ratios over the final `window` steps (it telescopes to
    (r[-1]/r[-1-window])^(1/window)).

    The predicted rate is supplied by the caller as alpha*rho of the
    relevant iteration operator.
    """
    if window < 2:
        raise InvalidParameterError("window must be >= 2")
    res = np.asarray(trace.residuals_inf, dtype=np.float64)
    if res.shape[0] < window + 1:
        raise InsufficientTraceError(
            f"need at least {window + 1} residuals, trace has {res.shape[0]}"
        )
    tail = res[-(window + 1):]
    if np.any(tail == 0.0):
        raise ZeroResidualError(
            "a residual in the window is exactly zero; the ratio is undefined"
        )
    rate = float((tail[-1] / tail[0]) ** (1.0 / window))
    if not math.isfinite(rate):
        raise InsufficientTraceError("residual ratios are not finite")
    return RateEstimate(empirical_rate=rate, predicted_rate=float(predicted_rate), window=window)
