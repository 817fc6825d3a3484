"""Spectral radius computation, orthonormal bases, operator compression,
and matrix-power diagnostics.

Matrix powers are always formed by repeated multiplication, never through
an eigendecomposition, so transient growth of non-normal matrices shows
up in the measured norms instead of being idealized away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import (
    DimensionMismatchError,
    EigenFailureError,
    InvalidKError,
    InvalidParameterError,
    MatrixTooLargeError,
    NonSquareError,
    PowerOverflowError,
    SplitConjugatePairError,
)
from .mdp import DiscountFactor, StochasticMatrix, as_discount

#: Above this size the dense eigensolver refuses; use an explicit estimator.
DENSE_EIG_LIMIT = 500

#: Orthonormality tolerance on ||U^T U - I||_max.
ORTHONORMAL_TOL = 1e-12

#: Rescaling window for scaled power accumulation in gelfand_sequence.
_RESCALE_HI = 1e100
_RESCALE_LO = 1e-100

BASIS_STRATEGIES = ("schur_dominant", "svd_top", "random_orthonormal", "coordinate")
NORM_KINDS = ("two_norm", "inf_norm")


def square_matrix(M) -> np.ndarray:
    """Coerce StochasticMatrix / CompressedOperator / array to a square float array."""
    if isinstance(M, StochasticMatrix):
        M = M.entries
    elif isinstance(M, CompressedOperator):
        M = M.A
    out = np.ascontiguousarray(M, dtype=np.float64)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {out.shape}")
    return out


def two_norm(M) -> float:
    """Spectral norm as sqrt of the dominant eigenvalue of the Gram matrix M^T M.

    Non-finite input (e.g. an overflowed power) reports as inf so callers
    can surface it as overflow.
    """
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        return math.inf
    with np.errstate(over="ignore"):
        gram = M.T @ M
    if not np.all(np.isfinite(gram)):
        return math.inf
    try:
        ev = np.linalg.eigvalsh(gram)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError("Gram eigensolve failed") from exc
    top = float(ev[-1])
    return math.sqrt(top) if top > 0.0 else 0.0


def inf_norm(M) -> float:
    """Induced infinity norm: maximum absolute row sum."""
    M = np.asarray(M, dtype=np.float64)
    return float(np.abs(M).sum(axis=1).max())


@dataclass(frozen=True)
class SpectralEstimate:
    """Spectral-radius value plus how it was obtained."""

    rho: float
    method: str
    iterations: int
    residual: float
    converged: bool = True


@dataclass(frozen=True)
class OrthonormalBasis:
    """n x K matrix with orthonormal columns, tagged by construction strategy."""

    U: np.ndarray
    strategy: str = "custom"

    def __post_init__(self):
        U = np.ascontiguousarray(self.U, dtype=np.float64)
        if U.ndim != 2:
            raise DimensionMismatchError("basis must be a 2-D array")
        n, K = U.shape
        if not (1 <= K <= n):
            raise InvalidKError(f"need 1 <= K <= n, got K={K}, n={n}")
        gram_err = np.abs(U.T @ U - np.eye(K)).max()
        if gram_err > ORTHONORMAL_TOL:
            raise InvalidParameterError(
                f"columns are not orthonormal: ||U^T U - I||_max = {gram_err:.3e}"
            )
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class CompressedOperator:
    """K x K compression U^T P U of an n x n operator onto span(U)."""

    A: np.ndarray
    source: np.ndarray | None = None
    basis: OrthonormalBasis | None = None

    def __post_init__(self):
        A = np.ascontiguousarray(self.A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NonSquareError(f"compressed operator must be square, got {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def K(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class GelfandSequence:
    """values[k-1] = ||A^k||^(1/k), k = 1..k_max, for one norm kind."""

    norm_kind: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def k_max(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BoundedPowerEstimate:
    """M = max_k ||(sqrt(alpha) A)^k||_2 over k = 0..k_max."""

    M: float
    k_max: int
    alpha: DiscountFactor


@dataclass(frozen=True)
class VanishingCheck:
    """Outcome of scanning whether A^k falls below a max-norm threshold."""

    vanishes: bool
    first_k: int | None
    final_norm: float


@dataclass(frozen=True)
class CompressionRadiusCheck:
    """Measured rho(P), rho(U^T P U) and their ratio for one (P, U) pair."""

    rho_P: float
    rho_A: float
    ratio: float


def spectral_radius(M) -> SpectralEstimate:
    """Exact spectral radius max_i |lambda_i(M)| via the dense eigensolver.

    Restricted to n <= 500; for larger matrices request an estimator
    explicitly (power_iteration_radius or gelfand_sequence).
    """
    A = square_matrix(M)
    n = A.shape[0]
    if n > DENSE_EIG_LIMIT:
        raise MatrixTooLargeError(
            f"n={n} exceeds the dense limit {DENSE_EIG_LIMIT}; use "
            "power_iteration_radius or gelfand_sequence instead"
        )
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError("dense eigensolver did not converge") from exc
    return SpectralEstimate(
        rho=float(np.abs(eigs).max()),
        method="dense_eig",
        iterations=0,
        residual=0.0,
    )


def power_iteration_radius(
    M, tol: float = 1e-10, max_iter: int = 10000, seed: int = 0
) -> SpectralEstimate:
    """Dominant eigenvalue modulus by normalized power iteration.

    Starts from a seeded random unit vector; the returned residual is the
    final Rayleigh-quotient movement. Convergence additionally requires a
    small eigenpair residual ||Mv - nu*v||, so a tie in modulus between
    distinct eigenvalues (e.g. +1/-1, or a complex pair) surfaces as
    converged=False rather than a silently wrong value. Unreliable by
    nature whenever the dominant modulus is attained more than once.
    """
    A = square_matrix(M)
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    nu_prev = np.inf
    nu = 0.0
    movement = np.inf
    for it in range(1, max_iter + 1):
        w = A @ v
        wn = np.linalg.norm(w)
        if wn == 0.0:
            # v landed in the kernel; modulus estimate collapses to 0
            return SpectralEstimate(0.0, "power_iteration", it, 0.0, True)
        nu = float(v @ w)
        movement = abs(nu - nu_prev)
        pair_residual = float(np.linalg.norm(w - nu * v))
        v = w / wn
        if movement <= tol and pair_residual <= tol * max(1.0, abs(nu)):
            return SpectralEstimate(abs(nu), "power_iteration", it, movement, True)
        nu_prev = nu
    return SpectralEstimate(abs(nu), "power_iteration", max_iter, movement, False)


def _schur_block_starts(T: np.ndarray, tol: float) -> list[int]:
    starts = []
    n = T.shape[0]
    i = 0
    while i < n:
        starts.append(i)
        if i + 1 < n and abs(T[i + 1, i]) > tol:
            i += 2
        else:
            i += 1
    return starts


def _block_modulus(T: np.ndarray, start: int, size: int) -> float:
    if size == 1:
        return abs(float(T[start, start]))
    block = T[start : start + 2, start : start + 2]
    return float(np.abs(np.linalg.eigvals(block)).max())


def _sorted_real_schur(P: np.ndarray):
    """Real Schur form with diagonal blocks ordered by decreasing modulus.

    Whole 1x1/2x2 blocks are moved with LAPACK's trexc, so complex pairs
    stay intact; the leading columns of the returned Q then span dominant
    invariant subspaces.
    """
    try:
        T, Z = scipy.linalg.schur(P, output="real")
    except scipy.linalg.LinAlgError as exc:
        raise EigenFailureError("Schur decomposition failed") from exc
    n = P.shape[0]
    subdiag_tol = 100 * np.finfo(np.float64).eps * max(1.0, inf_norm(P))
    T = np.asfortranarray(T)
    Z = np.asfortranarray(Z)
    pos = 0
    while pos < n:
        # selection sort on whole blocks: move the largest-modulus block
        # among those at or after pos to position pos
        starts = _schur_block_starts(T, subdiag_tol)
        bounds = starts + [n]
        blocks = [
            (bounds[i], bounds[i + 1] - bounds[i])
            for i in range(len(starts))
            if bounds[i] >= pos
        ]
        best_start, best_size = max(
            blocks, key=lambda blk: _block_modulus(T, blk[0], blk[1])
        )
        if best_start != pos:
            T, Z, info = scipy.linalg.lapack.dtrexc(T, Z, best_start + 1, pos + 1)
            if info != 0:
                raise EigenFailureError(f"Schur reordering failed (trexc info={info})")
            T = np.asfortranarray(T)
            Z = np.asfortranarray(Z)
        pos += best_size
    return np.ascontiguousarray(T), np.ascontiguousarray(Z), subdiag_tol


def build_basis(P, K: int, strategy: str = "schur_dominant", seed: int = 0) -> OrthonormalBasis:
    """Construct an n x K orthonormal basis by the named strategy.

    schur_dominant: first K vectors of the modulus-sorted real Schur form
    (spanning the dominant invariant subspace); raises SplitConjugatePair
    when K would cut a 2x2 complex-pair block. svd_top: top-K left
    singular vectors. random_orthonormal: thin QR of a seeded Gaussian.
    coordinate: first K standard basis vectors.
    """
    M = square_matrix(P)
    n = M.shape[0]
    if not (1 <= K <= n):
        raise InvalidKError(f"need 1 <= K <= n, got K={K}, n={n}")
    if strategy not in BASIS_STRATEGIES:
        raise InvalidParameterError(
            f"unknown strategy {strategy!r}; choose one of {BASIS_STRATEGIES}"
        )
    if strategy == "coordinate":
        U = np.eye(n)[:, :K]
    elif strategy == "random_orthonormal":
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((n, K))
        U, _ = np.linalg.qr(G, mode="reduced")
    elif strategy == "svd_top":
        try:
            left, _, _ = np.linalg.svd(M)
        except np.linalg.LinAlgError as exc:
            raise EigenFailureError("SVD did not converge") from exc
        U = left[:, :K]
    else:  # schur_dominant
        T, Z, subdiag_tol = _sorted_real_schur(M)
        if K < n and abs(T[K, K - 1]) > subdiag_tol:
            raise SplitConjugatePairError(
                f"K={K} cuts a 2x2 complex-pair Schur block; use K={K + 1} "
                "or another strategy"
            )
        U = Z[:, :K]
    return OrthonormalBasis(np.ascontiguousarray(U), strategy)


def compress(P, U: OrthonormalBasis) -> CompressedOperator:
    """A = U^T P U, computed as the two products (U^T P) U in that order."""
    M = square_matrix(P)
    if U.n != M.shape[0]:
        raise DimensionMismatchError(
            f"basis rows {U.n} do not match matrix size {M.shape[0]}"
        )
    A = (U.U.T @ M) @ U.U
    return CompressedOperator(A, source=M, basis=U)


def gelfand_sequence(A, k_max: int, norm_kind: str = "two_norm") -> GelfandSequence:
    """Norm sequence ||A^k||^(1/k) for k = 1..k_max by repeated multiplication.

    The running power is periodically rescaled (with the log of the scale
    carried separately) so values stay accurate even when ||A^k|| leaves
    the comfortable floating-point range; a genuine non-finite product
    still raises PowerOverflowError with the offending k.
    """
    M = square_matrix(A)
    if k_max < 1:
        raise InvalidParameterError("k_max must be >= 1")
    if norm_kind not in NORM_KINDS:
        raise InvalidParameterError(
            f"unknown norm kind {norm_kind!r}; choose one of {NORM_KINDS}"
        )
    norm = two_norm if norm_kind == "two_norm" else inf_norm
    values = np.zeros(k_max)
    B = M.copy()
    log_scale = 0.0
    for k in range(1, k_max + 1):
        nrm = norm(B)
        if not math.isfinite(nrm):
            raise PowerOverflowError(f"||A^{k}|| is not finite", k=k)
        if nrm == 0.0:
            break  # nilpotent from here on; later powers stay zero
        values[k - 1] = math.exp((log_scale + math.log(nrm)) / k)
        if k < k_max:
            B = B @ M
            peak = float(np.abs(B).max())
            if not math.isfinite(peak):
                raise PowerOverflowError(f"A^{k + 1} left the representable range", k=k + 1)
            if peak > _RESCALE_HI or (0.0 < peak < _RESCALE_LO):
                B = B / peak
                log_scale += math.log(peak)
    return GelfandSequence(norm_kind, values)


def power_vanishing_check(A, k_max: int, threshold: float) -> VanishingCheck:
    """Does ||A^k||_max fall to the threshold within k_max multiplications?

    Overflow folds into vanishes=False with final_norm=inf (itself
    evidence that rho > 1).
    """
    M = square_matrix(A)
    if k_max < 1:
        raise InvalidParameterError("k_max must be >= 1")
    if threshold <= 0:
        raise InvalidParameterError("threshold must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        vanished, first_k, final_norm = kernels.power_max_norms(
            kernels.as_kernel_matrix(M), k_max, threshold
        )
    return VanishingCheck(bool(vanished), int(first_k) if vanished else None, float(final_norm))


def bounded_power_constant(A, alpha, k_max: int) -> BoundedPowerEstimate:
    """M = max_{0 <= k <= k_max} ||(sqrt(alpha) A)^k||_2 (the k=0 term is 1).

    Raw repeated multiplication, so transient growth of non-normal A is
    measured; a power leaving the representable range raises
    PowerOverflowError, which numerically indicates rho(sqrt(alpha) A) >= 1.
    """
    M = square_matrix(A)
    alpha = as_discount(alpha)
    if k_max < 1:
        raise InvalidParameterError("k_max must be >= 1")
    S = math.sqrt(float(alpha)) * M
    B = np.eye(M.shape[0])
    bound = 1.0
    for k in range(1, k_max + 1):
        B = B @ S
        nrm = two_norm(B)
        if not math.isfinite(nrm):
            raise PowerOverflowError(
                f"||(sqrt(alpha) A)^{k}||_2 is not finite", k=k
            )
        if nrm > bound:
            bound = nrm
    return BoundedPowerEstimate(M=bound, k_max=k_max, alpha=alpha)


def check_compression_radius(P, U: OrthonormalBasis) -> CompressionRadiusCheck:
    """Measure rho(P) and rho(U^T P U) by the dense path and report both.

    This tests the claim that compression preserves the spectral radius
    instead of assuming it; callers aggregate the measured ratios.
    """
    M = square_matrix(P)
    rho_P = spectral_radius(M).rho
    A = compress(M, U)
    rho_A = spectral_radius(A.A).rho
    ratio = rho_A / rho_P if rho_P > 0 else math.inf
    return CompressionRadiusCheck(rho_P=rho_P, rho_A=rho_A, ratio=ratio)
