"""Dense complex linear algebra foundation.

Matrices and state vectors are carried as plain numpy arrays (complex or
real). This module owns the SVD (one-sided Jacobi), norms, condition
numbers, and seeded random test-matrix generation used everywhere else.
Everything here is a pure function over immutable inputs; arrays are never
mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Svd",
    "StateVector",
    "SvdConvergenceError",
    "svd",
    "condition_number",
    "spectral_norm",
    "two_norm",
    "matvec",
    "random_orthogonal",
    "random_with_condition",
    "as_matrix",
    "check_unitary",
]

# Jacobi sweep cap and off-diagonal Gram convergence factor (relative to
# the squared Frobenius norm of the input).
_JACOBI_MAX_SWEEPS = 100
_JACOBI_TOL_FACTOR = 1e-14

_UNITARY_TOL_FACTOR = 1e-12


class SvdConvergenceError(RuntimeError):
    """One-sided Jacobi failed to converge within the sweep cap."""

    def __init__(self, sweeps: int, off_norm: float):
        self.sweeps = sweeps
        self.off_norm = off_norm
        super().__init__(
            f"Jacobi SVD did not converge after {sweeps} sweeps "
            f"(largest off-diagonal Gram entry {off_norm:.3e})"
        )


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D ndarray without copying when possible."""
    m = np.asarray(a)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def check_unitary(u: np.ndarray, tol_factor: float = _UNITARY_TOL_FACTOR) -> None:
    """Raise if ``u`` is not unitary to ``tol_factor * dim``."""
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        raise ValueError(f"unitary must be square, got {u.shape}")
    dim = u.shape[0]
    defect = np.linalg.norm(u.conj().T @ u - np.eye(dim), 2)
    if defect > tol_factor * dim:
        raise ValueError(f"matrix is not unitary: ||U^H U - I|| = {defect:.3e}")


@dataclass(frozen=True)
class StateVector:
    """Quantum state carrier: amplitudes over a power-of-two dimension."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a nonempty 1-D array")
        n = amps.size
        if n & (n - 1) != 0:
            raise ValueError(f"state dimension must be a power of two, got {n}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) <= 1e-12

    def require_normalized(self) -> None:
        if not self.is_normalized:
            raise ValueError(f"state is not normalized: ||psi|| = {self.norm()!r}")


@dataclass(frozen=True)
class Svd:
    """Economy SVD ``a = u @ diag(singular_values) @ v.conj().T``."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.conj().T


def _complete_column(u: np.ndarray, col: int) -> np.ndarray:
    """Fill a zero column of ``u`` with a unit vector orthogonal to the rest."""
    m = u.shape[0]
    best, best_norm = None, -1.0
    for k in range(m):
        cand = np.zeros(m, dtype=complex)
        cand[k] = 1.0
        for j in range(u.shape[1]):
            if j == col:
                continue
            cand -= np.vdot(u[:, j], cand) * u[:, j]
        nrm = np.linalg.norm(cand)
        if nrm > best_norm:
            best, best_norm = cand, nrm
    assert best is not None and best_norm > 0.5 / m
    return best / best_norm


def svd(a) -> Svd:
    """Singular value decomposition by one-sided Jacobi rotations.

    Returns the economy factorization with singular values sorted
    nonincreasing. Accurate and simple at the dimensions this package
    targets (N <= 256); convergence is declared when every off-diagonal
    Gram entry falls below 1e-14 times the squared Frobenius norm.

    Raises
    ------
    SvdConvergenceError
        If the sweep cap (100) is exhausted, carrying the sweep count.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        flipped = svd(a.conj().T)
        return Svd(u=flipped.v, singular_values=flipped.singular_values, v=flipped.u)

    work = a.astype(complex, copy=True)
    v = np.eye(n, dtype=complex)
    frob2 = float(np.sum(np.abs(a) ** 2))
    if frob2 == 0.0:
        return Svd(u=np.eye(m, n, dtype=complex), singular_values=np.zeros(n), v=v)
    tol = _JACOBI_TOL_FACTOR * frob2

    worst = np.inf
    for _ in range(_JACOBI_MAX_SWEEPS):
        worst = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = complex(np.vdot(work[:, p], work[:, q]))
                mag = abs(apq)
                worst = max(worst, mag)
                if mag <= tol:
                    continue
                app = float(np.vdot(work[:, p], work[:, p]).real)
                aqq = float(np.vdot(work[:, q], work[:, q]).real)
                alpha = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                col_p = work[:, p].copy()
                work[:, p] = c * col_p - s * np.conj(alpha) * work[:, q]
                work[:, q] = s * alpha * col_p + c * work[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * np.conj(alpha) * v[:, q]
                v[:, q] = s * alpha * vp + c * v[:, q]
        if worst <= tol:
            break
    else:
        raise SvdConvergenceError(_JACOBI_MAX_SWEEPS, worst)

    norms = np.linalg.norm(work, axis=0)
    order = np.argsort(-norms)
    norms = norms[order]
    work = work[:, order]
    v = v[:, order]

    u = np.zeros((m, n), dtype=complex)
    zero_cut = np.sqrt(frob2) * 1e-15
    for j in range(n):
        if norms[j] > zero_cut:
            u[:, j] = work[:, j] / norms[j]
        else:
            norms[j] = 0.0
            u[:, j] = _complete_column(u, j)
    return Svd(u=u, singular_values=norms, v=v)


def spectral_norm(a) -> float:
    """Largest singular value (2-norm) of ``a``."""
    return float(svd(a).singular_values[0])


def two_norm(vec) -> float:
    """Euclidean norm of a vector."""
    v = np.asarray(vec)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    return float(np.linalg.norm(v))


def matvec(a, vec) -> np.ndarray:
    """Matrix-vector product with an explicit dimension check."""
    a = as_matrix(a)
    v = np.asarray(vec)
    if v.ndim != 1 or a.shape[1] != v.size:
        raise ValueError(f"dimension mismatch: {a.shape} @ {v.shape}")
    return a @ v


def condition_number(a) -> float:
    """Spectral condition number sigma_max / sigma_min.

    Raises
    ------
    ValueError
        If the matrix is numerically singular
        (sigma_min <= 1e-14 * sigma_max).
    """
    s = svd(a).singular_values
    smax, smin = float(s[0]), float(s[-1])
    if smin <= 1e-14 * smax:
        raise ValueError("matrix numerically singular")
    return smax / smin


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random real orthogonal matrix: QR of a standard normal draw.

    The R diagonal signs are fixed to make the factor unique per draw.
    """
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_with_condition(n: int, kappa: float, seed: int) -> np.ndarray:
    """Seeded random real matrix with prescribed condition number.

    Built as ``W @ diag(sigma) @ V.T`` with singular values log-spaced
    from 1 down to 1/kappa (so the spectral norm is 1 and the matrix is
    ready for block-encoding) and W, V random orthogonal. Deterministic
    per seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    rng = np.random.default_rng(seed)
    sigma = np.geomspace(1.0, 1.0 / kappa, n)
    w = random_orthogonal(n, rng)
    v = random_orthogonal(n, rng)
    return (w * sigma) @ v.T
