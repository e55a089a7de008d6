"""Input validation helpers shared by all modules."""

import numpy as np
import scipy.sparse as sp

#: Default tolerance for structural (skew/PSD) checks.
DEFAULT_TOL = 1e-10

#: Reciprocal condition threshold below which a matrix counts as singular.
RCOND_MIN = 1e-12


class DimensionError(ValueError):
    """Raised when matrix shapes are inconsistent."""


class StructureError(ValueError):
    """Raised when a matrix lacks a required structural property."""


def as_dense(M):
    """Return ``M`` as a dense float (or complex) ndarray."""
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M)


def check_matrix(M, name, shape=None, allow_sparse=False):
    """Coerce ``M`` to a 2-D float array and optionally check its shape.

    Parameters
    ----------
    M : array_like or sparse matrix
    name : str
        Name used in error messages.
    shape : tuple of (int or None), optional
        Expected shape; ``None`` entries are not checked.
    allow_sparse : bool
        If True, sparse inputs are returned in CSR form instead of densified.
    """
    if sp.issparse(M):
        M = M.tocsr() if allow_sparse else M.toarray()
    else:
        M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got ndim={M.ndim}")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(M.shape, shape)):
            if want is not None and got != want:
                raise DimensionError(
                    f"{name} has shape {M.shape}, expected {shape} (axis {axis})"
                )
    return M


def check_vector(x, name, n=None):
    x = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and x.shape[0] != n:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {n}")
    return x


def skew_violation(M):
    """Largest entry of ``|M + M^T|``."""
    M = as_dense(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(M + M.T)))


def symmetry_violation(M):
    """Largest entry of ``|M - M^T|``."""
    M = as_dense(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(M - M.T)))


def min_sym_eig(M):
    """Smallest eigenvalue of the symmetric part ``(M + M^T)/2``."""
    M = as_dense(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def psd_threshold(M, tol):
    return -tol * (1.0 + float(np.linalg.norm(as_dense(M))))


def is_psd(M, tol=DEFAULT_TOL):
    """PSD test on the symmetrized matrix, relative to its Frobenius norm."""
    return min_sym_eig(M) >= psd_threshold(M, tol)


def is_spd(M, tol=DEFAULT_TOL):
    M = as_dense(M)
    return min_sym_eig(M) > tol * float(np.linalg.norm(M))


def rcond(M):
    """Reciprocal 2-norm condition number (0 for exactly singular)."""
    M = as_dense(M)
    if M.size == 0:
        return 1.0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0.0
    return float(s[-1] / s[0])


def check_nonsingular(M, name):
    r = rcond(M)
    if r < RCOND_MIN:
        raise StructureError(f"{name} is singular or ill-conditioned (rcond={r:.3e})")
    return r
