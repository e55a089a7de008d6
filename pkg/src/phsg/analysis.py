"""Transfer functions, H2 norms, stability and frequency responses."""

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import DimensionError, as_dense
from .ph_core import LTISystem

__all__ = [
    "FrequencyResponse",
    "transfer",
    "h2_norm",
    "h2_norm_observability",
    "rel_h2_difference",
    "mor_rel_error",
    "H2ErrorEvaluator",
    "stability",
    "poles",
    "bode",
    "difference_system",
    "max_dense_dim",
]


class UnstableSystemError(ValueError):
    """The H2 norm is infinite for systems that are not asymptotically stable."""


def max_dense_dim():
    """Dimension cap for dense solves, overridable through ``PHSG_MAX_DIM``."""
    return int(os.environ.get("PHSG_MAX_DIM", "4000"))


def _check_dim(n):
    cap = max_dense_dim()
    if n > cap:
        raise ValueError(f"dense solve of dimension {n} exceeds cap {cap} (PHSG_MAX_DIM)")


def transfer(sys, sigma):
    """``H(sigma) = C (sigma E - A)^{-1} B + D`` as a complex (q, p) array."""
    if sys.is_sparse:
        M = (sigma * sp.csc_matrix(sys.E) - sp.csc_matrix(sys.A)).tocsc().astype(complex)
        try:
            X = spla.splu(M).solve(sys.B.astype(complex))
        except RuntimeError as exc:
            raise np.linalg.LinAlgError(f"pencil is singular at sigma={sigma}") from exc
    else:
        M = sigma * as_dense(sys.E) - as_dense(sys.A)
        X = np.linalg.solve(M, sys.B.astype(complex))
    return sys.C @ X + sys.D


def poles(sys):
    """Finite generalized eigenvalues of ``(A, E)``."""
    _check_dim(sys.n)
    E, A = as_dense(sys.E), as_dense(sys.A)
    if np.array_equal(E, np.eye(sys.n)):
        return np.linalg.eigvals(A)
    return sla.eigvals(A, E)


def stability(sys, margin=0.0):
    """True if every pole has real part below ``-margin``."""
    lam = poles(sys)
    if not np.all(np.isfinite(lam)):
        raise np.linalg.LinAlgError("pencil has infinite eigenvalues (singular E)")
    return bool(np.all(lam.real < -margin))


def _require_stable_proper(sys):
    if np.any(sys.D != 0):
        raise ValueError("H2 norm is infinite for a non-zero feedthrough D")
    if not stability(sys):
        raise UnstableSystemError("system is not asymptotically stable")


def h2_norm(sys, check=True):
    """H2 norm via the controllability Gramian.

    Solves ``A P E^T + E P A^T + B B^T = 0`` (in the equivalent standard form
    ``E^{-1} A``) and returns ``sqrt(trace(C P C^T))``.
    """
    _check_dim(sys.n)
    if check:
        _require_stable_proper(sys)
    A, B = sys.standard_form()
    P = sla.solve_continuous_lyapunov(A, -B @ B.T)
    val = np.trace(sys.C @ P @ sys.C.T)
    return float(np.sqrt(max(val, 0.0)))


def h2_norm_observability(sys, check=True):
    """H2 norm via the observability Gramian (cross-check route)."""
    _check_dim(sys.n)
    if check:
        _require_stable_proper(sys)
    A, B = sys.standard_form()
    O = sla.solve_continuous_lyapunov(A.T, -sys.C.T @ sys.C)
    val = np.trace(B.T @ O @ B)
    return float(np.sqrt(max(val, 0.0)))


def difference_system(H0, H1):
    """Realization of ``H0 - H1``: block-diagonal states, output ``[C0, -C1]``."""
    if H0.n_inputs != H1.n_inputs or H0.n_outputs != H1.n_outputs:
        raise DimensionError("systems have different input/output dimensions")
    E = sla.block_diag(as_dense(H0.E), as_dense(H1.E))
    A = sla.block_diag(as_dense(H0.A), as_dense(H1.A))
    return LTISystem(E, A, np.vstack([H0.B, H1.B]), np.hstack([H0.C, -H1.C]), H0.D - H1.D)


def _difference_norm2(H0, Hi, state_map=None):
    # Gramian of the augmented realization in coordinates (x0, z = xi - M x0):
    #   A = [[A0, 0], [Ai M - M A0, Ai]],  B = [B0; Bi - M B0],
    #   C = [C0 - Ci M, -Ci].
    # Blockwise solves keep each block accurate relative to its own size.
    A0, B0 = H0.standard_form()
    Ai, Bi = Hi.standard_form()
    if state_map is None:
        M = np.zeros((Hi.n, H0.n))
    else:
        M = as_dense(state_map)
        if M.shape != (Hi.n, H0.n):
            raise DimensionError(f"state map must have shape {(Hi.n, H0.n)}, got {M.shape}")
    K = Ai @ M - M @ A0
    Bz = Bi - M @ B0
    C0 = H0.C - Hi.C @ M
    Cz = -Hi.C
    P00 = sla.solve_continuous_lyapunov(A0, -B0 @ B0.T)
    Pz0 = sla.solve_sylvester(Ai, A0.T, -(K @ P00 + Bz @ B0.T))
    G = K @ Pz0.T
    Pzz = sla.solve_continuous_lyapunov(Ai, -(G + G.T + Bz @ Bz.T))
    return (np.trace(C0 @ P00 @ C0.T) + 2.0 * np.trace(C0 @ Pz0.T @ Cz.T)
            + np.trace(Cz @ Pzz @ Cz.T))


def rel_h2_difference(H0, Hi, state_map=None):
    """``||H0 - Hi||_H2 / ||H0||_H2`` via the augmented difference realization.

    Parameters
    ----------
    H0, Hi : LTISystem
    state_map : array_like, optional
        Matrix ``M`` with ``xi ~ M x0``.  The augmented realization is then
        written in the error coordinates ``z = xi - M x0``, which is an exact
        similarity transformation and leaves the value unchanged, but avoids
        the cancellation of large Gramian terms when the two systems are
        close.  Without it, differences below about ``1e-7`` are not resolved.
    """
    if H0.n_inputs != Hi.n_inputs or H0.n_outputs != Hi.n_outputs:
        raise DimensionError("systems have different input/output dimensions")
    _check_dim(H0.n + Hi.n)
    if np.any(H0.D != Hi.D):
        raise ValueError("difference system has non-zero feedthrough")
    for sys in (H0, Hi):
        if not stability(sys):
            raise UnstableSystemError("system is not asymptotically stable")
    val = _difference_norm2(H0, Hi, state_map)
    return float(np.sqrt(max(val, 0.0))) / h2_norm(H0, check=False)


class H2ErrorEvaluator:
    """Relative H2 errors of many reduced models against one full model.

    The Gramian of the difference realization is assembled blockwise: the
    full-model block is solved once, the coupling block from a Sylvester
    equation that reuses a cached Schur form of the full model, and the
    reduced block from a small Lyapunov equation.

    Parameters
    ----------
    fom : LTISystem
    """

    def __init__(self, fom):
        _check_dim(fom.n)
        _require_stable_proper(fom)
        self.fom = fom
        A, B = fom.standard_form()
        self._B = B
        self._C = fom.C
        P = sla.solve_continuous_lyapunov(A, -B @ B.T)
        self._norm2 = float(np.trace(self._C @ P @ self._C.T))
        self._T, self._U = sla.schur(A.astype(complex), output="complex")
        self._UhB = self._U.conj().T @ B

    @property
    def fom_norm(self):
        return float(np.sqrt(self._norm2))

    def _cross_gramian(self, Ar, Br):
        # A_f X + X A_r^T + B_f B_r^T = 0 in Schur coordinates
        S, Z = sla.schur(Ar.T.astype(complex), output="complex")
        G = -(self._UhB @ Br.T) @ Z
        n, r = G.shape
        Y = np.empty((n, r), dtype=complex)
        T = self._T
        for k in range(r):
            rhs = G[:, k] - Y[:, :k] @ S[:k, k]
            M = T + S[k, k] * np.eye(n)
            Y[:, k] = sla.solve_triangular(M, rhs, check_finite=False)
        return (self._U @ Y @ Z.conj().T).real

    def error(self, rom, relative=True):
        """H2 error of ``rom``; ``inf`` if the reduced model is unstable."""
        if rom.n_inputs != self.fom.n_inputs or rom.n_outputs != self.fom.n_outputs:
            raise DimensionError("reduced model has different port dimensions")
        if np.any(rom.D != self.fom.D):
            return np.inf
        if not stability(rom):
            return np.inf
        Ar, Br = rom.standard_form()
        Pr = sla.solve_continuous_lyapunov(Ar, -Br @ Br.T)
        X = self._cross_gramian(Ar, Br)
        val = (self._norm2 - 2.0 * np.trace(self._C @ X @ rom.C.T)
               + np.trace(rom.C @ Pr @ rom.C.T))
        err = float(np.sqrt(max(val, 0.0)))
        return err / self.fom_norm if relative else err


def mor_rel_error(fom, rom):
    """Relative H2 error of a reduced model (all outputs of ``fom`` included)."""
    return H2ErrorEvaluator(fom).error(rom)


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled transfer function on a logarithmic frequency grid.

    ``values`` has shape (points, outputs, inputs).
    """

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.omega) > 0):
            raise ValueError("frequencies must be strictly increasing")

    @property
    def magnitude_db(self):
        return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self):
        return np.degrees(np.unwrap(np.angle(self.values), axis=0))


def bode(sys, omega_min=1.0, omega_max=1e7, points=400):
    """Frequency response at ``points`` log-spaced frequencies (rad/s)."""
    if points < 2:
        raise ValueError("need at least two frequency points")
    omega = np.logspace(np.log10(omega_min), np.log10(omega_max), points)
    vals = np.stack([transfer(sys, 1j * w) for w in omega])
    return FrequencyResponse(omega, vals)
