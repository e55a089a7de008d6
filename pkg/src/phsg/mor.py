"""Projection-based model order reduction.

Galerkin methods (``W = V`` with orthonormal ``V``) applied to a ``Q = I``
pH system return a pH system again; Petrov-Galerkin methods return a plain
descriptor system.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment
from sklearn.base import BaseEstimator

from ._validation import DEFAULT_TOL, DimensionError, StructureError, as_dense
from .analysis import H2ErrorEvaluator, max_dense_dim, stability
from .ph_core import LTISystem, StandardPHSystem, to_lti, validate_ph
from .sg_assembly import SGSystem, restrict_io

__all__ = [
    "ProjectionPair",
    "ReducedPHSystem",
    "ReducedLTISystem",
    "PairingError",
    "arnoldi_basis",
    "irka_galerkin",
    "balanced_truncation",
    "galerkin_reduce",
    "petrov_reduce",
    "ArnoldiReducer",
    "IRKAReducer",
    "BalancedTruncationReducer",
    "error_sweep",
]


class PairingError(RuntimeError):
    """Complex interpolation shifts could not be grouped into conjugate pairs."""


@dataclass(frozen=True)
class ProjectionPair:
    """Projection matrices ``V, W`` of shape (n, r)."""

    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        W = np.asarray(self.W, dtype=float)
        if V.ndim != 2 or V.shape != W.shape:
            raise DimensionError("V and W must be (n, r) arrays of equal shape")
        if V.shape[1] > V.shape[0]:
            raise DimensionError("reduced dimension exceeds full dimension")
        for name, M in (("V", V), ("W", W)):
            sv = np.linalg.svd(M, compute_uv=False)
            if sv.size and sv[-1] <= 1e-12 * sv[0]:
                raise StructureError(f"{name} does not have full column rank")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def galerkin(self):
        return self.V is self.W or np.array_equal(self.V, self.W)

    @property
    def biorthogonal(self):
        return np.allclose(self.W.T @ self.V, np.eye(self.r), atol=1e-10)


class ReducedPHSystem(StandardPHSystem):
    """Galerkin ROM in ``Q = I`` pH form, carrying the basis ``V`` for lifting."""

    def __init__(self, E, J, R, B, P=None, S=None, N=None, V=None):
        super().__init__(E, J, R, B, P, S, N)
        object.__setattr__(self, "V", V)

    def validate(self, tol=DEFAULT_TOL):
        return validate_ph(self, tol)

    def to_lti(self):
        return to_lti(self)

    def lift(self, vbar):
        """Full-order state ``V vbar`` (batched along the first axis)."""
        return np.asarray(vbar) @ self.V.T

    def hamiltonian(self, vbar):
        vbar = np.asarray(vbar, dtype=float)
        return 0.5 * np.sum(vbar * (vbar @ self.E.T), axis=-1)


@dataclass(frozen=True)
class ReducedLTISystem(LTISystem):
    """General ROM; ``V`` and ``W`` are kept for reference."""

    V: np.ndarray = None
    W: np.ndarray = None


def _check_orthonormal(V, tol=1e-8):
    V = np.asarray(V, dtype=float)
    dev = np.max(np.abs(V.T @ V - np.eye(V.shape[1]))) if V.size else 0.0
    if dev > tol:
        raise StructureError(f"V is not orthonormal (max |V^T V - I| = {dev:.2e})")
    return V


def _sym(M):
    return 0.5 * (M + M.T)


def _skew(M):
    return 0.5 * (M - M.T)


def _project(M, V, W=None):
    W = V if W is None else W
    return as_dense(W.T @ (M @ V)) if sp.issparse(M) else W.T @ M @ V


def galerkin_reduce(sys, V):
    """Structure-preserving Galerkin projection ``X -> V^T X V``.

    Parameters
    ----------
    sys : SGSystem or StandardPHSystem
    V : ndarray (n, r)
        Orthonormal basis.

    Returns
    -------
    ReducedPHSystem
        Symmetric and skew parts are enforced exactly after projection.
    """
    V = _check_orthonormal(V)
    if V.shape[0] != (sys.dim if isinstance(sys, SGSystem) else sys.n):
        raise DimensionError("V does not match the system dimension")
    return ReducedPHSystem(
        E=_sym(_project(sys.E, V)),
        J=_skew(_project(sys.J, V)),
        R=_sym(_project(sys.R, V)),
        B=as_dense(V.T @ sys.B),
        P=as_dense(V.T @ sys.P),
        S=as_dense(sys.S),
        N=as_dense(sys.N),
        V=V,
    )


def petrov_reduce(sys, V, W):
    """Petrov-Galerkin ROM ``(W^T E V, W^T A V, W^T B, C V, D)``.

    ``W`` is rescaled so that ``W^T V = I``.
    """
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    if V.shape != W.shape or V.shape[0] != sys.n:
        raise DimensionError("V and W must both be (n, r) with n the system dimension")
    G = W.T @ V
    if np.linalg.cond(G) > 1e12:
        raise StructureError("W^T V is (nearly) singular")
    W = W @ np.linalg.inv(G).T
    return ReducedLTISystem(
        E=_project(sys.E, V, W),
        A=_project(sys.A, V, W),
        B=W.T @ sys.B,
        C=sys.C @ V,
        D=sys.D.copy(),
        V=V,
        W=W,
    )


def _lu(M):
    if sp.issparse(M):
        return spla.splu(sp.csc_matrix(M)).solve
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(M)
        except sla.LinAlgWarning as exc:
            raise np.linalg.LinAlgError(str(exc)) from exc
    if np.any(np.diag(lu[0]) == 0):
        raise np.linalg.LinAlgError("matrix is singular")
    return lambda b, trans="N": sla.lu_solve(lu, b, trans={"N": 0, "T": 1, "H": 2}[trans])


def _shifted_solver(sys, sigma):
    E, A = sys.E, sys.A
    M = sigma * E - A
    if sp.issparse(M):
        M = sp.csc_matrix(M)
        if np.iscomplexobj(sigma):
            M = M.astype(complex)
    try:
        return _lu(M)
    except (RuntimeError, np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise np.linalg.LinAlgError(f"sigma E - A is singular at sigma={sigma}") from exc


def _orth_append(basis, v, tol=1e-12):
    # modified Gram-Schmidt with one reorthogonalization pass
    norm0 = np.linalg.norm(v)
    for _ in range(2):
        for q in basis:
            v = v - (q @ v) * q
    norm = np.linalg.norm(v)
    if norm0 == 0 or norm <= tol * norm0:
        return None
    return v / norm


def arnoldi_basis(sys, r, sigma0=0.0):
    """Orthonormal basis of ``K_r((sigma0 E - A)^{-1} E, (sigma0 E - A)^{-1} b)``.

    Parameters
    ----------
    sys : LTISystem
        Single input.
    r : int
    sigma0 : float
        Real expansion point.

    Returns
    -------
    ndarray (n, r')
        ``r' < r`` only on breakdown, which also emits a warning.
    """
    if sys.n_inputs != 1:
        raise DimensionError("arnoldi_basis needs a single-input system")
    if not 1 <= r <= sys.n:
        raise ValueError(f"need 1 <= r <= n, got r={r}")
    solve = _shifted_solver(sys, float(sigma0))
    E = sys.E
    v = solve(np.asarray(sys.B[:, 0], dtype=float))
    basis = []
    for k in range(r):
        q = _orth_append(basis, v)
        if q is None:
            warnings.warn(f"Krylov space breaks down at dimension {k}", RuntimeWarning)
            break
        basis.append(q)
        v = solve(np.asarray(E @ q).reshape(-1))
    return np.column_stack(basis)


def _pair_shifts(shifts, tol=1e-8):
    """Order shifts as reals followed by (s, conj s) pairs; raise if impossible."""
    shifts = np.asarray(shifts, dtype=complex)
    scale = np.maximum(np.abs(shifts), 1e-300)
    is_real = np.abs(shifts.imag) <= tol * scale
    reals = np.sort(shifts[is_real].real)
    upper = shifts[~is_real & (shifts.imag > 0)]
    lower = shifts[~is_real & (shifts.imag < 0)]
    if upper.size != lower.size:
        raise PairingError("complex shifts cannot be paired into conjugates")
    if upper.size:
        cost = np.abs(upper[:, None] - lower[None, :].conj())
        rows, cols = linear_sum_assignment(cost)
        if np.any(cost[rows, cols] > 1e3 * tol * np.abs(upper[rows])):
            raise PairingError("complex shifts cannot be paired into conjugates")
        upper = upper[rows]
    return reals, upper


def _rational_krylov(sys, reals, uppers, vec, transpose=False):
    cols = []
    for s in reals:
        solve = _shifted_solver(sys, s)
        cols.append(solve(vec, trans="T") if transpose else solve(vec))
    for s in uppers:
        solve = _shifted_solver(sys, s)
        x = solve(vec.astype(complex), trans="T") if transpose else solve(vec.astype(complex))
        cols.extend([x.real, x.imag])
    X = np.column_stack(cols)
    Q, _ = np.linalg.qr(X)
    return Q


def _default_shifts(r):
    return np.logspace(-2, 6, r)


def irka_galerkin(sys, r, init_shifts=None, maxiter=100, tol=1e-6, return_info=False):
    """Iterative rational Krylov algorithm, returning only the right basis.

    Each iteration builds two-sided interpolation spaces at the current shifts,
    reduces, and takes the mirrored ROM poles as new shifts.  Mirrored poles
    with non-positive real part (unstable intermediate ROMs) are reflected
    into the right half-plane.

    Parameters
    ----------
    sys : LTISystem
        SISO.
    r : int
        Reduced dimension, at least 2.
    init_shifts : array_like, optional
        Defaults to ``logspace(-2, 6, r)``.
    maxiter : int
    tol : float
        Convergence threshold on the largest relative shift change.
    return_info : bool
        Also return ``{"converged", "iterations", "shifts"}``.

    Returns
    -------
    V : ndarray (n, r)
        Orthonormal.
    info : dict, optional

    Raises
    ------
    PairingError
        If reduced poles cannot be grouped into conjugate pairs.
    """
    if sys.n_inputs != 1 or sys.n_outputs != 1:
        raise DimensionError("irka_galerkin needs a SISO system")
    if not 2 <= r <= sys.n:
        raise ValueError(f"need 2 <= r <= n, got r={r}")
    shifts = np.asarray(_default_shifts(r) if init_shifts is None else init_shifts, dtype=complex)
    if shifts.size != r:
        raise ValueError("need exactly r initial shifts")
    b = np.asarray(sys.B[:, 0], dtype=float)
    c = np.asarray(sys.C[0], dtype=float)
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        reals, uppers = _pair_shifts(shifts)
        V = _rational_krylov(sys, reals, uppers, b)
        W = _rational_krylov(sys, reals, uppers, c, transpose=True)
        Er = _project(sys.E, V, W)
        Ar = _project(sys.A, V, W)
        lam = sla.eigvals(Ar, Er)
        if not np.all(np.isfinite(lam)):
            raise np.linalg.LinAlgError("reduced pencil is singular")
        new = -lam
        new = np.abs(new.real) + 1j * new.imag
        rows, cols = linear_sum_assignment(np.abs(shifts[:, None] - new[None, :]))
        change = np.max(np.abs(shifts[rows] - new[cols]) / np.abs(shifts[rows]))
        shifts = new
        if change <= tol:
            converged = True
            break
    reals, uppers = _pair_shifts(shifts)
    V = _rational_krylov(sys, reals, uppers, b)
    if not converged:
        warnings.warn(f"IRKA did not converge in {maxiter} iterations", RuntimeWarning)
    if return_info:
        return V, {"converged": converged, "iterations": it, "shifts": shifts}
    return V


@dataclass(frozen=True)
class _BalancingFactors:
    At: np.ndarray
    Bt: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Lc: np.ndarray
    Lo: np.ndarray
    U: np.ndarray
    hsv: np.ndarray
    Z: np.ndarray


def _psd_factor(P):
    lam, U = np.linalg.eigh(_sym(P))
    return U * np.sqrt(np.clip(lam, 0.0, None))


def _balancing_factors(sys):
    if sys.n > max_dense_dim():
        raise ValueError(
            f"balanced truncation of dimension {sys.n} exceeds cap {max_dense_dim()} (PHSG_MAX_DIM)"
        )
    if not stability(sys):
        raise ValueError("balanced truncation needs an asymptotically stable system")
    At, Bt = sys.standard_form()
    C = np.asarray(sys.C, dtype=float)
    # Gramians of the standard form: P is the controllability Gramian of the
    # pencil, Q~ = E^T Q E its observability Gramian in standard coordinates
    P = sla.solve_continuous_lyapunov(At, -Bt @ Bt.T)
    Qo = sla.solve_continuous_lyapunov(At.T, -C.T @ C)
    Lc, Lo = _psd_factor(P), _psd_factor(Qo)
    U, hsv, Zt = np.linalg.svd(Lo.T @ Lc)
    return _BalancingFactors(At, Bt, C, sys.D, Lc, Lo, U, hsv, Zt.T)


def _numerical_rank(hsv):
    if hsv.size == 0 or hsv[0] == 0:
        return 0
    return int(np.sum(hsv > hsv.size * np.finfo(float).eps * hsv[0]))


def _truncate(f, r):
    rank = _numerical_rank(f.hsv)
    if r > rank:
        raise ValueError(f"r={r} exceeds the numerical rank {rank} of the Gramian product")
    s = 1.0 / np.sqrt(f.hsv[:r])
    V = f.Lc @ f.Z[:, :r] * s
    W = f.Lo @ f.U[:, :r] * s
    return ReducedLTISystem(
        E=np.eye(r), A=W.T @ f.At @ V, B=W.T @ f.Bt, C=f.C @ V, D=f.D.copy(), V=V, W=W
    )


def balanced_truncation(sys, r):
    """Square-root balanced truncation.

    Gramians are computed densely on the standard form ``E^{-1} A``; the
    projection pair satisfies ``W^T V = I`` there, so the ROM has ``E = I``.

    Returns
    -------
    ReducedLTISystem, ndarray
        The ROM and all Hankel singular values (non-increasing).
    """
    f = _balancing_factors(sys)
    return _truncate(f, r), f.hsv.copy()


class _Reducer(BaseEstimator):
    """Fit once on a full model, then produce ROMs of several dimensions."""

    def transform(self, r=None):
        raise NotImplementedError

    def fit_transform(self, fom, y=None, r=None):
        return self.fit(fom).transform(r)


def _sg_io(sg, mode):
    lti = sg.to_lti() if isinstance(sg, SGSystem) else to_lti(sg)
    s = sg.s if isinstance(sg, SGSystem) else 1
    return restrict_io(lti, s, mode)


class ArnoldiReducer(_Reducer):
    """One-sided Arnoldi Galerkin reduction with nested bases.

    Parameters
    ----------
    r_max : int
        Dimension of the basis computed by :meth:`fit`.
    sigma0 : float
        Expansion point.
    """

    def __init__(self, r_max=60, sigma0=0.0):
        self.r_max = r_max
        self.sigma0 = sigma0

    def fit(self, sg, y=None):
        self.system_ = sg
        self.V_ = arnoldi_basis(_sg_io(sg, "SIMO"), self.r_max, self.sigma0)
        return self

    def transform(self, r=None):
        """Galerkin ROM (full port structure) from the first ``r`` columns."""
        r = self.r_max if r is None else r
        if r > self.V_.shape[1]:
            raise ValueError(f"only {self.V_.shape[1]} basis vectors available")
        return galerkin_reduce(self.system_, self.V_[:, :r])


class IRKAReducer(_Reducer):
    """IRKA on the SISO restriction, used as a Galerkin method (``W := V``).

    The basis is recomputed for every requested dimension.
    """

    def __init__(self, maxiter=100, tol=1e-6, init_shifts=None):
        self.maxiter = maxiter
        self.tol = tol
        self.init_shifts = init_shifts

    def fit(self, sg, y=None):
        self.system_ = sg
        self.siso_ = _sg_io(sg, "SISO")
        self.info_ = {}
        return self

    def transform(self, r=None):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            V, info = irka_galerkin(self.siso_, r, self.init_shifts, self.maxiter, self.tol,
                                    return_info=True)
        self.info_[r] = info
        return galerkin_reduce(self.system_, V)


class BalancedTruncationReducer(_Reducer):
    """Balanced truncation of a fixed input/output restriction.

    Parameters
    ----------
    io_mode : {"SIMO", "SISO", "MIMO"}
    """

    def __init__(self, io_mode="SIMO"):
        self.io_mode = io_mode

    def fit(self, fom, y=None):
        lti = fom if isinstance(fom, LTISystem) else _sg_io(fom, self.io_mode)
        self.factors_ = _balancing_factors(lti)
        self.hankel_values_ = self.factors_.hsv.copy()
        return self

    def transform(self, r=None):
        r = _numerical_rank(self.hankel_values_) if r is None else r
        return _truncate(self.factors_, r)


def error_sweep(sg, reducer, r_values, io_mode="SIMO", evaluator=None):
    """Relative H2 errors of ROMs of several dimensions against the SG system.

    Galerkin ROMs are restricted to the same ports as the full model.

    Returns
    -------
    dict
        ``{"r", "error", "stable", "ph_valid"}`` lists (``ph_valid`` is None
        for non-pH ROMs); failed reductions give ``nan`` and are listed in
        ``"failures"``.
    """
    fom = _sg_io(sg, io_mode)
    evaluator = H2ErrorEvaluator(fom) if evaluator is None else evaluator
    out = {"r": [], "error": [], "stable": [], "ph_valid": [], "failures": {}}
    for r in r_values:
        try:
            rom = reducer.transform(r)
        except (PairingError, ValueError, np.linalg.LinAlgError) as exc:
            out["failures"][r] = str(exc)
            continue
        if isinstance(rom, ReducedPHSystem):
            valid = rom.validate().passed
            lti = restrict_io(rom.to_lti(), sg.s if isinstance(sg, SGSystem) else 1, io_mode)
        else:
            valid = None
            lti = rom
        out["r"].append(r)
        out["stable"].append(stability(lti))
        out["error"].append(evaluator.error(lti))
        out["ph_valid"].append(valid)
    return out
