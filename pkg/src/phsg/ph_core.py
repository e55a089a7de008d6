"""Linear first-order port-Hamiltonian systems.

A pH system reads::

    E x' = (J - R) Q x + (B - P) u
    y    = (B + P)^T Q x + (S + N) u

with ``J, N`` skew, ``E^T Q`` symmetric positive semi-definite and
``W = [[Q^T R Q, Q^T P], [P^T Q, S]]`` symmetric positive semi-definite.
The Hamiltonian is ``H(x) = x^T (E^T Q) x / 2``.
"""

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._validation import (
    DEFAULT_TOL,
    DimensionError,
    StructureError,
    as_dense,
    check_matrix,
    check_nonsingular,
    check_vector,
    min_sym_eig,
    psd_threshold,
    rcond,
    skew_violation,
    symmetry_violation,
)

__all__ = [
    "PHSystem",
    "StandardPHSystem",
    "LTISystem",
    "ValidationReport",
    "validate_ph",
    "hamiltonian",
    "symmetric_decomposition",
    "basis_transform",
    "image_transform",
    "to_lti",
    "passivity_residual",
    "system_to_json",
    "system_from_json",
]


@dataclass(frozen=True)
class PHSystem:
    """Dense pH system with a general energy matrix ``Q``."""

    E: np.ndarray
    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    P: np.ndarray = None
    S: np.ndarray = None
    N: np.ndarray = None

    def __post_init__(self):
        J = check_matrix(self.J, "J")
        n = J.shape[0]
        B = check_matrix(self.B, "B")
        if B.shape[0] != n and B.shape[1] == n and B.shape[0] == 1:
            B = B.T
        m = B.shape[1]
        E = check_matrix(self.E, "E", (n, n)) if self.E is not None else np.eye(n)
        Q = check_matrix(self.Q, "Q", (n, n)) if self.Q is not None else np.eye(n)
        slots = {
            "E": E,
            "J": check_matrix(J, "J", (n, n)),
            "R": check_matrix(self.R, "R", (n, n)),
            "Q": Q,
            "B": check_matrix(B, "B", (n, m)),
            "P": np.zeros((n, m)) if self.P is None else check_matrix(self.P, "P", (n, m)),
            "S": np.zeros((m, m)) if self.S is None else check_matrix(self.S, "S", (m, m)),
            "N": np.zeros((m, m)) if self.N is None else check_matrix(self.N, "N", (m, m)),
        }
        for k, v in slots.items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.J.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def matrices(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def W(self):
        Q, R, P, S = self.Q, self.R, self.P, self.S
        return np.block([[Q.T @ R @ Q, Q.T @ P], [P.T @ Q, S]])


class StandardPHSystem(PHSystem):
    """pH system with ``Q = I`` (the form that SG projection preserves)."""

    def __init__(self, E, J, R, B, P=None, S=None, N=None):
        n = np.atleast_2d(np.asarray(J)).shape[0]
        super().__init__(E=E, J=J, R=R, Q=np.eye(n), B=B, P=P, S=S, N=N)


@dataclass(frozen=True)
class LTISystem:
    """Descriptor realization ``E x' = A x + B u, y = C x + D u``.

    ``E`` and ``A`` may be scipy sparse matrices; everything else is dense.
    """

    E: object
    A: object
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None

    def __post_init__(self):
        A = check_matrix(self.A, "A", allow_sparse=True)
        n = A.shape[0]
        E = sp.identity(n, format="csr") if self.E is None else self.E
        E = check_matrix(E, "E", (n, n), allow_sparse=True)
        B = check_matrix(self.B, "B", (n, None))
        C = check_matrix(self.C, "C", (None, n))
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else self.D
        D = check_matrix(D, "D", (C.shape[0], B.shape[1]))
        check_matrix(A, "A", (n, n), allow_sparse=True)
        for k, v in zip("EABCD", (E, A, B, C, D)):
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    @property
    def is_sparse(self):
        return sp.issparse(self.A) or sp.issparse(self.E)

    def dense(self):
        return replace(self, E=as_dense(self.E), A=as_dense(self.A))

    def standard_form(self):
        """Return ``(E^{-1} A, E^{-1} B)`` as dense arrays."""
        E, A = as_dense(self.E), as_dense(self.A)
        if np.array_equal(E, np.eye(self.n)):
            return A.copy(), self.B.copy()
        lu = sla.lu_factor(E)
        return sla.lu_solve(lu, A), sla.lu_solve(lu, self.B)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the structural checks of a pH system.

    ``violations`` holds non-negative magnitudes: skew/symmetry defects are
    max-abs entries, definiteness defects are ``max(0, -lambda_min)`` of the
    symmetrized matrix.
    """

    checks: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    min_eigenvalues: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def __bool__(self):
        return self.passed

    def failures(self):
        return [k for k, ok in self.checks.items() if not ok]

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": dict(self.checks),
            "violations": dict(self.violations),
            "min_eigenvalues": dict(self.min_eigenvalues),
        }


class _ReportBuilder:
    def __init__(self, tol):
        self.tol = tol
        self.checks, self.violations, self.mins = {}, {}, {}

    def skew(self, name, M):
        v = skew_violation(M)
        scale = 1.0 + float(np.linalg.norm(as_dense(M)))
        self.checks[name] = v <= self.tol * scale
        self.violations[name] = v

    def symmetric(self, name, M):
        v = symmetry_violation(M)
        scale = 1.0 + float(np.linalg.norm(as_dense(M)))
        self.checks[name] = v <= self.tol * scale
        self.violations[name] = v

    def psd(self, name, M):
        lam = min_sym_eig(M)
        self.checks[name] = lam >= psd_threshold(M, self.tol)
        self.violations[name] = max(0.0, -lam)
        self.mins[name] = lam

    def spd(self, name, M):
        lam = min_sym_eig(M)
        self.checks[name] = lam > self.tol * float(np.linalg.norm(as_dense(M)))
        self.violations[name] = max(0.0, -lam)
        self.mins[name] = lam

    def report(self):
        return ValidationReport(self.checks, self.violations, self.mins)


def validate_ph(sys, tol=DEFAULT_TOL):
    """Check the pH invariants of ``sys``.

    The energy-matrix test ``E^T Q`` is strict (positive definite) for
    standard-form systems, where it is the mass matrix of an ODE, and
    semi-definite otherwise.  ``E`` is additionally required non-singular.
    """
    if not isinstance(sys, PHSystem):
        raise TypeError("validate_ph expects a PHSystem")
    b = _ReportBuilder(tol)
    b.skew("J_skew", sys.J)
    b.skew("N_skew", sys.N)
    EQ = sys.E.T @ sys.Q
    b.symmetric("EtQ_symmetric", EQ)
    if isinstance(sys, StandardPHSystem):
        b.spd("EtQ_definite", EQ)
    else:
        b.psd("EtQ_definite", EQ)
    b.psd("W_psd", sys.W)
    b.checks["E_nonsingular"] = rcond(sys.E) >= 1e-12
    b.violations["E_nonsingular"] = 0.0
    return b.report()


def hamiltonian(sys, x):
    """``H(x) = x^T (E^T Q) x / 2``; ``x`` may be (n,) or (N, n)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != sys.n:
        raise DimensionError(f"state has length {x.shape[-1]}, expected {sys.n}")
    EQ = sys.E.T @ sys.Q
    return 0.5 * np.einsum("...i,ij,...j->...", x, EQ, x)


def symmetric_decomposition(Q, method="sqrt"):
    """Factor an SPD matrix as ``Q = T T^T``.

    Parameters
    ----------
    Q : ndarray
        Symmetric positive definite matrix.
    method : {"sqrt", "cholesky"}
        ``"sqrt"`` returns the symmetric square root via an eigendecomposition,
        ``"cholesky"`` the lower triangular Cholesky factor.
    """
    Q = check_matrix(Q, "Q")
    n = Q.shape[0]
    check_matrix(Q, "Q", (n, n))
    if symmetry_violation(Q) > 1e-12 * (1.0 + np.linalg.norm(Q)):
        raise StructureError("Q is not symmetric")
    Qs = 0.5 * (Q + Q.T)
    if method == "cholesky":
        try:
            return np.linalg.cholesky(Qs)
        except np.linalg.LinAlgError as exc:
            raise StructureError("Q is not positive definite") from exc
    if method == "sqrt":
        lam, U = np.linalg.eigh(Qs)
        if lam[0] <= 0:
            raise StructureError(f"Q is not positive definite (lambda_min={lam[0]:.3e})")
        T = (U * np.sqrt(lam)) @ U.T
        return 0.5 * (T + T.T)
    raise ValueError(f"unknown decomposition method {method!r}")


def basis_transform(sys, method="sqrt"):
    """State-space change of basis ``x~ = T^T x`` with ``Q = T T^T``.

    Returns
    -------
    StandardPHSystem, ndarray
        The equivalent ``Q = I`` system and the factor ``T``.
    """
    T = symmetric_decomposition(sys.Q, method)
    Tt = T.T
    # E~ = T^T E T^{-T}; solve instead of forming the inverse.
    E_t = np.linalg.solve(T, (Tt @ sys.E).T).T
    out = StandardPHSystem(
        E=E_t,
        J=Tt @ sys.J @ T,
        R=Tt @ sys.R @ T,
        B=Tt @ sys.B,
        P=Tt @ sys.P,
        S=sys.S,
        N=sys.N,
    )
    return out, T


def image_transform(sys):
    """Left-multiply the dynamics by ``Q^T``; the state is unchanged."""
    check_nonsingular(sys.Q, "Q")
    Qt = sys.Q.T
    return StandardPHSystem(
        E=Qt @ sys.E,
        J=Qt @ sys.J @ sys.Q,
        R=Qt @ sys.R @ sys.Q,
        B=Qt @ sys.B,
        P=Qt @ sys.P,
        S=sys.S,
        N=sys.N,
    )


def to_lti(sys):
    return LTISystem(
        E=sys.E.copy(),
        A=(sys.J - sys.R) @ sys.Q,
        B=sys.B - sys.P,
        C=(sys.B + sys.P).T @ sys.Q,
        D=sys.S + sys.N,
    )


def passivity_residual(times, states, inputs, outputs, sys):
    """Energy-balance residual ``dH/dt - y^T u`` along a sampled trajectory.

    The derivative is taken as the difference quotient of ``H`` over pairs of
    consecutive intervals and compared with the supplied power averaged over
    the same pair by a three-point (Simpson-type) rule valid for unequal
    spacing.  For a pH system every entry is ``<= 0`` up to discretization
    error, since ``dH/dt = y^T u - (Qx)^T R (Qx)``.

    Parameters
    ----------
    times : ndarray of shape (K,)
    states : ndarray of shape (K, n)
    inputs, outputs : ndarray of shape (K, m)
    sys : PHSystem
        Used to evaluate ``H``.

    Returns
    -------
    ndarray of shape (K // 2,) or so
        One residual per interval pair ``[t_k, t_{k+2}]``.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size < 2:
        raise ValueError("need at least two time samples")
    H = hamiltonian(sys, states)
    supply = np.einsum("ki,ki->k", np.atleast_2d(outputs).reshape(t.size, -1),
                       np.atleast_2d(inputs).reshape(t.size, -1))
    return energy_balance_residual(t, H, supply)


def energy_balance_residual(t, H, supply):
    """``(H(t2) - H(t0)) / (t2 - t0)`` minus the pair-average of ``supply``."""
    t = np.asarray(t, dtype=float)
    H = np.asarray(H, dtype=float)
    supply = np.asarray(supply, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two time samples")
    if t.size == 2:
        h = t[1] - t[0]
        return np.array([(H[1] - H[0]) / h - 0.5 * (supply[0] + supply[1])])
    k = np.arange(0, t.size - 2, 2)
    h0 = t[k + 1] - t[k]
    h1 = t[k + 2] - t[k + 1]
    L = h0 + h1
    # three-point mean-value rule on [t_k, t_k+2], exact for quadratics
    w0 = (2 * h0 - h1) / (6 * h0)
    w1 = L**2 / (6 * h0 * h1)
    w2 = (2 * h1 - h0) / (6 * h1)
    avg = w0 * supply[k] + w1 * supply[k + 1] + w2 * supply[k + 2]
    return (H[k + 2] - H[k]) / L - avg


_SLOTS = ("E", "J", "R", "Q", "B", "P", "S", "N")


def system_to_json(sys, **extra):
    """Serialize a pH or LTI system to the row-major JSON model format."""
    if isinstance(sys, PHSystem):
        data = {"n": sys.n, "m": sys.m}
        data.update({k: getattr(sys, k).tolist() for k in _SLOTS})
    elif isinstance(sys, LTISystem):
        data = {"n": sys.n, "kind": "lti"}
        data.update({k: as_dense(getattr(sys, k)).tolist() for k in "EABCD"})
    else:
        raise TypeError(f"cannot serialize {type(sys).__name__}")
    data.update(extra)
    return json.dumps(data)


def system_from_json(text):
    """Parse the JSON model format; omitted slots default to zero (E, Q: identity)."""
    data = json.loads(text) if isinstance(text, str) else dict(text)
    if data.get("kind") == "lti":
        return LTISystem(*(np.asarray(data[k], dtype=float) for k in "EABCD"))
    n, m = int(data["n"]), int(data["m"])
    defaults = {
        "E": np.eye(n), "Q": np.eye(n),
        "J": np.zeros((n, n)), "R": np.zeros((n, n)),
        "B": np.zeros((n, m)), "P": np.zeros((n, m)),
        "S": np.zeros((m, m)), "N": np.zeros((m, m)),
    }
    mats = {}
    for k in _SLOTS:
        mats[k] = np.asarray(data[k], dtype=float).reshape(defaults[k].shape) if k in data else defaults[k]
    return PHSystem(**mats)
