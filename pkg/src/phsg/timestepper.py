"""Adaptive Dormand-Prince 4(5) transient simulation of descriptor LTI systems.

Systems ``E x' = A x + B u`` with non-singular ``E`` are integrated in the
equivalent explicit form; ``E`` is factorized once.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import DimensionError, as_dense
from .ph_core import LTISystem, energy_balance_residual, to_lti
from .sg_assembly import sg_hamiltonian

__all__ = [
    "TransientResult",
    "StepSizeError",
    "NodeIVPError",
    "simulate",
    "chirp",
    "sg_output_statistics",
    "hamiltonian_trace",
    "sampled_expected_hamiltonian",
    "passivity_margin",
]

#: Systems up to this size are integrated with a dense ``E^{-1} A``.
DENSE_LIMIT = 2000

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th- and the embedded 4th-order weights (7 stages, FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# coefficients of the 4th-order continuous extension in powers of theta
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class StepSizeError(RuntimeError):
    """Step size fell below the floating-point resolution of the time axis."""

    def __init__(self, t, h):
        super().__init__(
            f"step size {h:.3e} underflows at t={t:.17g}; the system may be stiff"
        )
        self.t = t
        self.h = h


class NodeIVPError(RuntimeError):
    """Initial value problem at one quadrature node failed."""

    def __init__(self, node, cause):
        super().__init__(f"IVP at quadrature node {node} failed: {cause}")
        self.node = node


@dataclass
class TransientResult:
    """Sampled trajectory of a simulation.

    Attributes
    ----------
    t : ndarray (K,)
    x : ndarray (K, n)
    y : ndarray (K, q)
    hamiltonian : ndarray (K,) or None
    stats : dict
        ``n_steps``, ``n_rejected``, ``n_rhs``, ``h_min``, ``h_max``.
    step_t, step_values : ndarray or None
        Observer records at every accepted step (including ``t0``).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    hamiltonian: np.ndarray = None
    stats: dict = field(default_factory=dict)
    step_t: np.ndarray = None
    step_values: np.ndarray = None


def chirp(t):
    """Harmonic input ``sin(t^2)`` of linearly increasing frequency."""
    return np.sin(np.square(t))


def _input_func(u, p):
    if u is None:
        zero = np.zeros(p)
        return lambda t: zero

    def f(t):
        val = np.atleast_1d(np.asarray(u(t), dtype=float)).reshape(-1)
        if val.size != p:
            raise DimensionError(f"input returned {val.size} values, system has {p} inputs")
        return val

    return f


def _explicit_rhs(sys):
    """Right-hand side pieces ``(apply_A, Bt)`` of ``x' = E^{-1}(A x + B u)``."""
    n = sys.n
    E = sys.E
    if sp.issparse(E):
        is_identity = (E - sp.identity(n, format="csr")).count_nonzero() == 0
    else:
        is_identity = np.array_equal(E, np.eye(n))
    if is_identity:
        A = sys.A.tocsr() if sp.issparse(sys.A) else np.asarray(sys.A)
        return (lambda x: A @ x), sys.B
    if n <= DENSE_LIMIT:
        lu = sla.lu_factor(as_dense(E))
        At = sla.lu_solve(lu, as_dense(sys.A))
        return (lambda x: At @ x), sla.lu_solve(lu, sys.B)
    lu = spla.splu(sp.csc_matrix(E))
    A = sp.csr_matrix(sys.A)
    return (lambda x: lu.solve(A @ x)), lu.solve(sys.B)


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size)


def _initial_step(f, t0, y0, f0, direction, rtol, atol):
    # Hairer, Norsett & Wanner starting-step heuristic for order 4
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(t0 + h0 * direction, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def simulate(sys, u=None, x0=None, t_span=(0.0, 1.0), rtol=1e-8, atol=1e-10,
             t_eval=None, step_observer=None, max_step=np.inf, first_step=None):
    """Integrate ``E x' = A x + B u(t)``, ``y = C x + D u`` with Dormand-Prince 4(5).

    Parameters
    ----------
    sys : LTISystem
    u : callable, optional
        ``t -> input vector``; zero input if omitted.
    x0 : array_like, optional
        Initial state; zero if omitted.
    t_span : (float, float)
    rtol, atol : float
        Tolerances of the mixed error norm
        ``rms(err / (atol + rtol * max(|x_old|, |x_new|))) <= 1``.
    t_eval : array_like, optional
        Increasing output times inside ``t_span``; states there come from the
        4th-order continuous extension.  Defaults to all accepted steps.
    step_observer : callable, optional
        ``(t, x) -> array`` evaluated at ``t0`` and after each accepted step;
        collected in ``step_t`` / ``step_values``.  Useful to monitor fine-scale
        quantities without storing every state.
    max_step, first_step : float, optional

    Returns
    -------
    TransientResult
    """
    if not isinstance(sys, LTISystem):
        raise TypeError("simulate expects an LTISystem")
    if not (rtol > 0 and atol > 0):
        raise ValueError("rtol and atol must be positive")
    t0, tf = map(float, t_span)
    if not tf > t0:
        raise ValueError("t_span must be increasing")
    n, p = sys.n, sys.n_inputs
    apply_A, Bt = _explicit_rhs(sys)
    uf = _input_func(u, p)

    def f(t, x):
        return apply_A(x) + Bt @ uf(t)

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.size != n:
        raise DimensionError(f"x0 has {x.size} entries, system has {n} states")
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float).reshape(-1)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > tf:
            raise ValueError("t_eval must be strictly increasing inside t_span")

    out_t, out_x = [], []
    if t_eval is None:
        out_t.append(t0)
        out_x.append(x.copy())
        ie = None
    else:
        ie = int(np.searchsorted(t_eval, t0, side="right"))
        for _ in range(ie):
            out_t.append(t0)
            out_x.append(x.copy())
    obs_t, obs_v = [], []
    if step_observer is not None:
        obs_t.append(t0)
        obs_v.append(np.atleast_1d(step_observer(t0, x)))

    K = np.empty((7, n))
    K[0] = f(t0, x)
    n_rhs = 1
    h = first_step if first_step is not None else _initial_step(f, t0, x, K[0], 1.0, rtol, atol)
    n_rhs += first_step is None
    h = min(h, max_step)
    t = t0
    n_steps = n_rejected = 0
    h_min, h_max = np.inf, 0.0
    while t < tf:
        h_floor = 10.0 * np.spacing(t)
        if h < h_floor:
            raise StepSizeError(t, h)
        h = min(h, tf - t)
        rejected = False
        while True:
            for i in range(1, 6):
                K[i] = f(t + _C[i] * h, x + h * (_A[i] @ K[:i]))
            x_new = x + h * (_B @ K[:6])
            t_new = t + h if t + h < tf else tf
            K[6] = f(t_new, x_new)
            n_rhs += 6
            scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
            err = _rms(h * (_E @ K) / scale)
            if err <= 1.0:
                break
            n_rejected += 1
            rejected = True
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            if h < h_floor:
                raise StepSizeError(t, h)

        if ie is not None:
            je = int(np.searchsorted(t_eval, t_new, side="right"))
            if je > ie:
                Qm = K.T @ _P
                theta = (t_eval[ie:je] - t) / h
                powers = np.cumprod(np.repeat(theta[:, None], 4, axis=1), axis=1)
                out_x.extend(x + h * (powers @ Qm.T))
                out_t.extend(t_eval[ie:je])
                ie = je
        else:
            out_t.append(t_new)
            out_x.append(x_new.copy())

        n_steps += 1
        h_min, h_max = min(h_min, h), max(h_max, h)
        t, x = t_new, x_new
        K[0] = K[6]
        if step_observer is not None:
            obs_t.append(t)
            obs_v.append(np.atleast_1d(step_observer(t, x)))
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
        if rejected:
            factor = min(factor, 1.0)
        h = min(h * max(MIN_FACTOR, factor), max_step)

    T = np.asarray(out_t)
    X = np.asarray(out_x).reshape(T.size, n)
    U = np.array([uf(tk) for tk in T]).reshape(T.size, p)
    Y = X @ sys.C.T + U @ sys.D.T
    stats = {"n_steps": n_steps, "n_rejected": n_rejected, "n_rhs": n_rhs,
             "h_min": h_min, "h_max": h_max}
    res = TransientResult(T, X, Y, stats=stats)
    if step_observer is not None:
        res.step_t = np.asarray(obs_t)
        res.step_values = np.asarray(obs_v)
    return res


def sg_output_statistics(result, s, m=None):
    """Mean and standard deviation of each random output from SG outputs.

    Parameters
    ----------
    result : TransientResult
        Outputs laid out mode-major, ``q = m s``.
    s : int
        Number of basis polynomials.
    m : int, optional
        Number of base outputs; inferred from the output width.
    """
    Y = np.asarray(result.y if isinstance(result, TransientResult) else result)
    q = Y.shape[1]
    m = q // s if m is None else m
    if m * s != q:
        raise DimensionError(f"output width {q} is not {m} x {s}")
    modes = Y.reshape(Y.shape[0], s, m)
    return modes[:, 0, :].copy(), np.sqrt(np.sum(modes[:, 1:, :] ** 2, axis=1))


def hamiltonian_trace(result, sg):
    """``H^(v(t)) = v^T E^ v / 2`` at every stored state."""
    return sg_hamiltonian(sg, result.x)


def passivity_margin(t, H, supply):
    """Largest violation of ``dH/dt <= supply`` over interval pairs.

    Difference quotients of ``H`` over pairs of consecutive samples are compared
    with the pair average of ``supply`` (see :func:`energy_balance_residual`).
    Positive values indicate a violation.
    """
    return float(np.max(energy_balance_residual(t, H, supply)))


def sampled_expected_hamiltonian(psys, rule, u=None, t_eval=None, t_span=None,
                                 rtol=1e-8, atol=1e-10, batched=True):
    """Quadrature approximation of ``E[H(x(t, mu), mu)]``.

    One IVP is solved per node with zero initial state and the deterministic
    input ``u``; node Hamiltonians are combined with the rule weights.

    Parameters
    ----------
    psys : ParametricPHSystem
    rule : QuadratureRule
    u : callable, optional
    t_eval : array_like
        Shared output grid.
    t_span : (float, float), optional
        Defaults to ``(t_eval[0], t_eval[-1])``.
    batched : bool
        Integrate all nodes as one block-diagonal system (shared step sizes,
        at least as accurate as separate runs) instead of one run per node.

    Returns
    -------
    ndarray
        Expected Hamiltonian at ``t_eval``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    t_span = (t_eval[0], t_eval[-1]) if t_span is None else t_span
    systems = [psys(mu) for mu in rule.nodes]
    ltis = [to_lti(s) for s in systems]
    weights = rule.weights

    def node_H(sysk, X):
        M = sysk.E.T @ sysk.Q
        return 0.5 * np.einsum("ki,ij,kj->k", X, M, X)

    if batched:
        big = LTISystem(
            sp.block_diag([sp.csr_matrix(l.E) for l in ltis], format="csr"),
            sp.block_diag([sp.csr_matrix(l.A) for l in ltis], format="csr"),
            np.vstack([l.B for l in ltis]),
            np.zeros((1, sum(l.n for l in ltis))),
            np.zeros((1, ltis[0].n_inputs)),
        )
        try:
            res = simulate(big, u, t_span=t_span, rtol=rtol, atol=atol, t_eval=t_eval)
        except StepSizeError:
            batched = False
        else:
            offs = np.cumsum([0] + [l.n for l in ltis])
            total = np.zeros(t_eval.size)
            for k, sysk in enumerate(systems):
                total += weights[k] * node_H(sysk, res.x[:, offs[k]:offs[k + 1]])
            return total
    total = np.zeros(t_eval.size)
    for k, (sysk, lti) in enumerate(zip(systems, ltis)):
        try:
            res = simulate(lti, u, t_span=t_span, rtol=rtol, atol=atol, t_eval=t_eval)
        except StepSizeError as exc:
            raise NodeIVPError(k, exc) from exc
        total += weights[k] * node_H(sysk, res.x)
    return total
