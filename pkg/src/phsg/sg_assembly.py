"""Stochastic Galerkin projection of parametric pH systems.

The projection of a matrix function ``A(mu)`` of shape (n, m) with ``s`` modes
is the (n s) x (m s) matrix whose block (i, j) holds ``E[A Phi_i Phi_j]``.
Blocks are laid out mode-major: row ``i*n + k`` belongs to mode ``i`` and
base row ``k``.
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.io
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from ._validation import DEFAULT_TOL, DimensionError, StructureError, as_dense
from .pce_basis import (
    ChaosBasis,
    ParameterBox,
    QuadratureRule,
    gauss_legendre_unit,
    legendre_table,
)
from .ph_core import (
    LTISystem,
    PHSystem,
    StandardPHSystem,
    _ReportBuilder,
    basis_transform,
    hamiltonian,
    image_transform,
)

__all__ = [
    "ParametricPHSystem",
    "ParametricStandardPHSystem",
    "SGSystem",
    "sg_project",
    "sg_project_structured",
    "entry_dependencies",
    "assemble_sg",
    "assemble_sg_general",
    "sg_state_map",
    "sg_hamiltonian",
    "expected_hamiltonian_oracle",
    "higher_mode_matrices",
    "restrict_io",
    "io_restrict",
    "lift_input",
    "export_matrix_market",
    "StochasticGalerkin",
]

#: Relative threshold below which assembled entries are not stored.
DEFAULT_DROPTOL = 1e-14

#: Gauss points per dimension for entries that are not polynomial in mu.
DEFAULT_POINTS = 7

_PH_SLOTS = ("E", "J", "R", "Q", "B", "P", "S", "N")


def _add_degrees(*degs):
    if any(d is None for d in degs):
        return None
    return int(sum(degs))


def _max_degree(*degs):
    if any(d is None for d in degs):
        return None
    return int(max(degs))


@dataclass(frozen=True)
class ParametricPHSystem:
    """pH system depending on parameters ``mu`` in a box.

    Parameters
    ----------
    box : ParameterBox
    evaluate : callable
        Maps a point ``mu`` of shape (q,) to a :class:`PHSystem`.
    degrees : mapping, optional
        Total polynomial degree in ``mu`` of each matrix slot (``"E"``,
        ``"J"``, ...).  ``None`` (or a missing slot) marks a non-polynomial
        dependence that is integrated with a fixed Gauss order.
    """

    box: ParameterBox
    evaluate: Callable = field(repr=False)
    degrees: Mapping = None
    name: str = ""

    def __call__(self, mu):
        return self.evaluate(np.asarray(mu, dtype=float))

    @property
    def q(self):
        return self.box.q

    def degree(self, slot):
        if self.degrees is None:
            return None
        return self.degrees.get(slot)

    def mean_system(self):
        return self(self.box.center)

    def image_transform(self):
        """Parametric version of the image-space transformation."""
        d = self.degree
        degs = {
            "E": _add_degrees(d("Q"), d("E")),
            "J": _add_degrees(d("Q"), d("Q"), d("J")),
            "R": _add_degrees(d("Q"), d("Q"), d("R")),
            "B": _add_degrees(d("Q"), d("B")),
            "P": _add_degrees(d("Q"), d("P")),
            "S": d("S"),
            "N": d("N"),
        }
        ev = self.evaluate
        return ParametricStandardPHSystem(
            self.box,
            lambda mu: image_transform(ev(mu)),
            degs,
            f"{self.name}:image",
            state_map=lambda mu: np.eye(ev(mu).n),
            state_map_degree=0,
        )

    def basis_transform(self, method="sqrt"):
        """Parametric version of the basis transformation ``x~ = T(mu)^T x``."""
        d = self.degree
        if d("Q") == 0:
            degs = {k: d(k) for k in ("E", "J", "R", "B", "P", "S", "N")}
        else:
            degs = {"S": d("S"), "N": d("N")}
        ev = self.evaluate
        return ParametricStandardPHSystem(
            self.box,
            lambda mu: basis_transform(ev(mu), method)[0],
            degs,
            f"{self.name}:basis-{method}",
            state_map=lambda mu: basis_transform(ev(mu), method)[1].T,
            state_map_degree=0 if d("Q") == 0 else None,
        )


@dataclass(frozen=True)
class ParametricStandardPHSystem(ParametricPHSystem):
    """Parametric pH system whose every evaluation has ``Q = I``.

    Only this type is accepted by :func:`assemble_sg`.  ``state_map``, when
    known, maps the original state to the transformed one, ``x~ = M(mu) x``.
    """

    state_map: Callable = field(default=None, repr=False)
    state_map_degree: int | None = None

    def __call__(self, mu):
        sys = super().__call__(mu)
        if not isinstance(sys, StandardPHSystem):
            raise StructureError("evaluation did not return a StandardPHSystem")
        return sys


class _SystemCache:
    """Memoize system evaluations at quadrature nodes during one assembly."""

    def __init__(self, psys):
        self.psys = psys
        self.store = {}

    def __call__(self, mu):
        key = np.asarray(mu, dtype=float).tobytes()
        sys = self.store.get(key)
        if sys is None:
            sys = self.psys(mu)
            self.store[key] = sys
        return sys


def entry_dependencies(func, box, n_probes=3, seed=0):
    """Detect which parameters each matrix entry depends on.

    Every coordinate is perturbed separately at the box center and at
    ``n_probes - 1`` random interior points.

    Returns
    -------
    ndarray of bool, shape (n, m, q)
    """
    rng = np.random.default_rng(seed)
    q = box.q
    bases = [box.center] + [box.from_unit(rng.uniform(-0.9, 0.9, q)) for _ in range(n_probes - 1)]
    dep = None
    for b in bases:
        f0 = np.atleast_2d(np.asarray(func(b), dtype=float))
        if dep is None:
            dep = np.zeros(f0.shape + (q,), dtype=bool)
        xi = box.to_unit(b)
        for j in range(q):
            p = xi.copy()
            p[j] += 0.5 if p[j] < 0 else -0.5
            p = box.from_unit(p)
            f1 = np.atleast_2d(np.asarray(func(p), dtype=float))
            scale = np.abs(f0) + np.abs(f1)
            dep[..., j] |= np.abs(f1 - f0) > 1e-13 * scale
    return dep


def _blocks_to_global(blocks, s, n, m):
    """(s, s, n, m) block array to an (s n) x (s m) array."""
    return blocks.transpose(0, 2, 1, 3).reshape(s * n, s * m)


def _apply_droptol(M, droptol):
    M = sp.csc_matrix(M)
    if M.nnz:
        cutoff = droptol * np.max(np.abs(M.data))
        M.data[np.abs(M.data) <= cutoff] = 0.0
        M.eliminate_zeros()
    return M


def sg_project(func, basis, rule, degree=None, droptol=DEFAULT_DROPTOL):
    """Stochastic Galerkin projection using a full quadrature rule.

    Every node of ``rule`` is visited; this is the brute-force path and is
    feasible only for moderate ``q``.

    Parameters
    ----------
    func : callable
        ``mu -> ndarray (n, m)``.
    basis : ChaosBasis
    rule : QuadratureRule
        Must cover the same box as the parametric function.
    degree : int, optional
        Total degree of ``func`` if polynomial; used to verify that the rule
        integrates the projection exactly.
    droptol : float
        Entries with ``|a| <= droptol * max|a|`` are dropped.

    Returns
    -------
    scipy.sparse.csc_matrix of shape (n s, m s)
    """
    if basis.q != rule.box.q:
        raise DimensionError("basis and rule have different parameter dimensions")
    if degree is not None:
        need = degree + 2 * basis.degree
        have = rule.exactness if rule.exactness is not None else rule.total_exactness
        if have < need:
            raise ValueError(f"rule exact to degree {have}, projection needs {need}")
    vals = np.stack([np.atleast_2d(np.asarray(func(mu), dtype=float)) for mu in rule.nodes])
    N, n, m = vals.shape
    phi = basis.evaluate_unit(rule.unit_nodes)
    wphi = phi * rule.weights[:, None]
    s = basis.s
    blocks = np.empty((s, s, n, m))
    for k in range(n):
        for l in range(m):
            M = (wphi * vals[:, k, l][:, None]).T @ phi
            blocks[:, :, k, l] = 0.5 * (M + M.T)
    return _apply_droptol(_blocks_to_global(blocks, s, n, m), droptol)


def _gauss_points_for(degree, basis_degree, fallback):
    if degree is None:
        return fallback
    return max(1, math.ceil((degree + 2 * basis_degree + 1) / 2))


def sg_project_structured(
    func,
    basis,
    box,
    degree=None,
    points_per_dim=DEFAULT_POINTS,
    droptol=DEFAULT_DROPTOL,
    deps=None,
):
    """Stochastic Galerkin projection exploiting per-entry parameter dependence.

    An entry that depends only on the parameters in ``D`` contributes
    ``E_D[a prod_{j in D} phi phi] * prod_{j not in D} delta`` by independence
    and orthonormality, so only a tensor rule over ``D`` is needed.  Polynomial
    entries use ``ceil((degree + 2 d + 1) / 2)`` points per dimension, which
    makes the projection exact; other entries use ``points_per_dim``.

    Parameters
    ----------
    func : callable
        ``mu -> ndarray (n, m)``.
    basis : ChaosBasis
    box : ParameterBox
    degree : int or None
        Total polynomial degree of ``func`` or None if not polynomial.
    points_per_dim : int
        Gauss order for non-polynomial entries.
    droptol : float
    deps : ndarray of bool, shape (n, m, q), optional
        Dependency pattern; detected by probing when omitted.

    Returns
    -------
    scipy.sparse.csc_matrix of shape (n s, m s)
    """
    if basis.q != box.q:
        raise DimensionError("basis and box have different parameter dimensions")
    center = box.center
    f_center = np.atleast_2d(np.asarray(func(center), dtype=float))
    n, m = f_center.shape
    s = basis.s
    if deps is None:
        deps = entry_dependencies(func, box)
    idx = basis.indices

    rows, cols, data = [], [], []
    mode_rows = np.arange(s) * n
    mode_cols = np.arange(s) * m

    groups = {}
    for k in range(n):
        for l in range(m):
            key = tuple(np.flatnonzero(deps[k, l]))
            groups.setdefault(key, []).append((k, l))

    p = _gauss_points_for(degree, basis.degree, points_per_dim)
    x1, w1 = gauss_legendre_unit(p)
    for dims, entries in sorted(groups.items()):
        if not dims:
            for k, l in entries:
                a = f_center[k, l]
                if a != 0.0:
                    rows.append(mode_rows + k)
                    cols.append(mode_cols + l)
                    data.append(np.full(s, a))
            continue
        dims = list(dims)
        D = len(dims)
        grid = np.meshgrid(*([x1] * D), indexing="ij")
        xi = np.stack([g.reshape(-1) for g in grid], axis=1)
        wgrid = np.meshgrid(*([w1] * D), indexing="ij")
        w = np.prod(np.stack([g.reshape(-1) for g in wgrid], axis=1), axis=1)
        mus = np.tile(center, (xi.shape[0], 1))
        mus[:, dims] = box.from_unit(_embed(xi, dims, box.q))[:, dims]
        vals = np.stack([np.atleast_2d(np.asarray(func(mu), dtype=float)) for mu in mus])
        phi = basis.evaluate_unit(xi, dims=dims)
        comp = [j for j in range(box.q) if j not in dims]
        if comp:
            same = np.all(idx[:, None, comp] == idx[None, :, comp], axis=2)
        else:
            same = np.ones((s, s), dtype=bool)
        ii, jj = np.nonzero(same)
        for k, l in entries:
            wa = w * vals[:, k, l]
            M = (phi * wa[:, None]).T @ phi
            M = 0.5 * (M + M.T)
            rows.append(ii * n + k)
            cols.append(jj * m + l)
            data.append(M[ii, jj])

    if data:
        A = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n * s, m * s),
        )
    else:
        A = sp.coo_matrix((n * s, m * s))
    return _apply_droptol(A, droptol)


def _embed(xi_sub, dims, q):
    out = np.zeros((xi_sub.shape[0], q))
    out[:, dims] = xi_sub
    return out


@dataclass(frozen=True)
class SGSystem:
    """Stochastic Galerkin system in pH form with identity energy matrix.

    All matrices are sparse (CSC).  Inputs, outputs and states are stacked
    mode by mode.
    """

    basis: ChaosBasis
    box: ParameterBox
    n: int
    m: int
    E: sp.csc_matrix = field(repr=False)
    J: sp.csc_matrix = field(repr=False)
    R: sp.csc_matrix = field(repr=False)
    B: sp.csc_matrix = field(repr=False)
    P: sp.csc_matrix = field(repr=False)
    S: sp.csc_matrix = field(repr=False)
    N: sp.csc_matrix = field(repr=False)
    droptol: float = DEFAULT_DROPTOL
    name: str = ""

    @property
    def s(self):
        return self.basis.s

    @property
    def dim(self):
        return self.n * self.s

    @property
    def W(self):
        """Dissipation matrix ``[[R, P], [P^T, S]]`` of the SG system."""
        return sp.bmat([[self.R, self.P], [self.P.T, self.S]], format="csc")

    def to_lti(self):
        return LTISystem(
            E=self.E,
            A=(self.J - self.R).tocsc(),
            B=as_dense(self.B - self.P),
            C=as_dense((self.B + self.P).T),
            D=as_dense(self.S + self.N),
        )

    def to_ph(self):
        """Dense :class:`StandardPHSystem` view (for small systems)."""
        return StandardPHSystem(
            E=as_dense(self.E), J=as_dense(self.J), R=as_dense(self.R),
            B=as_dense(self.B), P=as_dense(self.P), S=as_dense(self.S), N=as_dense(self.N),
        )

    def validate(self, tol=DEFAULT_TOL):
        """Check the pH invariants: E SPD, R PSD, J and N skew, W PSD."""
        b = _ReportBuilder(tol)
        b.skew("J_skew", self.J)
        b.skew("N_skew", self.N)
        b.symmetric("E_symmetric", self.E)
        b.spd("E_definite", self.E)
        b.symmetric("R_symmetric", self.R)
        b.psd("R_psd", self.R)
        b.psd("W_psd", self.W)
        return b.report()

    def nonzero_ratios(self):
        tot = float(self.dim) ** 2
        return {k: getattr(self, k).nnz / tot for k in ("J", "R", "E")}

    def metadata(self):
        return {
            "s": self.s,
            "degree": self.basis.degree,
            "q": self.basis.q,
            "n": self.n,
            "m": self.m,
            "dimension": self.dim,
            "droptol": self.droptol,
            "name": self.name,
            "box": self.box.to_dict(),
        }


def _slot_func(cache, slot):
    return lambda mu: getattr(cache(mu), slot)


def _project_slot(cache, slot, basis, psys, rule, points_per_dim, droptol, degree=None):
    func = _slot_func(cache, slot) if isinstance(slot, str) else slot
    if rule is not None:
        return sg_project(func, basis, rule, degree=degree, droptol=droptol)
    return sg_project_structured(
        func, basis, psys.box, degree=degree, points_per_dim=points_per_dim, droptol=droptol
    )


def assemble_sg(psys, basis, rule=None, points_per_dim=DEFAULT_POINTS, droptol=DEFAULT_DROPTOL):
    """Assemble the SG system of a parametric pH system in ``Q = I`` form.

    Parameters
    ----------
    psys : ParametricStandardPHSystem
    basis : ChaosBasis
    rule : QuadratureRule, optional
        Use this full rule for every matrix.  By default the structured path
        of :func:`sg_project_structured` is used.
    points_per_dim : int
        Gauss order for non-polynomial matrix entries (structured path).
    droptol : float

    Returns
    -------
    SGSystem
    """
    if not isinstance(psys, ParametricStandardPHSystem):
        raise StructureError(
            "assemble_sg needs a Q = I system; apply image_transform or basis_transform first"
        )
    if basis.q != psys.q:
        raise DimensionError("basis and parameter box differ in dimension")
    cache = _SystemCache(psys)
    mats = {
        slot: _project_slot(cache, slot, basis, psys, rule, points_per_dim, droptol,
                            degree=psys.degree(slot))
        for slot in ("E", "J", "R", "B", "P", "S", "N")
    }
    mean = psys(psys.box.center)
    return SGSystem(basis, psys.box, mean.n, mean.m, droptol=droptol, name=psys.name, **mats)


def assemble_sg_general(psys, basis, rule=None, points_per_dim=DEFAULT_POINTS, droptol=DEFAULT_DROPTOL):
    """SG projection of the assembled LTI matrices of a general pH system.

    The result is a plain :class:`LTISystem`; it is not in pH form in general.
    """
    if basis.q != psys.q:
        raise DimensionError("basis and parameter box differ in dimension")
    cache = _SystemCache(psys)
    d = psys.degree
    funcs = {
        "E": (lambda mu: cache(mu).E, d("E")),
        "A": (lambda mu: (cache(mu).J - cache(mu).R) @ cache(mu).Q,
              _add_degrees(_max_degree(d("J"), d("R")), d("Q"))),
        "B": (lambda mu: cache(mu).B - cache(mu).P, _max_degree(d("B"), d("P"))),
        "C": (lambda mu: (cache(mu).B + cache(mu).P).T @ cache(mu).Q,
              _add_degrees(_max_degree(d("B"), d("P")), d("Q"))),
        "D": (lambda mu: cache(mu).S + cache(mu).N, _max_degree(d("S"), d("N"))),
    }
    mats = {
        k: _project_slot(cache, f, basis, psys, rule, points_per_dim, droptol, degree=deg)
        for k, (f, deg) in funcs.items()
    }
    return LTISystem(
        E=mats["E"], A=mats["A"], B=as_dense(mats["B"]), C=as_dense(mats["C"]), D=as_dense(mats["D"])
    )


def sg_state_map(psys, basis, points_per_dim=DEFAULT_POINTS, droptol=DEFAULT_DROPTOL):
    """Galerkin projection of the state map ``x~ = M(mu) x`` of a transformation.

    The result relates the SG states of the original and the transformed
    system to first order, ``v~ ~ G(M) v``.
    """
    if getattr(psys, "state_map", None) is None:
        raise StructureError("system carries no state map")
    return sg_project_structured(
        psys.state_map, basis, psys.box, degree=psys.state_map_degree,
        points_per_dim=points_per_dim, droptol=droptol,
    )


def sg_hamiltonian(sg, v):
    """``H(v) = v^T E v / 2`` for one state (ns,) or a batch (K, ns)."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != sg.dim:
        raise DimensionError(f"state has length {v.shape[-1]}, expected {sg.dim}")
    Ev = (sg.E @ v.T).T
    return 0.5 * np.sum(v * Ev, axis=-1)


def expected_hamiltonian_oracle(psys, basis, v, rule):
    """``E[H(sum_j v_j Phi_j(mu), mu)]`` by direct quadrature.

    Parameters
    ----------
    psys : ParametricPHSystem
    basis : ChaosBasis
    v : ndarray of shape (n s,) or (K, n s)
        Stacked PC coefficient vectors.
    rule : QuadratureRule

    Returns
    -------
    float or ndarray of shape (K,)
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    s = basis.s
    n = V.shape[1] // s
    if n * s != V.shape[1]:
        raise DimensionError("coefficient vector length is not a multiple of s")
    V = V.reshape(V.shape[0], s, n)
    phi = basis.evaluate_unit(rule.unit_nodes)
    vals = np.empty((rule.size, V.shape[0]))
    for a, mu in enumerate(rule.nodes):
        x = np.einsum("j,kjn->kn", phi[a], V)
        vals[a] = hamiltonian(psys(mu), x)
    out = np.array([math.fsum(rule.weights * vals[:, k]) for k in range(V.shape[0])])
    return float(out[0]) if single else out


def higher_mode_matrices(psys, basis, k, rule=None, points_per_dim=DEFAULT_POINTS,
                         droptol=DEFAULT_DROPTOL):
    """Matrix of the ``k``-th stochastic mode of the Hamiltonian (1-based ``k``).

    Projects ``mu -> E~(mu) Phi_k(mu)``; ``k = 1`` reproduces the SG mass matrix.
    """
    if not 1 <= k <= basis.s:
        raise ValueError(f"mode index must lie in 1..{basis.s}, got {k}")
    alpha = basis.indices[k - 1]
    box = psys.box
    cache = _SystemCache(psys)
    active = np.flatnonzero(alpha)

    def func(mu):
        xi = box.to_unit(mu)
        phik = 1.0
        for j in active:
            phik *= legendre_table(alpha[j], xi[j])[alpha[j]]
        return cache(mu).E * phik

    deg = _add_degrees(psys.degree("E"), int(alpha.sum()))
    if rule is not None:
        return sg_project(func, basis, rule, degree=deg, droptol=droptol)
    return sg_project_structured(func, basis, box, degree=deg, points_per_dim=points_per_dim,
                                 droptol=droptol)


def restrict_io(lti, s, mode):
    """Keep only the stochastic modes of interest at the ports.

    ``"MIMO"`` keeps everything, ``"SIMO"`` keeps the mode-1 inputs,
    ``"SISO"`` keeps mode-1 inputs and mode-1 outputs.
    """
    mode = mode.upper()
    m_in = lti.n_inputs // s
    m_out = lti.n_outputs // s
    if m_in * s != lti.n_inputs or m_out * s != lti.n_outputs:
        raise DimensionError("port dimensions are not multiples of s")
    if mode == "MIMO":
        return lti
    B = lti.B[:, :m_in]
    if mode == "SIMO":
        return LTISystem(lti.E, lti.A, B, lti.C, lti.D[:, :m_in])
    if mode == "SISO":
        return LTISystem(lti.E, lti.A, B, lti.C[:m_out], lti.D[:m_out, :m_in])
    raise ValueError(f"unknown io mode {mode!r}")


def io_restrict(sg, mode):
    return restrict_io(sg.to_lti(), sg.s, mode)


def lift_input(u, s):
    """Input ``t -> (u(t), 0, ..., 0)`` of the SG system for a deterministic ``u``."""

    def lifted(t):
        ut = np.atleast_1d(np.asarray(u(t), dtype=float))
        out = np.zeros(ut.size * s)
        out[: ut.size] = ut
        return out

    return lifted


def export_matrix_market(sg, directory, prefix="sg", provenance=None):
    """Write the SG matrices as Matrix Market files plus a JSON sidecar.

    Returns the list of written paths.
    """
    os.makedirs(directory, exist_ok=True)
    comment = json.dumps(provenance or {}, sort_keys=True)
    paths = []
    for k in ("E", "J", "R", "B", "P", "S", "N"):
        path = os.path.join(directory, f"{prefix}_{k}.mtx")
        scipy.io.mmwrite(path, getattr(sg, k), comment=comment, precision=17)
        paths.append(path)
    meta = sg.metadata()
    if provenance is not None:
        meta["provenance"] = provenance
    side = os.path.join(directory, f"{prefix}.json")
    with open(side, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    paths.append(side)
    return paths


class StochasticGalerkin(BaseEstimator):
    """Estimator-style front end for the SG projection.

    Parameters
    ----------
    degree : int
        Total polynomial degree of the chaos basis.
    points_per_dim : int
        Gauss order for non-polynomial matrix entries.
    droptol : float
        Relative drop tolerance for assembled entries.

    Attributes
    ----------
    basis_ : ChaosBasis
    system_ : SGSystem or LTISystem
        ``SGSystem`` for ``Q = I`` input, otherwise the general projection.
    structure_preserving_ : bool
    """

    def __init__(self, degree=2, points_per_dim=DEFAULT_POINTS, droptol=DEFAULT_DROPTOL):
        self.degree = degree
        self.points_per_dim = points_per_dim
        self.droptol = droptol

    def fit(self, psys, y=None):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        self.basis_ = ChaosBasis(psys.q, self.degree)
        if isinstance(psys, ParametricStandardPHSystem):
            self.system_ = assemble_sg(psys, self.basis_, points_per_dim=self.points_per_dim,
                                       droptol=self.droptol)
            self.structure_preserving_ = True
        else:
            self.system_ = assemble_sg_general(psys, self.basis_, points_per_dim=self.points_per_dim,
                                               droptol=self.droptol)
            self.structure_preserving_ = False
        return self

    def transform(self, mode="SIMO"):
        """Port-restricted LTI realization of the fitted SG system."""
        lti = self.system_.to_lti() if self.structure_preserving_ else self.system_
        return restrict_io(lti, self.basis_.s, mode)
