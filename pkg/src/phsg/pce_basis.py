"""Orthonormal Legendre chaos bases, quadrature rules and PC statistics.

Parameters are uniform on a box and are mapped affinely to ``[-1, 1]^q``
before any polynomial is evaluated.  Basis polynomials are products of
univariate Legendre polynomials normalized so that ``E[phi_k^2] = 1`` under
the uniform density ``1/2`` on ``[-1, 1]``.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParameterBox",
    "ChaosBasis",
    "QuadratureRule",
    "basis_size",
    "multi_indices",
    "normalized_legendre",
    "legendre_table",
    "eval_basis",
    "tensor_gauss_rule",
    "symmetric_cubature_rule",
    "expectation",
    "inner_product",
    "pc_statistics",
]

#: Upper bound on the number of nodes of a tensor rule.
MAX_NODES = 10**7


@dataclass(frozen=True)
class ParameterBox:
    """Product of intervals carrying a uniform joint density."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lo and hi must be non-empty and of equal length")
        if not np.all(hi > lo):
            raise ValueError("every interval must satisfy lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def around(cls, mean, variation_pct):
        """Box ``mean * (1 +- variation_pct/100)`` for positive means."""
        mean = np.asarray(mean, dtype=float).reshape(-1)
        if not 0 < variation_pct < 100:
            raise ValueError(f"variation must lie in (0, 100), got {variation_pct}")
        delta = np.abs(mean) * variation_pct / 100.0
        return cls(mean - delta, mean + delta)

    @property
    def q(self):
        return self.lo.size

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def to_unit(self, mu):
        mu = np.asarray(mu, dtype=float)
        return 2.0 * (mu - self.lo) / (self.hi - self.lo) - 1.0

    def from_unit(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.lo + 0.5 * (xi + 1.0) * (self.hi - self.lo)

    def contains(self, mu, rtol=1e-12):
        mu = np.atleast_2d(np.asarray(mu, dtype=float))
        slack = rtol * (self.hi - self.lo)
        return np.all((mu >= self.lo - slack) & (mu <= self.hi + slack), axis=-1)

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["lo"], data["hi"])


def basis_size(q, d):
    """Number of multivariate polynomials of total degree at most ``d``."""
    if q < 1 or d < 0:
        raise ValueError(f"need q >= 1 and d >= 0, got q={q}, d={d}")
    return math.comb(d + q, q)


def multi_indices(q, d):
    """Multi-indices with ``|alpha| <= d`` in graded lexicographic order.

    Degrees ascend; within one degree the indices are sorted in descending
    lexicographic order so that the linear term of the first parameter comes
    right after the constant.
    """
    out = []
    for k in range(d + 1):
        block = []
        for combo in itertools.combinations_with_replacement(range(q), k):
            alpha = [0] * q
            for j in combo:
                alpha[j] += 1
            block.append(tuple(alpha))
        block.sort(reverse=True)
        out.extend(block)
    return np.array(out, dtype=np.int64).reshape(len(out), q)


@dataclass(frozen=True)
class ChaosBasis:
    """Total-degree truncated orthonormal Legendre basis."""

    q: int
    degree: int
    indices: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.indices is None:
            object.__setattr__(self, "indices", multi_indices(self.q, self.degree))
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.shape != (basis_size(self.q, self.degree), self.q):
            raise ValueError("multi-index table does not match (q, degree)")
        if np.any(idx[0] != 0):
            raise ValueError("first basis polynomial must be the constant")
        object.__setattr__(self, "indices", idx)

    @property
    def s(self):
        return self.indices.shape[0]

    def __len__(self):
        return self.s

    def evaluate_unit(self, xi, dims=None):
        """Evaluate all basis polynomials at points of the reference cube.

        Parameters
        ----------
        xi : ndarray of shape (N, q) or (N, len(dims))
        dims : sequence of int, optional
            Restrict the product to these parameter dimensions; ``xi`` then
            holds only those coordinates.

        Returns
        -------
        ndarray of shape (N, s)
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        dims = range(self.q) if dims is None else dims
        out = np.ones((xi.shape[0], self.s))
        for col, j in enumerate(dims):
            table = legendre_table(self.degree, xi[:, col])
            out *= table[:, self.indices[:, j]]
        return out

    def to_dict(self):
        return {"q": self.q, "degree": self.degree, "indices": self.indices.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["q"], data["degree"], np.asarray(data["indices"]))


def legendre_table(kmax, xi):
    """Normalized Legendre values ``sqrt(2k+1) P_k(xi)`` for ``k = 0..kmax``.

    Returns an array of shape ``xi.shape + (kmax + 1,)``.
    """
    xi = np.asarray(xi, dtype=float)
    P = np.empty(xi.shape + (kmax + 1,))
    P[..., 0] = 1.0
    if kmax >= 1:
        P[..., 1] = xi
    for k in range(1, kmax):
        P[..., k + 1] = ((2 * k + 1) * xi * P[..., k] - k * P[..., k - 1]) / (k + 1)
    return P * np.sqrt(2 * np.arange(kmax + 1) + 1.0)


def normalized_legendre(k, xi):
    if k < 0:
        raise ValueError("degree must be non-negative")
    return legendre_table(k, xi)[..., k]


def eval_basis(basis, box, mu):
    """Values ``Phi_i(mu)`` for one point or an (N, q) array of points."""
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    mu = np.atleast_2d(mu)
    if mu.shape[1] != box.q or basis.q != box.q:
        raise ValueError("dimension of mu, box and basis must agree")
    if not np.all(box.contains(mu)):
        raise ValueError("parameter point lies outside the box")
    vals = basis.evaluate_unit(box.to_unit(mu))
    return vals[0] if single else vals


@dataclass(frozen=True)
class QuadratureRule:
    """Cubature rule for the uniform density of ``box``.

    ``exactness`` is the per-dimension polynomial degree integrated exactly
    (tensor rules); ``total_exactness`` is the total degree.  Tensor rules
    have positive weights; the symmetric cubature rule may not.
    """

    box: ParameterBox
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    exactness: int | None
    total_exactness: int

    @property
    def size(self):
        return self.weights.size

    @property
    def unit_nodes(self):
        return self.box.to_unit(self.nodes)

    def to_dict(self):
        return {
            "box": self.box.to_dict(),
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "exactness": self.exactness,
            "total_exactness": self.total_exactness,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            ParameterBox.from_dict(data["box"]),
            np.asarray(data["nodes"], dtype=float),
            np.asarray(data["weights"], dtype=float),
            data["exactness"],
            data["total_exactness"],
        )


def gauss_legendre_unit(points):
    """Gauss-Legendre nodes on [-1, 1] with weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(points)
    return x, w / 2.0


def tensor_gauss_rule(box, points_per_dim, max_nodes=MAX_NODES):
    """Tensor-product Gauss-Legendre rule with ``points_per_dim**q`` nodes."""
    if points_per_dim < 1:
        raise ValueError("points_per_dim must be positive")
    total = points_per_dim**box.q
    if total > max_nodes:
        raise ValueError(f"tensor rule would need {total} nodes (cap {max_nodes})")
    x, w = gauss_legendre_unit(points_per_dim)
    grids = np.meshgrid(*([x] * box.q), indexing="ij")
    xi = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([w] * box.q), indexing="ij")
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    deg = 2 * points_per_dim - 1
    return QuadratureRule(box, box.from_unit(xi), weights, deg, deg)


def symmetric_cubature_rule(box):
    """Fully symmetric rule exact for all polynomials of total degree <= 5.

    Uses ``2 q^2 + 1`` nodes: the center, ``+-r e_i`` and ``(+-s e_i +- s e_j)``.
    For ``q >= 3`` some weights are negative.  Intended as an independent
    reference integrator in high dimension where tensor rules are infeasible.
    """
    n = box.q
    if n == 1:
        x, w = gauss_legendre_unit(3)
        return QuadratureRule(box, box.from_unit(x[:, None]), w, 5, 5)
    m2, m4, m22 = 1.0 / 3.0, 1.0 / 5.0, 1.0 / 9.0
    s2 = 0.8 if n == 2 else 0.8 * (n - 1) / (n - 1 + 1.2)
    w2 = m22 / (4.0 * s2**2)
    num = m4 - 4.0 * (n - 1) * w2 * s2**2
    den = m2 - 4.0 * (n - 1) * w2 * s2
    r2 = num / den
    w1 = num / (2.0 * r2**2)
    w0 = 1.0 - 2 * n * w1 - 2 * n * (n - 1) * w2
    r, s = math.sqrt(r2), math.sqrt(s2)

    nodes = [np.zeros(n)]
    weights = [w0]
    for i in range(n):
        for sign in (1.0, -1.0):
            p = np.zeros(n)
            p[i] = sign * r
            nodes.append(p)
            weights.append(w1)
    for i, j in itertools.combinations(range(n), 2):
        for si, sj in itertools.product((1.0, -1.0), repeat=2):
            p = np.zeros(n)
            p[i], p[j] = si * s, sj * s
            nodes.append(p)
            weights.append(w2)
    xi = np.array(nodes)
    return QuadratureRule(box, box.from_unit(xi), np.array(weights), None, 5)


def _weighted_sum(weights, values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return math.fsum(weights * values)
    return np.tensordot(weights, values, axes=(0, 0))


def expectation(f, rule):
    """``E[f]`` approximated by the rule; ``f`` maps an (N, q) array to (N, ...)."""
    return _weighted_sum(rule.weights, f(rule.nodes))


def inner_product(f, g, rule):
    fv = np.asarray(f(rule.nodes), dtype=float)
    gv = np.asarray(g(rule.nodes), dtype=float)
    return _weighted_sum(rule.weights, fv * gv)


def pc_statistics(coeffs):
    """Mean and variance from PC coefficients indexed along axis 0.

    Returns
    -------
    mean, variance : ndarray
        Arrays of shape ``coeffs.shape[1:]``.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 0 or c.shape[0] == 0:
        raise ValueError("need at least one coefficient")
    return c[0].copy(), np.sum(c[1:] ** 2, axis=0)
