"""Independent reference computations shared by the test modules."""

import numpy as np
from scipy import integrate

from phsg.analysis import transfer
from phsg.ph_core import LTISystem


def random_stable(seed, n=6, p=1, q=1):
    """Random system whose symmetric part of A is negative definite."""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    K = rng.standard_normal((n, n))
    A = -(M @ M.T / n + 0.1 * np.eye(n)) + (K - K.T)
    return LTISystem(None, A, rng.standard_normal((n, p)), rng.standard_normal((q, n)))


def h2_frequency_integral(sys, epsrel=1e-10):
    """``sqrt((1/pi) int_0^inf ||H(i w)||_F^2 dw)`` by adaptive quadrature.

    The half line is mapped to ``(0, pi/2)`` through ``w = tan(theta)`` with
    breakpoints at the pole magnitudes.
    """
    lam = np.linalg.eigvals(sys.standard_form()[0])

    def f(theta):
        w = np.tan(theta)
        H = transfer(sys, 1j * w)
        return np.sum(np.abs(H) ** 2) / np.cos(theta) ** 2

    pts = sorted(set(np.arctan(np.abs(lam)).tolist()))
    val, _ = integrate.quad(f, 0.0, np.pi / 2, points=pts, epsrel=epsrel, limit=1000)
    return float(np.sqrt(val / np.pi))


def similarity(sys, seed):
    """``(T^{-1} A T, T^{-1} B, C T)`` for a random well-conditioned ``T``."""
    rng = np.random.default_rng(seed)
    T = np.eye(sys.n) + 0.3 * rng.standard_normal((sys.n, sys.n))
    Ti = np.linalg.inv(T)
    return LTISystem(None, Ti @ np.asarray(sys.A) @ T, Ti @ sys.B, sys.C @ T, sys.D), T
