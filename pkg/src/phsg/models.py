"""Benchmark systems: a DC motor and an RLC ladder network."""

from dataclasses import astuple, dataclass

import numpy as np

from .pce_basis import ParameterBox
from .ph_core import PHSystem
from .sg_assembly import ParametricPHSystem

__all__ = [
    "MotorParams",
    "LadderParams",
    "dc_motor",
    "rlc_ladder",
    "parametrize",
    "parse_preset",
    "MOTOR_MEAN",
]


@dataclass(frozen=True)
class MotorParams:
    """Inductance, resistance, gyrator constant, friction and inertia."""

    L_m: float = 0.001
    R_m: float = 0.01
    K_m: float = 10.0
    B_m: float = 1.0
    J_m: float = 1.0

    def __post_init__(self):
        for name, val in zip(("L_m", "R_m", "K_m", "B_m", "J_m"), astuple(self)):
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val}")


MOTOR_MEAN = MotorParams()


@dataclass(frozen=True)
class LadderParams:
    """Per-cell capacitances, inductances and resistances of a k-cell ladder."""

    C: tuple
    L: tuple
    R: tuple

    def __post_init__(self):
        C, L, R = (tuple(float(v) for v in np.atleast_1d(x)) for x in (self.C, self.L, self.R))
        if not len(C) == len(L) == len(R) >= 1:
            raise ValueError("C, L and R need the same positive length")
        if min(C + L + R) <= 0:
            raise ValueError("all ladder parameters must be positive")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "R", R)

    @classmethod
    def uniform(cls, k=5, C=1e-6, L=1e-4, R=1.0):
        return cls((C,) * k, (L,) * k, (R,) * k)

    @property
    def k(self):
        return len(self.C)

    def to_mu(self):
        """Parameter vector ``(1/C_1..1/C_k, 1/L_1..1/L_k, R_1..R_k)``."""
        return np.concatenate([1.0 / np.array(self.C), 1.0 / np.array(self.L), np.array(self.R)])

    @classmethod
    def from_mu(cls, mu):
        mu = np.asarray(mu, dtype=float)
        k = mu.size // 3
        return cls(tuple(1.0 / mu[:k]), tuple(1.0 / mu[k:2 * k]), tuple(mu[2 * k:]))


def dc_motor(p=MOTOR_MEAN):
    """pH model of a DC motor with states (flux linkage, angular momentum)."""
    return PHSystem(
        E=np.eye(2),
        J=np.array([[0.0, -p.K_m], [p.K_m, 0.0]]),
        R=np.diag([p.R_m, p.B_m]),
        Q=np.diag([1.0 / p.L_m, 1.0 / p.J_m]),
        B=np.array([[1.0], [0.0]]),
    )


def rlc_ladder(p=None):
    """k-cell RLC ladder with states (q_1, phi_1, ..., q_k, phi_k).

    Input is the current into the first node, output the first charge.
    """
    p = LadderParams.uniform() if p is None else p
    n = 2 * p.k
    J = np.diag(np.ones(n - 1), -1) - np.diag(np.ones(n - 1), 1)
    R = np.zeros((n, n))
    R[1::2, 1::2] = np.diag(p.R)
    Q = np.diag(np.ravel(np.column_stack([1.0 / np.array(p.C), 1.0 / np.array(p.L)])))
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return PHSystem(E=np.eye(n), J=J, R=R, Q=Q, B=B)


def _motor_eval(mu):
    return dc_motor(MotorParams(*mu))


def _ladder_eval(mu):
    return rlc_ladder(LadderParams.from_mu(mu))


def parametrize(model, variation_pct, k=5):
    """Uniformly distributed parameters varying symmetrically about the means.

    Parameters
    ----------
    model : {"motor", "ladder"}
    variation_pct : float
        Half-width of every interval in percent of the mean.
    k : int
        Number of ladder cells.

    Returns
    -------
    ParametricPHSystem
        Motor: the physical parameters ``(L_m, R_m, K_m, B_m, J_m)`` are random,
        so ``Q`` is rational in them.  Ladder: the parameters are
        ``(1/C_i, 1/L_i, R_i)``, making ``R`` and ``Q`` affine-linear.
    """
    if model == "motor":
        box = ParameterBox.around(astuple(MOTOR_MEAN), variation_pct)
        degs = {"E": 0, "J": 1, "R": 1, "Q": None, "B": 0, "P": 0, "S": 0, "N": 0}
        return ParametricPHSystem(box, _motor_eval, degs, "motor")
    if model == "ladder":
        box = ParameterBox.around(LadderParams.uniform(k).to_mu(), variation_pct)
        degs = {"E": 0, "J": 0, "R": 1, "Q": 1, "B": 0, "P": 0, "S": 0, "N": 0}
        return ParametricPHSystem(box, _ladder_eval, degs, f"ladder{k}")
    raise ValueError(f"unknown model {model!r}")


def parse_preset(text):
    """Parse ``"motor"`` or ``"ladder:k=5"`` into ``(name, options)``."""
    name, _, rest = text.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        opts[key.strip()] = int(val)
    if name not in ("motor", "ladder"):
        raise ValueError(f"unknown model preset {text!r}")
    if name == "motor" and opts:
        raise ValueError("the motor preset takes no options")
    if set(opts) - {"k"}:
        raise ValueError(f"unknown ladder options {sorted(set(opts) - {'k'})}")
    return name, opts
