"""Stochastic Galerkin and model order reduction for linear port-Hamiltonian systems."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    FrequencyResponse,
    H2ErrorEvaluator,
    bode,
    h2_norm,
    mor_rel_error,
    rel_h2_difference,
    stability,
    transfer,
)
from .models import LadderParams, MotorParams, dc_motor, parametrize, rlc_ladder  # noqa: E402
from .mor import (  # noqa: E402
    ArnoldiReducer,
    BalancedTruncationReducer,
    IRKAReducer,
    arnoldi_basis,
    balanced_truncation,
    galerkin_reduce,
    irka_galerkin,
    petrov_reduce,
)
from .pce_basis import (  # noqa: E402
    ChaosBasis,
    ParameterBox,
    basis_size,
    multi_indices,
    symmetric_cubature_rule,
    tensor_gauss_rule,
)
from .ph_core import (  # noqa: E402
    LTISystem,
    PHSystem,
    StandardPHSystem,
    basis_transform,
    hamiltonian,
    image_transform,
    validate_ph,
)
from .sg_assembly import (  # noqa: E402
    SGSystem,
    StochasticGalerkin,
    assemble_sg,
    assemble_sg_general,
    sg_hamiltonian,
)
from .timestepper import chirp, simulate  # noqa: E402
