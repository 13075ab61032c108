"""Minimum-length pilot sequence design for correlated multi-user MIMO.

Given per-user spatial covariance matrices, the package designs the
shortest training sequences that keep the LMMSE channel-estimation error
below a chosen per-dimension bound, exploiting low-rank spatial structure
so the pilots can be much shorter than the number of users.
"""

from .covariance import (
    ArrayGeometry,
    UserCovariance,
    UserGeometry,
    covariance_from_rays,
    make_uca,
    sample_user_geometry,
    steering_vector,
    truncate_covariance,
)
from .design import (
    AlgorithmParams,
    DesignResult,
    design_pilots,
    pilot_from_gram,
    solve_linearized_sdp,
)
from .estimation import (
    LmiProblem,
    StackedCovariance,
    build_stacked,
    constraint_lhs,
    error_covariance_full,
    max_error_eigenvalue,
    max_error_from_gram,
    simulate_estimation,
)
from .identifiability import (
    IdentifiabilityReport,
    check_identifiability,
    classify_subspaces,
    necessary_length,
)
from .linalg import (
    EigResult,
    eigh_desc,
    hermitian_part,
    numerical_rank,
    psd_order_holds,
    sqrt_psd,
)
from .sdp import SdpSolution, SdpSolverError

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "UserGeometry",
    "UserCovariance",
    "make_uca",
    "sample_user_geometry",
    "steering_vector",
    "covariance_from_rays",
    "truncate_covariance",
    "EigResult",
    "eigh_desc",
    "hermitian_part",
    "numerical_rank",
    "psd_order_holds",
    "sqrt_psd",
    "IdentifiabilityReport",
    "necessary_length",
    "classify_subspaces",
    "check_identifiability",
    "StackedCovariance",
    "LmiProblem",
    "build_stacked",
    "constraint_lhs",
    "error_covariance_full",
    "max_error_eigenvalue",
    "max_error_from_gram",
    "simulate_estimation",
    "AlgorithmParams",
    "DesignResult",
    "design_pilots",
    "pilot_from_gram",
    "solve_linearized_sdp",
    "SdpSolution",
    "SdpSolverError",
    "__version__",
]
