"""Noiseless identifiability bounds and tests for joint channel recovery.

With K users of retained covariance ranks r_k (total r) and M antennas,
all channels can be recovered from noiseless training iff the stacked
matrix built from the pilot matrix and the per-user covariance factors has
full column rank r.  A pilot length below ceil(r / M) can never achieve
this; rank(P) = K always suffices.  Two special covariance configurations
tighten the picture: mutually orthogonal user subspaces make ceil(r / M)
sufficient as well, while identical user subspaces force rank(P) = K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .covariance import UserCovariance
from .linalg import numerical_rank

__all__ = [
    "IdentifiabilityReport",
    "necessary_length",
    "classify_subspaces",
    "check_identifiability",
    "stacked_pilot_factor",
]


@dataclass(frozen=True)
class IdentifiabilityReport:
    total_rank_r: int
    necessary_length: int
    sufficient_length_general: int
    orthogonal_case: bool
    identical_case: bool
    special_case_length: Optional[int]


def necessary_length(covs: Sequence[UserCovariance], num_antennas: int) -> int:
    """ceil(sum of retained ranks / M): below this no pilot is identifiable."""
    if not covs:
        raise ValueError("need at least one user covariance")
    if num_antennas < 1:
        raise ValueError("num_antennas must be >= 1")
    r = sum(c.retained_rank for c in covs)
    return math.ceil(r / num_antennas)


def classify_subspaces(
    covs: Sequence[UserCovariance],
    tol: float = 1e-9,
    angle_tol: float = 1e-6,
) -> IdentifiabilityReport:
    """Detect the orthogonal-subspaces and identical-subspaces regimes.

    Orthogonality is tested as tr(R_i R_j) <= tol for all pairs (the
    covariances are trace-one, so this is a relative scale); identical
    spans require equal retained ranks and all principal angles between
    the factor column spans below ``angle_tol`` radians.  For a single
    user both regimes hold vacuously and the two special-case lengths
    coincide.
    """
    if not covs:
        raise ValueError("need at least one user covariance")
    m = covs[0].num_antennas
    if any(c.num_antennas != m for c in covs):
        raise ValueError("users have mixed antenna counts")
    k = len(covs)
    r = sum(c.retained_rank for c in covs)

    orthogonal = True
    identical = True
    for i in range(k):
        for j in range(i + 1, k):
            # tr(R_i R_j) = ||F_i^H F_j||_F^2 for the truncated models
            cross = covs[i].factor.conj().T @ covs[j].factor
            if float(np.sum(np.abs(cross) ** 2)) > tol:
                orthogonal = False
            if covs[i].retained_rank != covs[j].retained_rank:
                identical = False
            elif identical:
                # subspace_angles orthonormalizes its inputs internally
                angles = subspace_angles(covs[i].factor, covs[j].factor)
                if angles.size and float(np.max(angles)) >= angle_tol:
                    identical = False

    nec = math.ceil(r / m)
    special: Optional[int] = None
    if orthogonal:
        special = nec
    elif identical:
        special = k
    return IdentifiabilityReport(
        total_rank_r=r,
        necessary_length=nec,
        sufficient_length_general=k,
        orthogonal_case=orthogonal,
        identical_case=identical,
        special_case_length=special,
    )


def stacked_pilot_factor(pilots, covs: Sequence[UserCovariance]) -> np.ndarray:
    """The LM x r matrix whose rank decides identifiability.

    Column block k equals kron(p_k, F_k) for pilot column p_k and
    covariance factor F_k; this is the product of the Kronecker-expanded
    pilot matrix with the block-diagonal stacked factor, assembled without
    materializing the KM x KM Kronecker product.
    """
    p = np.asarray(pilots, dtype=complex)
    if p.ndim != 2:
        raise ValueError("pilot matrix must be 2-D")
    if p.shape[1] != len(covs):
        raise ValueError(
            f"pilot matrix has {p.shape[1]} columns for {len(covs)} users"
        )
    blocks = [np.kron(p[:, k : k + 1], covs[k].factor) for k in range(len(covs))]
    return np.hstack(blocks)


def check_identifiability(
    pilots, covs: Sequence[UserCovariance], tol: float = 1e-9
) -> bool:
    """True iff the stacked pilot-factor matrix has full column rank r."""
    stacked = stacked_pilot_factor(pilots, covs)
    r = sum(c.retained_rank for c in covs)
    if stacked.shape[0] < r:
        return False
    return numerical_rank(stacked, rel_tol=tol) == r
