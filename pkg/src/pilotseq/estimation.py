"""LMMSE channel-estimation error machinery.

The estimation error covariance of the stacked channel vector depends on
the pilot matrix P only through its Gram matrix X = P^H P, and its nonzero
spectrum equals that of the reduced r x r matrix

    sigma^2 * Lambda^(1/2) (A(X) + sigma^2 I)^(-1) Lambda^(1/2),

where Lambda stacks the retained per-user eigenvalues and A(X) carries
X block-wise against the factor Gram blocks G_ij = F_i^H F_j.  Production
paths work exclusively in this r x r form; the literal dense KM x KM
formula is kept as an independent oracle for tests and verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .covariance import UserCovariance
from .linalg import hermitian_part

__all__ = [
    "StackedCovariance",
    "LmiProblem",
    "build_stacked",
    "constraint_lhs",
    "error_covariance_full",
    "max_error_from_gram",
    "max_error_eigenvalue",
    "simulate_estimation",
]


@dataclass(frozen=True)
class StackedCovariance:
    """Joint description of all users' truncated covariances.

    ``eigenvalue_diag`` concatenates the per-user retained eigenvalues in
    user order (the diagonal of Lambda); ``gram`` is the full r x r Gram
    of the horizontally stacked factors, whose (i, j) block is
    F_i^H F_j and whose diagonal blocks are the per-user eigenvalue
    diagonals.  ``offsets[k]`` is the start of user k's block.
    """

    per_user: tuple
    num_antennas: int
    total_rank: int
    eigenvalue_diag: np.ndarray
    gram: np.ndarray
    offsets: np.ndarray

    @property
    def num_users(self) -> int:
        return len(self.per_user)

    def gram_block(self, i: int, j: int) -> np.ndarray:
        o = self.offsets
        return self.gram[o[i] : o[i + 1], o[j] : o[j + 1]]

    @cached_property
    def user_of_dim(self) -> np.ndarray:
        """Length-r vector mapping each stacked dimension to its user index."""
        ranks = [c.retained_rank for c in self.per_user]
        return np.repeat(np.arange(len(ranks)), ranks)

    @cached_property
    def embedding(self):
        """Embedded SDP constraint tensors, shared across error budgets."""
        from .sdp import EmbeddedLmi

        return EmbeddedLmi.from_stacked(self)

    def stacked_factor_dense(self) -> np.ndarray:
        """Block-diagonal KM x r stacked factor (test/oracle use)."""
        return scipy.linalg.block_diag(*[c.factor for c in self.per_user])

    def prior_dense(self) -> np.ndarray:
        """Block-diagonal KM x KM prior covariance of the truncated models."""
        return scipy.linalg.block_diag(
            *[c.truncated_covariance() for c in self.per_user]
        )


def build_stacked(covs: Sequence[UserCovariance]) -> StackedCovariance:
    """Assemble the stacked representation; users must share one array size."""
    if not covs:
        raise ValueError("need at least one user covariance")
    m = covs[0].num_antennas
    if any(c.num_antennas != m for c in covs):
        raise ValueError("users have mixed antenna counts")
    ranks = [c.retained_rank for c in covs]
    offsets = np.cumsum([0] + ranks)
    fh = np.hstack([c.factor for c in covs])
    gram = fh.conj().T @ fh
    lam = np.concatenate([c.eigenvalues for c in covs])
    return StackedCovariance(
        per_user=tuple(covs),
        num_antennas=m,
        total_rank=int(offsets[-1]),
        eigenvalue_diag=lam,
        gram=gram,
        offsets=offsets,
    )


@dataclass(frozen=True)
class LmiProblem:
    """Data of the error-bound matrix inequality for one (sigma^2, eps).

    The pilot Gram X is feasible iff
    ``constraint_lhs(stacked, X) >= diag(rhs_diag)`` in the PSD order,
    with ``rhs_diag = (eigenvalue_diag / epsilon - 1) * noise_var``.
    Entries of ``rhs_diag`` are negative where the prior eigenvalue is
    already below epsilon.
    """

    stacked: StackedCovariance
    noise_var: float
    epsilon: float
    rhs_diag: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        rhs = (self.stacked.eigenvalue_diag / self.epsilon - 1.0) * self.noise_var
        object.__setattr__(self, "rhs_diag", rhs)

    def rhs_matrix(self) -> np.ndarray:
        return np.diag(self.rhs_diag.astype(complex))


def constraint_lhs(stacked: StackedCovariance, x_gram) -> np.ndarray:
    """The r x r matrix with (i, j) block X_ij * G_ij.

    Equals the congruence of the Kronecker-expanded Gram against the
    stacked factor without forming any KM-sized intermediate.
    """
    x = np.asarray(x_gram)
    k = stacked.num_users
    if x.shape != (k, k):
        raise ValueError(f"expected a {k}x{k} Gram matrix, got {x.shape}")
    u = stacked.user_of_dim
    expanded = x[u[:, None], u[None, :]]
    return hermitian_part(stacked.gram * expanded)


def error_covariance_full(pilots, stacked: StackedCovariance, noise_var: float) -> np.ndarray:
    """Dense KM x KM LMMSE error covariance by the literal formula.

    Computes R - R Pt^H (Pt R Pt^H + sigma^2 I)^(-1) Pt R with
    Pt = kron(P, I_M) and R the block-diagonal prior.  Exists as the
    independent oracle for the reduced-form computations; cost grows with
    (LM)^3, so keep instances small.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    p = np.asarray(pilots, dtype=complex)
    m = stacked.num_antennas
    prior = stacked.prior_dense()
    pt = np.kron(p, np.eye(m))
    lm = pt.shape[0]
    gram_y = pt @ prior @ pt.conj().T + noise_var * np.eye(lm)
    cross = prior @ pt.conj().T
    ce = prior - cross @ np.linalg.solve(gram_y, cross.conj().T)
    return hermitian_part(ce)


def _reduced_error_matrix(stacked, x_gram, noise_var) -> np.ndarray:
    """sigma^2 * Lambda^(1/2) (A(X) + sigma^2 I)^(-1) Lambda^(1/2), r x r."""
    a = constraint_lhs(stacked, x_gram)
    r = stacked.total_rank
    sqrt_lam = np.sqrt(np.maximum(stacked.eigenvalue_diag, 0.0))
    sys = a + noise_var * np.eye(r)
    solved = scipy.linalg.solve(sys, np.diag(sqrt_lam).astype(complex), assume_a="pos")
    return hermitian_part(noise_var * (sqrt_lam[:, None] * solved))


def max_error_from_gram(stacked: StackedCovariance, x_gram, noise_var: float) -> float:
    """Largest eigenvalue of the error covariance for a pilot Gram X."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    w = np.linalg.eigvalsh(_reduced_error_matrix(stacked, x_gram, noise_var))
    return float(w[-1])


def max_error_eigenvalue(pilots, stacked: StackedCovariance, noise_var: float) -> float:
    """Largest eigenvalue of the error covariance for a pilot matrix P.

    Uses the r x r reduced form; P enters only through X = P^H P.
    """
    p = np.asarray(pilots, dtype=complex)
    return max_error_from_gram(stacked, p.conj().T @ p, noise_var)


def simulate_estimation(
    pilots,
    stacked: StackedCovariance,
    noise_var: float,
    rng: np.random.Generator,
    trials: int,
) -> np.ndarray:
    """Empirical KM x KM error covariance of the LMMSE channel estimate.

    Per trial, fading coefficients eta ~ CN(0, I_r) and noise
    ~ CN(0, sigma^2 I_LM) generate the received vector; the estimate is
    the standard LMMSE correlator applied to it, and the sample covariance
    of (h_hat - h) over trials is returned (normalized by the trial count;
    the error has zero mean).  CN(0, 1) means independent real and
    imaginary parts of variance one half each.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    p = np.asarray(pilots, dtype=complex)
    m = stacked.num_antennas
    r = stacked.total_rank
    factor = stacked.stacked_factor_dense()  # KM x r
    pt = np.kron(p, np.eye(m))  # LM x KM
    q = pt @ factor  # LM x r
    lm = q.shape[0]

    gram_y = q @ q.conj().T + noise_var * np.eye(lm)
    # eta and noise drawn in a fixed order for reproducibility
    eta = _complex_normal(rng, (r, trials))
    noise = _complex_normal(rng, (lm, trials)) * np.sqrt(noise_var)
    y = q @ eta + noise
    eta_hat = q.conj().T @ np.linalg.solve(gram_y, y)
    err = factor @ (eta_hat - eta)  # KM x trials
    return hermitian_part(err @ err.conj().T / trials)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)
