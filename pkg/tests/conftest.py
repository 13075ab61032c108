import numpy as np
import pytest

from pilotseq import UserCovariance, eigh_desc, hermitian_part


def random_hermitian(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def random_psd(rng, dim, rank=None):
    rank = rank if rank is not None else dim
    f = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return f @ f.conj().T


def random_trace_one_cov(rng, dim, rank):
    """Random trace-one covariance of exact rank `rank` as a UserCovariance."""
    r = random_psd(rng, dim, rank)
    r = hermitian_part(r / np.real(np.trace(r)))
    w, v = eigh_desc(r)
    kept = np.maximum(w[:rank], 0.0)
    return UserCovariance(
        full_covariance=r,
        factor=v[:, :rank] * np.sqrt(kept),
        eigenvalues=kept,
        retained_rank=rank,
        captured_energy_fraction=float(np.sum(kept)),
    )


def random_user_set(rng, num_antennas, num_users, max_rank):
    return [
        random_trace_one_cov(rng, num_antennas, int(rng.integers(1, max_rank + 1)))
        for _ in range(num_users)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
