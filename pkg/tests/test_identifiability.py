"""Tests for noiseless identifiability bounds and checks."""

import numpy as np
import pytest

from pilotseq import (
    UserCovariance,
    check_identifiability,
    classify_subspaces,
    necessary_length,
    numerical_rank,
)

from conftest import random_trace_one_cov, random_user_set


def basis_cov(dim, index):
    """Rank-one covariance on a standard basis vector."""
    e = np.zeros((dim, 1), dtype=complex)
    e[index, 0] = 1.0
    return UserCovariance(e @ e.conj().T, e, np.array([1.0]), 1, 1.0)


def vector_cov(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    f = v[:, None]
    return UserCovariance(f @ f.conj().T, f, np.array([1.0]), 1, 1.0)


def rank_k_pilot(rng, length, users, rank):
    a = rng.standard_normal((length, rank)) + 1j * rng.standard_normal((length, rank))
    b = rng.standard_normal((rank, users)) + 1j * rng.standard_normal((rank, users))
    return a @ b


class TestNecessaryLength:
    def test_small_ranks_fit_one_symbol(self, rng):
        covs = [random_trace_one_cov(rng, 10, r) for r in (3, 3, 3, 1)]
        assert necessary_length(covs, 10) == 1

    def test_exact_division(self, rng):
        covs = [random_trace_one_cov(rng, 30, 6) for _ in range(10)]  # r = 60
        assert necessary_length(covs, 30) == 2

    def test_ceiling(self, rng):
        covs = [random_trace_one_cov(rng, 30, 1) for _ in range(31)]  # r = 31
        assert necessary_length(covs, 30) == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            necessary_length([], 4)


class TestClassifySubspaces:
    def test_orthogonal_rank_one_pair(self):
        covs = [basis_cov(2, 0), basis_cov(2, 1)]
        report = classify_subspaces(covs)
        assert report.orthogonal_case
        assert report.special_case_length == 1
        assert report.necessary_length == 1
        assert report.sufficient_length_general == 2

    def test_identical_rank_one_pair(self):
        v = np.array([1.0, 1.0j]) / np.sqrt(2.0)
        covs = [vector_cov(v), vector_cov(v)]
        report = classify_subspaces(covs)
        assert report.identical_case
        assert not report.orthogonal_case
        assert report.special_case_length == 2

    def test_generic_covariances_are_neither(self, rng):
        covs = [random_trace_one_cov(rng, 4, 4) for _ in range(2)]
        report = classify_subspaces(covs)
        assert not report.orthogonal_case
        # full-rank spans over the whole space ARE identical
        assert report.identical_case
        covs = [random_trace_one_cov(rng, 6, 2), random_trace_one_cov(rng, 6, 3)]
        report = classify_subspaces(covs)
        assert not report.orthogonal_case
        assert not report.identical_case
        assert report.special_case_length is None

    def test_permutation_invariant(self, rng):
        covs = random_user_set(rng, 6, 4, 3)
        ref = classify_subspaces(covs)
        for perm in ([3, 1, 0, 2], [2, 3, 1, 0]):
            rep = classify_subspaces([covs[i] for i in perm])
            assert rep.orthogonal_case == ref.orthogonal_case
            assert rep.identical_case == ref.identical_case
            assert rep.total_rank_r == ref.total_rank_r

    def test_mixed_dimensions_rejected(self, rng):
        covs = [random_trace_one_cov(rng, 4, 2), random_trace_one_cov(rng, 5, 2)]
        with pytest.raises(ValueError):
            classify_subspaces(covs)


class TestCheckIdentifiability:
    def test_orthogonal_single_symbol(self):
        covs = [basis_cov(2, 0), basis_cov(2, 1)]
        pilots = np.array([[1.0, 1.0]], dtype=complex)
        assert check_identifiability(pilots, covs)

    def test_identical_single_symbol_fails(self):
        v = np.array([1.0, 0.0], dtype=complex)
        covs = [vector_cov(v), vector_cov(v)]
        pilots = np.array([[1.0, 1.0]], dtype=complex)
        assert not check_identifiability(pilots, covs)

    def test_zero_pilot_fails(self, rng):
        covs = random_user_set(rng, 4, 3, 2)
        assert not check_identifiability(np.zeros((2, 3)), covs)

    @pytest.mark.parametrize("seed", range(100))
    def test_full_rank_pilots_always_identify(self, seed):
        gen = np.random.default_rng(7000 + seed)
        m = int(gen.integers(2, 7))
        k = int(gen.integers(1, 4))
        covs = random_user_set(gen, m, k, min(2, m))
        pilots = rank_k_pilot(gen, k, k, k)
        assert numerical_rank(pilots, 1e-9) == k
        assert check_identifiability(pilots, covs)

    @pytest.mark.parametrize("seed", range(30))
    def test_below_necessary_bound_never_identifies(self, seed):
        gen = np.random.default_rng(8000 + seed)
        m = int(gen.integers(2, 5))
        k = int(gen.integers(2, 5))
        covs = random_user_set(gen, m, k, m)
        bound = necessary_length(covs, m)
        if bound < 2:
            covs = [random_trace_one_cov(gen, m, m) for _ in range(k)]
            bound = necessary_length(covs, m)
        length = bound - 1
        pilots = rank_k_pilot(gen, length, k, min(length, k)) if length else np.zeros((0, k))
        assert not check_identifiability(pilots, covs)

    @pytest.mark.parametrize("seed", range(30))
    def test_identical_subspace_reduces_to_pilot_rank(self, seed):
        gen = np.random.default_rng(9000 + seed)
        m, k, d = 6, 3, 2
        basis = np.linalg.qr(
            gen.standard_normal((m, d)) + 1j * gen.standard_normal((m, d))
        )[0]
        covs = []
        for _ in range(k):
            mix = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
            f = basis @ mix
            r = f @ f.conj().T
            r = r / np.real(np.trace(r))
            f = f / np.sqrt(np.real(np.trace(f @ f.conj().T)))
            lam = np.sum(np.abs(f) ** 2, axis=0)
            covs.append(UserCovariance(r, f, lam, d, 1.0))
        rank = int(gen.integers(1, k + 1))
        pilots = rank_k_pilot(gen, k, k, rank)
        assert check_identifiability(pilots, covs) == (numerical_rank(pilots, 1e-9) == k)
