"""Noiseless identifiability bounds demo.

Shows the necessary pilot length ceil(r/M), the two special covariance
regimes (orthogonal and identical user subspaces), and numeric rank checks
on concrete pilot matrices.
"""

import numpy as np

from pilotseq import (
    check_identifiability,
    classify_subspaces,
    covariance_from_rays,
    make_uca,
    necessary_length,
    sample_user_geometry,
    truncate_covariance,
)

rng = np.random.default_rng(7)
geom = make_uca(16, 2.0, 1.8e9)

covs = []
for k in range(5):
    user = sample_user_geometry(rng, 250.0, 750.0, 200, 50.0)
    covs.append(truncate_covariance(covariance_from_rays(geom, user), 0.99))

ranks = [c.retained_rank for c in covs]
r = sum(ranks)
print(f"K = 5 users, retained ranks {ranks}, total r = {r}, M = 16")
print(f"necessary pilot length ceil(r/M) = {necessary_length(covs, 16)}")

report = classify_subspaces(covs)
print(f"orthogonal subspaces: {report.orthogonal_case}")
print(f"identical subspaces:  {report.identical_case}")
print(f"general sufficient length (rank(P) = K): {report.sufficient_length_general}")

print("\nidentifiability of concrete pilots:")
for L in range(1, 6):
    pilots = rng.standard_normal((L, 5)) + 1j * rng.standard_normal((L, 5))
    ok = check_identifiability(pilots, covs)
    print(f"  random L = {L}: identifiable = {ok}")

print("\northogonal special case (two users on orthogonal antenna axes):")
from pilotseq import UserCovariance

e = np.eye(2, dtype=complex)
pair = [
    UserCovariance(np.outer(e[:, i], e[:, i].conj()), e[:, i : i + 1], np.array([1.0]), 1, 1.0)
    for i in range(2)
]
rep = classify_subspaces(pair)
print(f"  special-case sufficient length: {rep.special_case_length}")
single_symbol = np.array([[1.0, 1.0]], dtype=complex)
print(f"  single shared symbol works: {check_identifiability(single_symbol, pair)}")
