"""Dense complex-Hermitian linear algebra kernel.

Thin, opinionated wrappers around LAPACK (via numpy/scipy) that fix the
conventions used throughout the package: eigenvalues are always sorted in
descending order, Hermitian matrices are symmetrized on entry so that
floating-point drift cannot accumulate across pipeline stages, and rank
tolerances are relative to the largest singular value.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "hermitian_part",
    "EigResult",
    "eigh_desc",
    "sqrt_psd",
    "numerical_rank",
    "psd_order_holds",
]


def hermitian_part(a) -> np.ndarray:
    """Return (A + A^H)/2 with an exactly real diagonal.

    This is the canonical constructor for Hermitian data in this package:
    every matrix that is Hermitian by math but possibly not by floating
    point goes through here before further processing.

    Raises ValueError for non-square input or non-finite entries.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    h = 0.5 * (a + a.conj().T)
    if np.iscomplexobj(h):
        n = h.shape[0]
        h[np.arange(n), np.arange(n)] = h.diagonal().real
    return h


class EigResult(NamedTuple):
    """Eigendecomposition with eigenvalues sorted descending.

    ``vectors[:, i]`` is the unit-norm eigenvector for ``values[i]``;
    ``A = vectors @ diag(values) @ vectors.conj().T``.
    """

    values: np.ndarray
    vectors: np.ndarray


def eigh_desc(a) -> EigResult:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    h = hermitian_part(a)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigensolver failed to converge on a {h.shape[0]}x{h.shape[0]} "
            f"Hermitian matrix: {exc}"
        ) from exc
    return EigResult(w[::-1].copy(), v[:, ::-1].copy())


def sqrt_psd(a, rank_tol: float = 1e-9) -> np.ndarray:
    """Thin square-root factor F of a PSD matrix, ``F @ F.conj().T ~= A``.

    Columns are eigenvectors scaled by the square roots of the eigenvalues,
    keeping only eigenvalues above ``rank_tol`` relative to the largest one.
    The returned factor has shape ``(dim, rank)``.

    Raises ValueError if the input is indefinite, i.e. has an eigenvalue
    below ``-1e-10 * max(eigenvalue)``.
    """
    w, v = eigh_desc(a)
    if w.size == 0:
        return np.zeros((0, 0), dtype=complex)
    wmax = max(float(w[0]), 0.0)
    if w[-1] < -1e-10 * max(wmax, 1e-300):
        raise ValueError(
            f"matrix is not PSD: eigenvalue {w[-1]:.6e} below tolerance "
            f"{-1e-10 * wmax:.6e}"
        )
    keep = w > rank_tol * wmax
    return v[:, keep] * np.sqrt(w[keep])


def numerical_rank(a, rel_tol: float = 1e-9) -> int:
    """Number of singular values above ``rel_tol`` times the largest one.

    Returns 0 for an all-zero matrix.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    a = np.asarray(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def psd_order_holds(a, b, slack: float = 0.0) -> bool:
    """True iff A is below B in the PSD order: lambda_min(B - A) >= -slack."""
    if slack < 0.0:
        raise ValueError("slack must be nonnegative")
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = hermitian_part(b.astype(complex) - a.astype(complex))
    lam_min = float(np.linalg.eigvalsh(diff)[0])
    return lam_min >= -slack
