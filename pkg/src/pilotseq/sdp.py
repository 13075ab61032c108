"""Interior-point solver for the weighted-trace pilot-design subproblem.

Solves, for a Hermitian positive-definite weight W,

    minimize    Re tr(W X)
    subject to  X >= 0            (complex Hermitian, K x K)
                A(X) >= diag(b)   (r x r, block (i,j) of A(X) is X_ij G_ij)

over the K^2 real parameters of X.  Conceptually the complex cones are
handled through the standard real symmetric embedding
H -> [[Re H, -Im H], [Im H, Re H]]; because every quantity the iteration
touches (iterates, Nesterov-Todd scalings, directions) lies in the image
of that embedding, which is closed under products, inverses and square
roots, the computation is carried out directly on the isomorphic complex
Hermitian representatives at half the dense-algebra cost.  The method is
a Mehrotra predictor-corrector path following iteration with NT scaling;
the Schur complement is formed on the K^2 parameters, so per-iteration
work is a handful of dense operations on matrices of side r.

The primal iterate is feasible by construction at every accepted step
(both slack matrices are kept positive definite by the line search); the
dual matrix certifies the objective value, and a solve is accepted when
both the complementarity gap and the dual-feasibility residual fall below
the requested tolerance relative to the (scaled) objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.blas import dsyrk

__all__ = ["EmbeddedLmi", "SdpSolution", "SdpSolverError", "solve_weighted_trace"]

# (tau, sigma exponent, sigma floor): tried in order until a solve succeeds.
_PROFILES = (
    {"tau": 0.98, "expon": 3.0, "sigma_min": 0.0},
    {"tau": 0.95, "expon": 1.0, "sigma_min": 0.0},
    {"tau": 0.90, "expon": 1.0, "sigma_min": 0.05},
)
_PATIENCE = 30  # iterations without 10% progress before giving up


class SdpSolverError(RuntimeError):
    """Inner solver could not certify a solution at the requested tolerance."""

    def __init__(self, message, *, rel_gap=None, rel_dual_residual=None, iterations=None):
        super().__init__(message)
        self.rel_gap = rel_gap
        self.rel_dual_residual = rel_dual_residual
        self.iterations = iterations


@dataclass(frozen=True)
class SdpSolution:
    """Certified solution of one weighted-trace subproblem."""

    x_gram: np.ndarray
    objective: float
    rel_gap: float
    rel_dual_residual: float
    iterations: int
    profile: int


class EmbeddedLmi:
    """Constraint tensors of the embedded SDP for one stacked covariance.

    Independent of the error budget and of the weight matrix, so one
    instance is shared by every subproblem solved on the same set of user
    covariances.  Variable order: the K real diagonal entries of X, then
    (Re X_ij, Im X_ij) for i < j in column-major pair order.
    """

    def __init__(self, gram: np.ndarray, offsets: np.ndarray):
        k = len(offsets) - 1
        r = int(offsets[-1])
        self.num_users = k
        self.total_rank = r
        self.num_vars = k * k
        self.pairs = [(i, j) for j in range(k) for i in range(j)]
        self.idx = [np.arange(offsets[i], offsets[i + 1]) for i in range(k)]

        # per-variable middle blocks: A(Theta_v) restricted to its (i, j) block
        mids = []
        for v in range(self.num_vars):
            if v < k:
                block = gram[offsets[v] : offsets[v + 1], offsets[v] : offsets[v + 1]]
                mids.append((v, v, np.asarray(block, dtype=complex)))
            else:
                i, j = self.pairs[(v - k) // 2]
                block = gram[offsets[i] : offsets[i + 1], offsets[j] : offsets[j + 1]]
                if (v - k) % 2 == 1:
                    block = 1j * block
                mids.append((i, j, np.asarray(block, dtype=complex)))
        self.mids = mids

        basis1 = np.zeros((self.num_vars, k, k), dtype=complex)
        basis2 = np.zeros((self.num_vars, r, r), dtype=complex)
        for v in range(self.num_vars):
            i, j, mid = mids[v]
            if v < k:
                basis1[v, v, v] = 1.0
            else:
                a, b = self.pairs[(v - k) // 2]
                val = 1.0 if (v - k) % 2 == 0 else 1.0j
                basis1[v, a, b] = val
                basis1[v, b, a] = np.conj(val)
            basis2[v][np.ix_(self.idx[i], self.idx[j])] = mid
            if i != j:
                basis2[v][np.ix_(self.idx[j], self.idx[i])] = mid.conj().T
        self.basis1 = basis1
        self.basis2 = basis2
        self._basis1_conj_flat = basis1.conj().reshape(self.num_vars, -1)
        self._basis2_conj_flat = basis2.conj().reshape(self.num_vars, -1)

        # Hermitian packing: [diag, sqrt2*Re(upper), sqrt2*Im(upper)] so the
        # real dot of packed vectors equals tr(A B) for Hermitian A, B
        iu = np.triu_indices(r, 1)
        self._diag_flat = np.arange(r) * r + np.arange(r)
        self._upper_flat = iu[0] * r + iu[1]
        self._iu = iu

        # variables grouped by block shape so the scaled tensors are built
        # with a few batched matmuls instead of a per-variable python loop
        groups = {}
        for v in range(self.num_vars):
            i, j, mid = mids[v]
            key = (mid.shape[0], mid.shape[1], i == j)
            groups.setdefault(key, []).append(v)
        self._groups = [
            (
                np.array(vs, dtype=np.intp),
                np.stack([mids[v][2] for v in vs]),
                np.array([mids[v][0] for v in vs], dtype=np.intp),
                np.array([mids[v][1] for v in vs], dtype=np.intp),
                diagonal,
            )
            for (h, w, diagonal), vs in groups.items()
        ]

    @classmethod
    def from_stacked(cls, stacked) -> "EmbeddedLmi":
        return cls(stacked.gram, stacked.offsets)

    def weight_vector(self, weight) -> np.ndarray:
        """Objective vector: q @ params = Re tr(W X(params))."""
        w = np.asarray(weight, dtype=complex)
        k = self.num_users
        q = np.empty(self.num_vars)
        q[:k] = np.real(np.diag(w))
        for t, (i, j) in enumerate(self.pairs):
            q[k + 2 * t] = 2.0 * np.real(w[i, j])
            q[k + 2 * t + 1] = 2.0 * np.imag(w[i, j])
        return q

    def gram_matrix(self, params) -> np.ndarray:
        """Rebuild the complex Hermitian X from the parameter vector."""
        k = self.num_users
        x = np.zeros((k, k), dtype=complex)
        x[np.arange(k), np.arange(k)] = params[:k]
        for t, (i, j) in enumerate(self.pairs):
            x[i, j] = params[k + 2 * t] + 1j * params[k + 2 * t + 1]
            x[j, i] = np.conj(x[i, j])
        return x

    def feasible_diagonal_start(self, rhs_diag, lam) -> np.ndarray:
        """Strictly feasible multiple of the identity for both cones."""
        need = 0.0
        for b_i, lam_i in zip(rhs_diag, lam):
            if b_i > 0.0:
                need = max(need, b_i / lam_i)
        x0 = np.zeros(self.num_vars)
        x0[: self.num_users] = 1.25 * need + 1.0
        return x0

    def pack(self, tensor) -> np.ndarray:
        """Pack Hermitian (n, r, r) slices into real (n, r^2) rows."""
        flat = tensor.reshape(tensor.shape[0], -1)
        diag = flat[:, self._diag_flat].real
        upper = flat[:, self._upper_flat] * np.sqrt(2.0)
        return np.concatenate([diag, upper.real, upper.imag], axis=1)

    def pack_one(self, mat) -> np.ndarray:
        return self.pack(mat[None])[0]

    def unpack(self, vec) -> np.ndarray:
        """Inverse of the packing, returning a Hermitian matrix."""
        r = self.total_rank
        nu = self._upper_flat.size
        out = np.zeros((r, r), dtype=complex)
        out[np.arange(r), np.arange(r)] = vec[:r]
        upper = (vec[r : r + nu] + 1j * vec[r + nu :]) / np.sqrt(2.0)
        out[self._iu[0], self._iu[1]] = upper
        out[self._iu[1], self._iu[0]] = np.conj(upper)
        return out


def _dot_herm(a, b) -> float:
    """tr(A B) for Hermitian A, B (a real number)."""
    return float(np.einsum("ij,ji->", a, b).real)


def _max_step(d, delta) -> float:
    """Largest alpha keeping diag(d) + alpha * delta PSD (d > 0)."""
    s = 1.0 / np.sqrt(d)
    lam_min = np.linalg.eigvalsh(delta * s[:, None] * s[None, :])[0]
    return np.inf if lam_min >= 0.0 else -1.0 / lam_min


def solve_weighted_trace(
    emb: EmbeddedLmi,
    rhs_diag: np.ndarray,
    weight,
    tol: float,
    lam: Optional[np.ndarray] = None,
    max_iter: int = 200,
) -> SdpSolution:
    """Solve the subproblem for one weight matrix at tolerance ``tol``.

    Runs up to three deterministic parameter profiles (step fraction and
    centering schedule), accepting the first whose best iterate certifies
    ``max(rel_gap, rel_dual_residual) <= tol``.  Raises SdpSolverError if
    none does.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = emb.weight_vector(weight)
    if lam is None:
        lam = np.concatenate(
            [np.real(np.diag(emb.mids[v][2])) for v in range(emb.num_users)]
        )
    x0 = emb.feasible_diagonal_start(rhs_diag, lam)
    last = None
    for prof_idx, prof in enumerate(_PROFILES):
        result = _solve_single(emb, rhs_diag, q, tol, x0, max_iter=max_iter, **prof)
        if result["crit"] <= tol:
            return SdpSolution(
                x_gram=emb.gram_matrix(result["x"]),
                objective=result["objective"],
                rel_gap=result["rel_gap"],
                rel_dual_residual=result["rel_rd"],
                iterations=result["iterations"],
                profile=prof_idx,
            )
        last = result
    raise SdpSolverError(
        f"interior-point solve stalled at certified accuracy {last['crit']:.3e} "
        f"(requested {tol:.1e}) after {last['iterations']} iterations",
        rel_gap=last["rel_gap"],
        rel_dual_residual=last["rel_rd"],
        iterations=last["iterations"],
    )


def _solve_single(emb, rhs_diag, q, tol, x0, max_iter, tau, expon, sigma_min):
    n, k, r = emb.num_vars, emb.num_users, emb.total_rank
    mtot = k + r
    qscale = max(1.0, float(np.abs(q).max()))
    qs = q / qscale
    f02 = np.diag(-np.asarray(rhs_diag, dtype=complex))

    x = x0.copy()
    z1 = np.tensordot(x, emb.basis1, axes=(0, 0))
    z2 = f02 + np.tensordot(x, emb.basis2, axes=(0, 0))
    s1 = np.eye(k, dtype=complex)
    s2 = np.eye(r, dtype=complex)

    best = None  # (crit, x, objective, rel_gap, rel_rd, iteration)
    since_improve = 0
    it = 0
    for it in range(max_iter):
        try:
            lz1 = np.linalg.cholesky(z1)
            lz2 = np.linalg.cholesky(z2)
            ls1 = np.linalg.cholesky(s1)
            ls2 = np.linalg.cholesky(s2)
        except np.linalg.LinAlgError:
            break  # numerical endgame; return best certified iterate
        u1, d1, _ = np.linalg.svd(ls1.conj().T @ lz1)
        u2, d2, _ = np.linalg.svd(ls2.conj().T @ lz2)
        ginv1 = (1.0 / np.sqrt(d1))[:, None] * (u1.conj().T @ ls1.conj().T)
        ginv2 = (1.0 / np.sqrt(d2))[:, None] * (u2.conj().T @ ls2.conj().T)
        mu = (float(d1 @ d1) + float(d2 @ d2)) / mtot

        rd = (
            qs
            - (emb._basis1_conj_flat @ s1.ravel()).real
            - (emb._basis2_conj_flat @ s2.ravel()).real
        )
        pobj = float(qs @ x)
        rel_gap = mu * mtot / max(1.0, abs(pobj))
        rel_rd = float(np.abs(rd).max())
        crit = max(rel_gap, rel_rd)
        if best is None or crit < best[0]:
            if best is None or crit < 0.9 * best[0]:
                since_improve = 0
            best = (crit, x.copy(), pobj * qscale, rel_gap, rel_rd, it + 1)
        since_improve += 1
        if crit <= tol:
            break
        if since_improve > _PATIENCE:
            break

        # scaled constraint tensors, batched by block shape
        ft1 = np.matmul(np.matmul(ginv1[None], emb.basis1), ginv1.conj().T[None])
        ft1_packed = _pack_small(ft1, k)
        slices = [ginv2[:, emb.idx[i]] for i in range(k)]
        ft2 = np.empty((n, r, r), dtype=complex)
        for vs, mid_stack, i_arr, j_arr, diagonal in emb._groups:
            left = np.stack([slices[i] for i in i_arr])
            right = np.stack([slices[j].conj() for j in j_arr])
            t_blk = left @ (mid_stack @ right.transpose(0, 2, 1))
            t_blk = t_blk + t_blk.conj().transpose(0, 2, 1)  # not in place: aliased
            if diagonal:
                t_blk *= 0.5
            ft2[vs] = t_blk
        ft2_packed = emb.pack(ft2)

        schur = dsyrk(1.0, ft2_packed, lower=0)
        schur = schur + schur.T
        np.fill_diagonal(schur, 0.5 * np.diag(schur))
        schur += ft1_packed @ ft1_packed.T
        jitter = 0.0
        chol = None
        for _ in range(10):
            try:
                chol = np.linalg.cholesky(
                    schur if jitter == 0.0 else schur + jitter * np.eye(n)
                )
                break
            except np.linalg.LinAlgError:
                jitter = max(1e-15 * np.trace(schur) / n, 10.0 * jitter)
        if chol is None:
            break

        def solve_schur(rhs):
            sol = cho_solve((chol, True), rhs)
            sol += cho_solve((chol, True), rhs - schur @ sol)  # one refinement
            return sol

        # predictor (affine direction)
        h = -(ft1_packed @ _pack_small(np.diag(d1).astype(complex)[None], k)[0]) - (
            ft2_packed @ emb.pack_one(np.diag(d2).astype(complex))
        )
        dx_aff = solve_schur(h - rd)
        dz1_aff = _unpack_small(ft1_packed.T @ dx_aff, k)
        dz2_aff = emb.unpack(ft2_packed.T @ dx_aff)
        ds1_aff = -np.diag(d1).astype(complex) - dz1_aff
        ds2_aff = -np.diag(d2).astype(complex) - dz2_aff
        a_z = min(1.0, tau * min(_max_step(d1, dz1_aff), _max_step(d2, dz2_aff)))
        a_s = min(1.0, tau * min(_max_step(d1, ds1_aff), _max_step(d2, ds2_aff)))
        mu_aff = (
            _dot_herm(np.diag(d1) + a_z * dz1_aff, np.diag(d1) + a_s * ds1_aff)
            + _dot_herm(np.diag(d2) + a_z * dz2_aff, np.diag(d2) + a_s * ds2_aff)
        ) / mtot
        exp_eff = expon if min(a_z, a_s) > 1.0 / np.sqrt(3.0) else 1.0
        sigma = max(sigma_min, min(1.0, max(0.0, mu_aff / mu) ** exp_eff))

        # corrector (combined direction); dZ and dS are Hermitian, so the
        # symmetrized product needs a single gemm
        h = np.zeros(n)
        correctors = []
        for d, dza, dsa, packed, small in (
            (d1, dz1_aff, ds1_aff, ft1_packed, True),
            (d2, dz2_aff, ds2_aff, ft2_packed, False),
        ):
            prod = dza @ dsa
            cross = 0.5 * (prod + prod.conj().T)
            resid = sigma * mu * np.eye(d.size) - np.diag(d * d) - cross
            corrector = resid * (2.0 / (d[:, None] + d[None, :]))
            correctors.append(corrector)
            if small:
                h += packed @ _pack_small(corrector[None], k)[0]
            else:
                h += packed @ emb.pack_one(corrector)
        dx = solve_schur(h - rd)
        dz1 = _unpack_small(ft1_packed.T @ dx, k)
        dz2 = emb.unpack(ft2_packed.T @ dx)
        ds1 = correctors[0] - dz1
        ds2 = correctors[1] - dz2
        a_z = min(1.0, tau * min(_max_step(d1, dz1), _max_step(d2, dz2)))
        a_s = min(1.0, tau * min(_max_step(d1, ds1), _max_step(d2, ds2)))

        x = x + a_z * dx
        s1 = s1 + a_s * (ginv1.conj().T @ ds1 @ ginv1)
        s1 = 0.5 * (s1 + s1.conj().T)
        s2 = s2 + a_s * (ginv2.conj().T @ ds2 @ ginv2)
        s2 = 0.5 * (s2 + s2.conj().T)
        z1 = np.tensordot(x, emb.basis1, axes=(0, 0))
        z2 = f02 + np.tensordot(x, emb.basis2, axes=(0, 0))

    if best is None:
        raise SdpSolverError(
            "interior-point solve failed before completing one iteration",
            iterations=it + 1,
        )
    return {
        "crit": best[0],
        "x": best[1],
        "objective": best[2],
        "rel_gap": best[3],
        "rel_rd": best[4],
        "iterations": best[5],
    }


def _pack_small(tensor, k) -> np.ndarray:
    """Hermitian packing for the small K x K block."""
    iu = np.triu_indices(k, 1)
    flat = tensor.reshape(tensor.shape[0], -1)
    diag = flat[:, np.arange(k) * k + np.arange(k)].real
    upper = flat[:, iu[0] * k + iu[1]] * np.sqrt(2.0)
    return np.concatenate([diag, upper.real, upper.imag], axis=1)


def _unpack_small(vec, k) -> np.ndarray:
    iu = np.triu_indices(k, 1)
    nu = iu[0].size
    out = np.zeros((k, k), dtype=complex)
    out[np.arange(k), np.arange(k)] = vec[:k]
    upper = (vec[k : k + nu] + 1j * vec[k + nu :]) / np.sqrt(2.0)
    out[iu[0], iu[1]] = upper
    out[iu[1], iu[0]] = np.conj(upper)
    return out
