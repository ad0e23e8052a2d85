"""Sparse coefficient recovery with a known (or learned) dictionary.

Orthogonal matching pursuit, in a single-vector form and a batched form that
accepts either one shared dictionary or one effective dictionary per column
(``Phi_j A`` in the compressive setting).

Greedy pursuit can pick a wrong first atom on coherent effective
dictionaries even for noiseless data. When the final residual does not
vanish and ``C(m, k)`` is small, the k-subsets are searched exhaustively;
with noiseless data and ``spark(Phi A) > 2k`` the zero-residual support is
unique.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, DimensionError

__all__ = [
    "SparseSolution",
    "CoefficientRecovery",
    "omp",
    "omp_batch",
    "check_restricted_injectivity",
    "recover_all_coefficients",
    "INJECTIVITY_TOL",
    "exhaustive_search",
    "FLAG_RANK_DEFICIENT",
    "FLAG_OVERFIT",
    "FLAG_EXHAUSTIVE",
]

INJECTIVITY_TOL = 1e-8
_ZERO_RES = 1e-12  # relative residual treated as an exact fit
EXACT_RES = 1e-10  # relative residual above which the exhaustive fallback runs
FALLBACK_BUDGET = 10**5

# per-column flag bits used by omp_batch and recover_all_coefficients
FLAG_RANK_DEFICIENT = 1
FLAG_OVERFIT = 2  # an exact fit with fewer than k atoms exists
FLAG_EXHAUSTIVE = 4


@dataclass
class SparseSolution:
    support: tuple[int, ...]
    values: np.ndarray
    residual: float
    flags: tuple[str, ...] = ()
    history: list[float] = field(default_factory=list)

    def dense(self, m: int) -> np.ndarray:
        x = np.zeros(m)
        x[list(self.support)] = self.values
        return x


def _col_norms(D):
    nrm = np.linalg.norm(D, axis=-2)
    return np.where(nrm > 0, nrm, 1.0)


def exhaustive_search(D, z, k: int, budget: int = FALLBACK_BUDGET):
    """Best k-subset least-squares fit; returns ``(support, values, residual)``."""
    D = np.asarray(D, dtype=float)
    m = D.shape[1]
    if math.comb(m, k) > budget:
        raise BudgetError(f"C({m},{k}) = {math.comb(m, k)} subsets exceeds budget {budget}")
    best = (None, None, np.inf)
    it = itertools.combinations(range(m), k)
    while True:
        block = np.asarray(list(itertools.islice(it, 8192)), dtype=np.int64)
        if block.size == 0:
            return best
        Ds = D[:, block].transpose(1, 0, 2)  # (batch, p, k)
        G = np.swapaxes(Ds, 1, 2) @ Ds
        b = np.swapaxes(Ds, 1, 2) @ z
        with np.errstate(all="ignore"):
            try:
                x = np.linalg.solve(G, b[..., None])[..., 0]
            except np.linalg.LinAlgError:
                x = np.stack([np.linalg.lstsq(M, z, rcond=None)[0] for M in Ds])
        res = np.linalg.norm(z[None, :] - np.einsum("bpk,bk->bp", Ds, x), axis=1)
        res = np.where(np.isfinite(res), res, np.inf)
        i = int(np.argmin(res))
        if res[i] < best[2]:
            # refit the winner with a stable solver
            xi = np.linalg.lstsq(Ds[i], z, rcond=None)[0]
            best = (tuple(int(a) for a in block[i]), xi, float(np.linalg.norm(z - Ds[i] @ xi)))


def omp(effective_dictionary, z, k: int, fallback: bool = True,
        budget: int = FALLBACK_BUDGET) -> SparseSolution:
    """Greedy k-step pursuit with a least-squares refit after every step.

    Atoms are chosen by absolute correlation with the residual, after
    normalising the columns of the effective dictionary.

    Flags
    -----
    ``rank_deficient``
        a refit matrix lost rank; the minimum-norm solution was used.
    ``exact_before_k``
        the residual vanished before step k, so later atoms are arbitrary.
    ``exhaustive``
        the greedy residual did not vanish and the exhaustive search was used.
    """
    D = np.asarray(effective_dictionary, dtype=float)
    z = np.asarray(z, dtype=float)
    if D.ndim != 2 or z.shape != (D.shape[0],):
        raise DimensionError(f"dictionary {D.shape} and z {z.shape} do not match")
    if k < 1 or k > D.shape[1]:
        raise DimensionError(f"need 1 <= k <= m, got k={k}")
    scale = _col_norms(D)
    znorm = np.linalg.norm(z)
    r = z.copy()
    support: list[int] = []
    flags: set[str] = set()
    history = [float(znorm)]
    x = np.zeros(0)
    for step in range(k):
        if step and history[-1] <= _ZERO_RES * max(znorm, 1e-300):
            flags.add("exact_before_k")
        corr = np.abs(D.T @ r) / scale
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        Ds = D[:, support]
        x, _, rank, _ = np.linalg.lstsq(Ds, z, rcond=None)
        if rank < len(support):
            flags.add("rank_deficient")
        r = z - Ds @ x
        history.append(float(np.linalg.norm(r)))
    order = np.argsort(support)
    sol_support, sol_values, res = tuple(support[i] for i in order), x[order], history[-1]
    if fallback and res > EXACT_RES * znorm and math.comb(D.shape[1], k) <= budget:
        S2, x2, r2 = exhaustive_search(D, z, k, budget)
        if r2 < res:
            sol_support, sol_values, res = S2, x2, r2
            flags.add("exhaustive")
    return SparseSolution(sol_support, sol_values, res, tuple(sorted(flags)), history)


def omp_batch(D, Y, k: int):
    """OMP on every column of ``Y`` at once.

    ``D`` is either (p, m), shared by all columns, or (n, p, m) with one
    effective dictionary per column. Returns ``(X, residuals, flags)`` where
    ``X`` is m x n, ``residuals`` the p x n residual matrix and ``flags`` a
    uint8 array (n,) of ``FLAG_*`` bits.
    """
    D = np.asarray(D, dtype=float)
    Y = np.asarray(Y, dtype=float)
    p, n = Y.shape
    shared = D.ndim == 2
    m = D.shape[-1]
    if D.shape[-2] != p or (not shared and D.shape[0] != n):
        raise DimensionError(f"dictionary {D.shape} incompatible with data {Y.shape}")
    if k < 1 or k > m:
        raise DimensionError(f"need 1 <= k <= m, got k={k}")
    scale = _col_norms(D)  # (m,) or (n, m)
    cols = np.arange(n)
    R = Y.copy()
    S = np.zeros((n, 0), dtype=np.int64)
    flags = np.zeros(n, dtype=np.uint8)
    xs = np.zeros((n, 0))
    ynorm = np.linalg.norm(Y, axis=0)
    for step in range(k):
        if step:
            early = np.linalg.norm(R, axis=0) <= _ZERO_RES * np.maximum(ynorm, 1e-300)
            flags[early] |= FLAG_OVERFIT
        if shared:
            c = np.abs(D.T @ R) / scale[:, None]  # (m, n)
        else:
            c = (np.abs(np.einsum("npm,pn->nm", D, R)) / scale).T
        if step:
            c[S.T, cols] = -1.0
        S = np.hstack([S, c.argmax(axis=0)[:, None]])
        if shared:
            Ds = D[:, S].transpose(1, 0, 2)  # (n, p, s)
        else:
            Ds = np.take_along_axis(D, S[:, None, :], axis=2)
        G = np.swapaxes(Ds, 1, 2) @ Ds
        b = np.einsum("nps,pn->ns", Ds, Y)
        cond_bad = np.linalg.cond(G) > 1e12 if step else np.zeros(n, dtype=bool)
        try:
            xs = np.linalg.solve(G, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            cond_bad = np.ones(n, dtype=bool)
            xs = np.zeros_like(b)
        if cond_bad.any():
            flags[cond_bad] |= FLAG_RANK_DEFICIENT
            for j in np.flatnonzero(cond_bad):
                xs[j] = np.linalg.lstsq(Ds[j], Y[:, j], rcond=None)[0]
        R = Y - np.einsum("nps,ns->pn", Ds, xs)
    X = np.zeros((m, n))
    X[S.T, cols] = xs.T
    return X, R, flags


def check_restricted_injectivity(Phi, A, s: int, budget: int = 10**7,
                                 tol: float = INJECTIVITY_TOL) -> bool:
    """True iff every s-column submatrix of ``Phi @ A`` has numerical rank s."""
    M = np.asarray(Phi, dtype=float) @ np.asarray(getattr(A, "atoms", A), dtype=float)
    p, m = M.shape
    if s < 1:
        raise DimensionError("s must be >= 1")
    if s > p or s > m:
        return False
    if math.comb(m, s) > budget:
        raise BudgetError(f"C({m},{s}) = {math.comb(m, s)} subsets exceeds budget {budget}")
    it = itertools.combinations(range(m), s)
    while True:
        block = np.asarray(list(itertools.islice(it, 20000)), dtype=np.int64)
        if block.size == 0:
            return True
        sv = np.linalg.svd(M[:, block].transpose(1, 0, 2), compute_uv=False)
        if np.any(sv[:, -1] <= tol * sv[:, 0]) or np.any(sv[:, 0] == 0):
            return False


@dataclass
class CoefficientRecovery:
    X: np.ndarray  # m x n
    Y: np.ndarray  # d x n, A @ X
    residuals: np.ndarray  # (n,) ||z_j - Phi_j A x_j||
    flags: np.ndarray  # (n,) uint8, FLAG_* bits


def recover_all_coefficients(dictionary, ensemble, record, k: int, fallback: bool = True,
                             budget: int = FALLBACK_BUDGET) -> CoefficientRecovery:
    """Per-column OMP on ``Phi_j A``; reconstructs ``Y_hat = A X_hat``.

    Columns whose greedy residual does not vanish are retried with the
    exhaustive search when ``fallback`` is set and ``C(m, k) <= budget``.
    """
    A = np.asarray(getattr(dictionary, "atoms", dictionary), dtype=float)
    mats = ensemble.mats
    if A.shape[0] != mats.shape[2]:
        raise DimensionError(f"dictionary has {A.shape[0]} rows, sampling matrices have d={mats.shape[2]}")
    Z = getattr(record, "observations", record)
    Deff = mats @ A  # (n, p, m)
    Zt = np.asarray(Z, dtype=float).T
    X, R, flags = omp_batch(Deff, Zt, k)
    res = np.linalg.norm(R, axis=0)
    znorm = np.linalg.norm(Zt, axis=0)
    if fallback and math.comb(A.shape[1], k) <= budget:
        for j in np.flatnonzero(res > EXACT_RES * znorm):
            S, x, r = exhaustive_search(Deff[j], Zt[:, j], k, budget)
            if r < res[j]:
                X[:, j] = 0.0
                X[list(S), j] = x
                res[j] = r
                flags[j] |= FLAG_EXHAUSTIVE
    if k > 1:
        # exact fits that survive dropping one atom mean k was too large
        for j in np.flatnonzero((res <= EXACT_RES * znorm) & ~(flags & FLAG_OVERFIT).astype(bool)):
            S = np.flatnonzero(X[:, j])
            for drop in range(len(S)):
                sub = Deff[j][:, np.delete(S, drop)]
                x = np.linalg.lstsq(sub, Zt[:, j], rcond=None)[0]
                if np.linalg.norm(Zt[:, j] - sub @ x) <= EXACT_RES * znorm[j]:
                    flags[j] |= FLAG_OVERFIT
                    break
    return CoefficientRecovery(X, A @ X, res, flags)
