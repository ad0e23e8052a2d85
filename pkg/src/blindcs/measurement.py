"""Per-column Gaussian and hybrid Gaussian measurement operators.

Every column ``y_j`` of the data is observed through its own sampling matrix
``Phi_j`` (p x d) as ``z_j = Phi_j y_j``. In the hybrid scheme ``Phi_j`` is
the vertical stack of a fixed block ``F`` (shared by all columns) and a
varying block ``V_j``. Entries are i.i.d. N(0, variance), variance 1/d by
default.

Ensembles are immutable value objects; stacked sampling matrices are kept
as one (n, p, d) array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, DimensionError, SingularityError
from .rng import make_rng

__all__ = [
    "GaussianEnsemble",
    "HybridEnsemble",
    "MeasurementRecord",
    "sample_gaussian",
    "sample_hybrid",
    "apply",
    "project_column",
    "project_all",
    "projectors",
    "dense_block_operator",
    "ensemble_from_header",
    "DENSE_BUDGET",
]

DENSE_BUDGET = 10**8
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianEnsemble:
    mats: np.ndarray  # (n, p, d)
    variance: float
    seed: int

    @property
    def n(self) -> int:
        return self.mats.shape[0]

    @property
    def p(self) -> int:
        return self.mats.shape[1]

    @property
    def d(self) -> int:
        return self.mats.shape[2]

    def header(self) -> dict:
        return {"type": "gaussian", "p": self.p, "d": self.d, "n": self.n,
                "variance": self.variance, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class HybridEnsemble:
    fixed: np.ndarray  # (p_f, d)
    varying: np.ndarray  # (n, p_v, d)
    variance: float
    seed: int

    @property
    def n(self) -> int:
        return self.varying.shape[0]

    @property
    def p_f(self) -> int:
        return self.fixed.shape[0]

    @property
    def p_v(self) -> int:
        return self.varying.shape[1]

    @property
    def p(self) -> int:
        return self.p_f + self.p_v

    @property
    def d(self) -> int:
        return self.fixed.shape[1]

    @property
    def mats(self) -> np.ndarray:
        """Stacked ``[F; V_j]`` for every column, shape (n, p_f + p_v, d)."""
        F = np.broadcast_to(self.fixed, (self.n,) + self.fixed.shape)
        return np.concatenate([F, self.varying], axis=1)

    def varying_part(self) -> GaussianEnsemble:
        """The varying blocks alone, viewed as a Gaussian ensemble."""
        return GaussianEnsemble(self.varying, self.variance, self.seed)

    def header(self) -> dict:
        return {"type": "hybrid", "p_f": self.p_f, "p_v": self.p_v, "d": self.d,
                "n": self.n, "variance": self.variance, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    observations: np.ndarray  # (n, p); row j is z_j
    ensemble: GaussianEnsemble | HybridEnsemble

    @property
    def fixed_sketch(self) -> np.ndarray:
        """F Y as a p_f x n matrix (hybrid ensembles only)."""
        if not isinstance(self.ensemble, HybridEnsemble):
            raise TypeError("fixed sketch is only defined for hybrid ensembles")
        return self.observations[:, : self.ensemble.p_f].T

    @property
    def varying_observations(self) -> np.ndarray:
        if not isinstance(self.ensemble, HybridEnsemble):
            raise TypeError("varying part is only defined for hybrid ensembles")
        return self.observations[:, self.ensemble.p_f:]


def _variance(d, variance):
    return 1.0 / d if variance is None else float(variance)


def sample_gaussian(p: int, d: int, n: int, seed: int, variance: float | None = None) -> GaussianEnsemble:
    """n independent p x d sampling matrices with i.i.d. N(0, variance) entries."""
    if not 1 <= p <= d:
        raise DimensionError(f"need 1 <= p <= d, got p={p}, d={d}")
    if n < 1:
        raise DimensionError("n must be >= 1")
    var = _variance(d, variance)
    mats = make_rng(seed, "gaussian").standard_normal((n, p, d)) * np.sqrt(var)
    return GaussianEnsemble(mats, var, seed)


def sample_hybrid(p_f: int, p_v: int, d: int, n: int, seed: int,
                  variance: float | None = None) -> HybridEnsemble:
    """Fixed block F (p_f x d) shared by all columns plus per-column V_j."""
    if p_f < 1 or p_v < 1:
        raise DimensionError(f"need p_f >= 1 and p_v >= 1, got {p_f}, {p_v}")
    if p_f + p_v > d:
        raise DimensionError(f"need p_f + p_v <= d, got {p_f} + {p_v} > {d}")
    if n < 1:
        raise DimensionError("n must be >= 1")
    var = _variance(d, variance)
    s = np.sqrt(var)
    F = make_rng(seed, "fixed").standard_normal((p_f, d)) * s
    V = make_rng(seed, "varying").standard_normal((n, p_v, d)) * s
    return HybridEnsemble(F, V, var, seed)


def ensemble_from_header(header: dict):
    """Rebuild an ensemble from its ``header()`` (matrices are regenerated)."""
    kind = header.get("type")
    if kind == "gaussian":
        return sample_gaussian(header["p"], header["d"], header["n"], header["seed"], header["variance"])
    if kind == "hybrid":
        return sample_hybrid(header["p_f"], header["p_v"], header["d"], header["n"],
                             header["seed"], header["variance"])
    raise ValueError(f"unknown ensemble type {kind!r}")


def apply(ensemble, Y) -> MeasurementRecord:
    """Measure every column: ``z_j = Phi_j y_j``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape != (ensemble.d, ensemble.n):
        raise DimensionError(f"Y has shape {Y.shape}, expected ({ensemble.d}, {ensemble.n})")
    if isinstance(ensemble, HybridEnsemble):
        zf = (ensemble.fixed @ Y).T
        zv = np.einsum("npd,dn->np", ensemble.varying, Y)
        Z = np.concatenate([zf, zv], axis=1)
    else:
        Z = np.einsum("npd,dn->np", ensemble.mats, Y)
    return MeasurementRecord(Z, ensemble)


def _qr_of_transpose(Phi):
    # Phi^T = Q R with Q (.., d, p) orthonormal and R (.., p, p) upper triangular
    Q, R = np.linalg.qr(np.swapaxes(Phi, -1, -2))
    diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    scale = np.max(np.abs(Phi), axis=(-2, -1))[..., None]
    if np.any(diag <= RANK_TOL * np.maximum(scale, np.finfo(float).tiny)):
        raise SingularityError("sampling matrix does not have full row rank")
    return Q, R


def project_column(Phi, z) -> np.ndarray:
    """Minimum-norm preimage ``Phi^T (Phi Phi^T)^{-1} z``.

    The result lies in the row space of Phi and reproduces ``z`` exactly.
    Computed through a QR factorisation of ``Phi^T``.
    """
    Phi = np.asarray(Phi, dtype=float)
    z = np.asarray(z, dtype=float)
    if Phi.ndim != 2 or z.shape != (Phi.shape[0],):
        raise DimensionError(f"shapes Phi {Phi.shape} and z {z.shape} do not match")
    if Phi.shape[0] > Phi.shape[1]:
        raise DimensionError("need p <= d")
    Q, R = _qr_of_transpose(Phi)
    return Q @ np.linalg.solve(R.T, z)


def project_all(ensemble, record: MeasurementRecord | np.ndarray, part: str = "all") -> np.ndarray:
    """Projected data matrix (d x n) with column j equal to ``project_column``.

    ``part`` selects the rows used for hybrid ensembles: ``"all"``,
    ``"fixed"`` or ``"varying"``.
    """
    Z = record.observations if isinstance(record, MeasurementRecord) else np.asarray(record)
    if isinstance(ensemble, HybridEnsemble):
        if part == "varying":
            mats, Z = ensemble.varying, Z[:, ensemble.p_f:]
        elif part == "fixed":
            mats = np.broadcast_to(ensemble.fixed, (ensemble.n,) + ensemble.fixed.shape)
            Z = Z[:, : ensemble.p_f]
        else:
            mats = ensemble.mats
    else:
        mats = ensemble.mats
    Q, R = _qr_of_transpose(mats)
    w = np.linalg.solve(np.swapaxes(R, -1, -2), Z[..., None])  # (n, p, 1)
    return np.einsum("ndp,np->dn", Q, w[..., 0])


def projectors(ensemble, part: str = "all") -> np.ndarray:
    """Orthonormal bases (n, d, p) of the row spaces of the sampling matrices."""
    if isinstance(ensemble, HybridEnsemble) and part == "varying":
        mats = ensemble.varying
    else:
        mats = ensemble.mats
    Q, _ = _qr_of_transpose(mats)
    return Q


def dense_block_operator(ensemble, budget: int = DENSE_BUDGET) -> np.ndarray:
    """Block-diagonal (pn x dn) matrix with blocks Phi_1, ..., Phi_n.

    Acts on the column-major vectorisation ``Y.reshape(-1, order="F")``.
    """
    mats = ensemble.mats
    n, p, d = mats.shape
    if (p * n) * (d * n) > budget:
        raise BudgetError(f"dense operator of {p * n} x {d * n} exceeds budget {budget}")
    M = np.zeros((p * n, d * n))
    for j in range(n):
        M[j * p:(j + 1) * p, j * d:(j + 1) * d] = mats[j]
    return M
