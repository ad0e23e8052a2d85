"""Ground-truth sparse coding instances ``Y = A X``.

Each column of ``X`` has exactly ``k`` non-zeros on a support drawn from the
``k``-subsets of ``[m]``. Two coefficient models are provided:

``interval``
    non-zeros i.i.d. Uniform(0, 1].
``symmetric``
    non-zeros i.i.d. +-1 with equal probability (zero mean, unit magnitude).

Supports are either ``iid`` (uniform per column) or ``balanced``: every
support appears exactly ``ell`` times, laid out contiguously in
lexicographic support order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, DimensionError
from .rng import make_rng

__all__ = [
    "COEFF_MODELS",
    "ProblemDims",
    "Dictionary",
    "SparseCoefficientMatrix",
    "SparseCodingInstance",
    "generate_dictionary",
    "spark_check",
    "generate_coefficients",
    "synthesize",
    "coherence",
    "support_groups",
    "all_supports",
]

COEFF_MODELS = ("interval", "symmetric")
SPARK_TOL = 1e-8
ENUM_BUDGET = 10**7


@dataclass(frozen=True)
class ProblemDims:
    """Problem sizes. ``ell`` is set only for balanced instances."""

    d: int
    m: int
    k: int
    n: int
    ell: int | None = None

    def __post_init__(self):
        d, m, k, n = self.d, self.m, self.k, self.n
        if k < 1:
            raise DimensionError(f"sparsity k must be >= 1, got {k}")
        if 2 * k >= d:
            raise DimensionError(f"need 2k < d, got k={k}, d={d}")
        if m < k:
            raise DimensionError(f"need m >= k, got m={m}, k={k}")
        if n < 1:
            raise DimensionError("n must be >= 1")
        if self.ell is not None and n != self.ell * math.comb(m, k):
            raise DimensionError(
                f"balanced layout needs n = ell * C(m,k) = {self.ell * math.comb(m, k)}, got {n}"
            )

    @classmethod
    def balanced(cls, d: int, m: int, k: int, ell: int) -> "ProblemDims":
        if ell < 1:
            raise DimensionError("ell must be >= 1")
        return cls(d, m, k, ell * math.comb(m, k), ell)

    @property
    def n_supports(self) -> int:
        return math.comb(self.m, self.k)


@dataclass
class Dictionary:
    """A d x m dictionary with unit-norm columns."""

    atoms: np.ndarray

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        if self.atoms.ndim != 2:
            raise DimensionError("dictionary must be a 2-D array")

    def __array__(self, dtype=None, copy=None):
        return self.atoms if dtype is None else self.atoms.astype(dtype)

    @property
    def shape(self):
        return self.atoms.shape


@dataclass
class SparseCoefficientMatrix:
    values: np.ndarray
    supports: np.ndarray  # (n, k) sorted atom indices per column
    coeff_model: str

    def support_of(self, j: int) -> tuple[int, ...]:
        return tuple(int(i) for i in self.supports[j])


@dataclass
class SparseCodingInstance:
    dims: ProblemDims
    dictionary: Dictionary
    coeffs: SparseCoefficientMatrix
    data: np.ndarray
    seed: int
    mode: str = "iid"
    meta: dict = field(default_factory=dict)

    @property
    def A(self) -> np.ndarray:
        return self.dictionary.atoms

    @property
    def X(self) -> np.ndarray:
        return self.coeffs.values

    @property
    def Y(self) -> np.ndarray:
        return self.data

    def groups(self) -> dict[tuple[int, ...], np.ndarray]:
        """Map each realised support S to the column indices J(S)."""
        return support_groups(self.coeffs.supports)


def _atoms(A) -> np.ndarray:
    return np.asarray(getattr(A, "atoms", A), dtype=float)


def all_supports(m: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(m), k))


def support_groups(supports) -> dict[tuple[int, ...], np.ndarray]:
    supports = np.asarray(supports)
    groups: dict[tuple[int, ...], list[int]] = {}
    for j, row in enumerate(supports):
        groups.setdefault(tuple(int(i) for i in row), []).append(j)
    return {S: np.asarray(J) for S, J in groups.items()}


def generate_dictionary(d: int, m: int, seed: int) -> Dictionary:
    """Random Gaussian d x m dictionary with columns normalised to unit norm."""
    if d < 2 or m < 1:
        raise DimensionError(f"need d >= 2 and m >= 1, got d={d}, m={m}")
    A = make_rng(seed, "dictionary").standard_normal((d, m))
    return Dictionary(A / np.linalg.norm(A, axis=0))


def _subset_chunks(m, s, chunk=20000):
    it = itertools.combinations(range(m), s)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.asarray(block)


def spark_check(A, s: int, tol: float = SPARK_TOL, budget: int = ENUM_BUDGET) -> bool:
    """True iff every s-column submatrix has smallest singular value > tol.

    A numerical surrogate for ``Spark(A) > s``, by exhaustive enumeration.
    """
    A = _atoms(A)
    d, m = A.shape
    if s < 1:
        raise DimensionError("s must be >= 1")
    if s > d or s > m:
        return False
    if math.comb(m, s) > budget:
        raise BudgetError(f"C({m},{s}) = {math.comb(m, s)} subsets exceeds budget {budget}")
    for idx in _subset_chunks(m, s):
        sub = A[:, idx].transpose(1, 0, 2)  # (batch, d, s)
        smin = np.linalg.svd(sub, compute_uv=False)[:, -1]
        if np.any(smin <= tol):
            return False
    return True


def _draw_values(rng, coeff_model: str, size) -> np.ndarray:
    if coeff_model == "interval":
        return 1.0 - rng.random(size)  # (0, 1]
    if coeff_model == "symmetric":
        return rng.choice(np.array([-1.0, 1.0]), size=size)
    raise ValueError(f"unknown coefficient model {coeff_model!r}; expected one of {COEFF_MODELS}")


def generate_coefficients(
    dims: ProblemDims, coeff_model: str = "interval", mode: str = "iid", seed: int = 0
) -> SparseCoefficientMatrix:
    """Draw an m x n coefficient matrix with exactly k non-zeros per column.

    ``mode="balanced"`` requires ``dims.ell`` and repeats each support
    ``ell`` times in lexicographic order; ``mode="iid"`` draws each column's
    support uniformly from the k-subsets of [m].
    """
    m, k, n = dims.m, dims.k, dims.n
    if mode == "balanced":
        if dims.ell is None:
            raise DimensionError("balanced mode needs dims.ell (use ProblemDims.balanced)")
        supports = np.repeat(np.asarray(all_supports(m, k), dtype=np.int64), dims.ell, axis=0)
    elif mode == "iid":
        keys = make_rng(seed, "supports").random((n, m))
        supports = np.sort(np.argsort(keys, axis=1)[:, :k], axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'balanced' or 'iid'")
    vals = _draw_values(make_rng(seed, "values"), coeff_model, (n, k))
    X = np.zeros((m, n))
    X[supports.T, np.arange(n)] = vals.T
    return SparseCoefficientMatrix(X, supports, coeff_model)


def synthesize(
    dims: ProblemDims,
    coeff_model: str = "interval",
    mode: str = "iid",
    seed: int = 0,
    dictionary=None,
) -> SparseCodingInstance:
    """Generate ``Y = A X``; pass ``dictionary`` to override the random A."""
    if dictionary is None:
        A = generate_dictionary(dims.d, dims.m, seed)
    else:
        A = Dictionary(_atoms(dictionary))
        if A.shape != (dims.d, dims.m):
            raise DimensionError(f"dictionary shape {A.shape} != ({dims.d}, {dims.m})")
    coeffs = generate_coefficients(dims, coeff_model, mode, seed)
    return SparseCodingInstance(dims, A, coeffs, A.atoms @ coeffs.values, seed, mode)


def coherence(A) -> float:
    """Largest absolute normalised inner product between distinct columns."""
    A = _atoms(A)
    if A.shape[1] < 2:
        raise DimensionError("coherence needs at least two columns")
    An = A / np.linalg.norm(A, axis=0)
    G = np.abs(An.T @ An)
    np.fill_diagonal(G, 0.0)
    return float(min(G.max(), 1.0))
