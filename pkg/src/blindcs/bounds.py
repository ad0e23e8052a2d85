"""Closed-form sample-complexity and concentration bounds.

Sample counts are evaluated as exact rationals (:class:`fractions.Fraction`)
and returned as the smallest integer satisfying ``count >= formula``.
Binomial coefficients use exact big-integer arithmetic.
Real-valued concentration bounds are plain floats, returned unclamped even
when vacuous (probability above one, negative eigengap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .errors import DomainError

__all__ = [
    "C1",
    "C2",
    "BoundInputs",
    "BoundReport",
    "LowRankBound",
    "binom",
    "ceil_fraction",
    "ell_bound_gaussian",
    "ell_bound_gaussian_exact",
    "n_bound_gaussian",
    "n_bound_gaussian_exact",
    "ell_bound_hybrid",
    "ell_bound_hybrid_exact",
    "n_bound_hybrid",
    "gamma_threshold",
    "lowrank_measurement_bound",
    "manifold_dim",
    "coherence_tail",
    "zeta",
    "projected_variance",
    "eigengap_lower_bound",
    "subspace_error_bound",
    "subspace_sample_requirement",
    "eigenvector_error_bound",
    "pigeonhole_overlap",
    "arora_sample_expression",
    "bounds_table",
]

#: constants of the Gaussian inner-product concentration inequality
C1 = 8 * math.e / math.sqrt(6 * math.pi)
C2 = math.sqrt(8) * math.e


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # repr round-trips the decimal the caller typed, e.g. 0.1 -> 1/10
    return Fraction(repr(float(x)))


def binom(m: int, k: int) -> int:
    """Exact binomial coefficient C(m, k)."""
    return math.comb(int(m), int(k))


def ceil_fraction(q: Fraction) -> int:
    """Ceiling of a rational, computed in integer arithmetic."""
    return -((-q.numerator) // q.denominator)


def _check_positive(**kw):
    for name, v in kw.items():
        if v is None or v <= 0:
            raise DomainError(f"{name} must be positive, got {v!r}")


def _dof(d: int, k: int) -> int:
    # 2k(d - 2k) + 1: one more than the rank-2k manifold dimension per column
    return 2 * k * (d - 2 * k) + 1


# -- identifiability bounds --------------------------------------------------


def ell_bound_gaussian_exact(d: int, m: int, k: int, p: int) -> Fraction:
    _check_positive(d=d, m=m, k=k, p=p)
    if p <= 2 * k:
        raise DomainError(f"need p > 2k, got p={p}, k={k}")
    return Fraction(_dof(d, k), p - 2 * k) * binom(m, k)


def ell_bound_gaussian(d: int, m: int, k: int, p: int) -> int:
    """Samples per support pattern for recovery from Gaussian measurements.

    Smallest integer ``ell`` with ``ell >= (2k(d-2k)+1)/(p-2k) * C(m,k)``.

    >>> ell_bound_gaussian(16, 6, 2, 8)
    184
    """
    return ceil_fraction(ell_bound_gaussian_exact(d, m, k, p))


def n_bound_gaussian_exact(d: int, m: int, k: int, p: int, beta) -> Fraction:
    b = _as_fraction(beta)
    if not 0 < b < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
    return ell_bound_gaussian_exact(d, m, k, p) * binom(m, k) / b


def n_bound_gaussian(d: int, m: int, k: int, p: int, beta) -> int:
    """Total sample count guaranteeing success with probability ``1 - beta``.

    >>> n_bound_gaussian(16, 6, 2, 8, 0.5)
    5513
    """
    return ceil_fraction(n_bound_gaussian_exact(d, m, k, p, beta))


def ell_bound_hybrid_exact(d: int, k: int, p: int) -> Fraction:
    _check_positive(d=d, k=k, p=p)
    if p <= 3 * k + 1:
        raise DomainError(f"need p > 3k+1, got p={p}, k={k}")
    return Fraction(_dof(d, k), p - 3 * k - 1)


def ell_bound_hybrid(d: int, k: int, p: int) -> int:
    """Samples per support pattern under hybrid (fixed + varying) sampling.

    >>> ell_bound_hybrid(16, 2, 12)
    10
    """
    return ceil_fraction(ell_bound_hybrid_exact(d, k, p))


def n_bound_hybrid(d: int, m: int, k: int, p: int, beta) -> int:
    b = _as_fraction(beta)
    if not 0 < b < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
    return ceil_fraction(ell_bound_hybrid_exact(d, k, p) * binom(m, k) / b)


def gamma_threshold(d: int, k: int, p: int) -> int:
    """Minimum group size |J(S)| for which a group is guaranteed recoverable."""
    return ceil_fraction(ell_bound_hybrid_exact(d, k, p))


class LowRankBound(NamedTuple):
    per_column: int
    total: int


def manifold_dim(d: int, n: int, r: int) -> int:
    """Dimension r(d + n - r) of the manifold of rank-r d x n matrices."""
    return r * (d + n - r)


def lowrank_measurement_bound(d: int, ell: int, r: int) -> LowRankBound:
    """Measurements making a rank-r d x ell matrix unique given its sketches.

    ``total = 2r(d + ell - 2r) + 1`` (one more than the rank-2r manifold
    dimension) and ``per_column = ceil(total / ell)``.

    >>> lowrank_measurement_bound(16, 10, 2)
    LowRankBound(per_column=9, total=89)
    """
    _check_positive(d=d, ell=ell, r=r)
    if d < 2 * r:
        raise DomainError(f"need d >= 2r, got d={d}, r={r}")
    total = manifold_dim(d, ell, 2 * r) + 1
    return LowRankBound(ceil_fraction(Fraction(total, ell)), total)


def pigeonhole_overlap(ell: int, m: int, k: int) -> int:
    """Guaranteed overlap ceil(ell / C(m,k)) between a true group and some
    group of any alternative factorisation."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    return ceil_fraction(Fraction(ell, binom(m, k)))


# -- concentration / spectral bounds -------------------------------------


def coherence_tail(p_f: int, t: float) -> float:
    """Upper bound on P[mu_f >= mu + t] for a Gaussian sketch with p_f rows.

    Equals ``2 exp(-p_f t^2 / (C1 + C2 t))``; tends to 2 as t -> 0.
    """
    if p_f < 1:
        raise DomainError("p_f must be >= 1")
    if t <= 0:
        raise DomainError("t must be > 0")
    return 2.0 * math.exp(-p_f * t * t / (C1 + C2 * t))


def zeta(mu: float, k: int, d: int, m: int) -> float:
    if not 0 <= mu <= 1:
        raise DomainError(f"mu must lie in [0, 1], got {mu}")
    _check_positive(k=k, d=d, m=m)
    return max(mu * k / math.sqrt(d), math.sqrt(k / m))


def projected_variance(A, i: int, second_moments) -> float:
    """R_i^2 = 1 + sum_{j != i} <a_i, a_j>^2 E[X_j^2 | X_i != 0].

    ``second_moments`` is a scalar or a length-m sequence of conditional
    second moments. For +-1 coefficients on uniformly drawn k-supports the
    value is (k - 1)/(m - 1) for every j.
    """
    import numpy as np

    A = np.asarray(A, dtype=float)
    g = A.T @ A[:, i]
    s = np.broadcast_to(np.asarray(second_moments, dtype=float), g.shape)
    mask = np.arange(A.shape[1]) != i
    return float(1.0 + np.sum(g[mask] ** 2 * s[mask]))


def eigengap_lower_bound(R2: float, zeta_value: float) -> float:
    """gamma_1 >= R^2 - (3 R^2 zeta / (R^2 - zeta^2))^2 (may be negative)."""
    if zeta_value < 0:
        raise DomainError("zeta must be >= 0")
    if R2 <= zeta_value**2:
        raise DomainError(f"need R2 > zeta^2, got R2={R2}, zeta={zeta_value}")
    return R2 - (3 * R2 * zeta_value / (R2 - zeta_value**2)) ** 2


def _log_term(d, delta):
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return math.log(d / delta)


def subspace_error_bound(eta, ell, p, d, delta, gamma_k) -> float:
    """Spectral-norm bound on the top-k projector error from compressive data."""
    _check_positive(eta=eta, ell=ell, p=p, d=d, gamma_k=gamma_k)
    L = _log_term(d, delta)
    first = math.sqrt(88 * eta**2 * L / (ell * p))
    second = (8 / 3) * eta * d**2 * L / (p**2 * ell)
    return (first + second) / gamma_k


def subspace_sample_requirement(eta, p, d, delta, gamma_k, eps) -> float:
    """Samples per cluster sufficient for projector error <= eps."""
    _check_positive(eta=eta, p=p, d=d, gamma_k=gamma_k, eps=eps)
    L = _log_term(d, delta)
    return max(
        352 * eta**2 * L / (p * gamma_k**2 * eps**2),
        (16 / 3) * eta * d**2 * L / (gamma_k * eps * p**2),
    )


def eigenvector_error_bound(eta, ell, p, d, delta, gamma_1) -> float:
    """Bound on the principal-eigenvector error: twice the projector bound."""
    return 2.0 * subspace_error_bound(eta, ell, p, d, delta, gamma_1)


def arora_sample_expression(m: int, k: int, moments: int, eps: float) -> float:
    """(m/k)^(l-1) log m + m k^2 log m log(1/eps), constants omitted.

    Informational only: the underlying result is an Omega(.) statement.
    """
    _check_positive(m=m, k=k, moments=moments, eps=eps)
    return (m / k) ** (moments - 1) * math.log(m) + m * k**2 * math.log(m) * math.log(1 / eps)


# -- reports -----------------------------------------------------------------


@dataclass
class BoundInputs:
    d: int | None = None
    m: int | None = None
    k: int | None = None
    p: int | None = None
    p_f: int | None = None
    p_v: int | None = None
    beta: float | None = None
    delta: float | None = None
    t: float | None = None
    ell: int | None = None
    r: int | None = None
    mu: float | None = None
    eta: float | None = None
    gamma_k: float | None = None

    def __post_init__(self):
        for name in ("d", "m", "k", "p", "p_f", "p_v", "ell", "r"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise DomainError(f"{name} must be positive, got {v}")
        for name in ("beta", "delta"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")


@dataclass
class BoundReport:
    name: str
    value: Fraction | float
    integer: int | None = None
    inputs: dict = field(default_factory=dict)
    vacuous: bool = False

    @property
    def value_rational(self) -> str:
        if isinstance(self.value, Fraction):
            return f"{self.value.numerator}/{self.value.denominator}"
        return repr(self.value)


def bounds_table(inputs: BoundInputs) -> list[BoundReport]:
    """Evaluate every bound whose inputs are present and whose domain holds."""
    b = inputs
    out: list[BoundReport] = []

    def attempt(fn):
        try:
            rep = fn()
        except (DomainError, TypeError):
            return
        out.append(rep)

    def gauss():
        q = ell_bound_gaussian_exact(b.d, b.m, b.k, b.p)
        return BoundReport("ell_bound_gaussian", q, ceil_fraction(q),
                           dict(d=b.d, m=b.m, k=b.k, p=b.p))

    def gauss_n():
        q = n_bound_gaussian_exact(b.d, b.m, b.k, b.p, b.beta)
        return BoundReport("n_bound_gaussian", q, ceil_fraction(q),
                           dict(d=b.d, m=b.m, k=b.k, p=b.p, beta=b.beta))

    def hybrid():
        q = ell_bound_hybrid_exact(b.d, b.k, b.p)
        return BoundReport("ell_bound_hybrid", q, ceil_fraction(q), dict(d=b.d, k=b.k, p=b.p))

    def gamma():
        q = ell_bound_hybrid_exact(b.d, b.k, b.p)
        return BoundReport("gamma_threshold", q, ceil_fraction(q), dict(d=b.d, k=b.k, p=b.p))

    def lowrank():
        r = b.r if b.r is not None else b.k
        lb = lowrank_measurement_bound(b.d, b.ell, r)
        return BoundReport("lowrank_measurement_bound", Fraction(lb.total, b.ell), lb.per_column,
                           dict(d=b.d, ell=b.ell, r=r, total=lb.total))

    def pigeon():
        q = Fraction(b.ell, binom(b.m, b.k))
        return BoundReport("pigeonhole_overlap", q, ceil_fraction(q), dict(ell=b.ell, m=b.m, k=b.k))

    def tail():
        v = coherence_tail(b.p_f, b.t)
        return BoundReport("coherence_tail", v, None, dict(p_f=b.p_f, t=b.t), vacuous=v >= 1)

    def zeta_rep():
        return BoundReport("zeta", zeta(b.mu, b.k, b.d, b.m), None,
                           dict(mu=b.mu, k=b.k, d=b.d, m=b.m))

    def subspace():
        v = subspace_error_bound(b.eta, b.ell, b.p, b.d, b.delta, b.gamma_k)
        return BoundReport("subspace_error_bound", v, None,
                           dict(eta=b.eta, ell=b.ell, p=b.p, d=b.d, delta=b.delta,
                                gamma_k=b.gamma_k))

    for fn in (gauss, gauss_n, hybrid, gamma, lowrank, pigeon, tail, zeta_rep, subspace):
        attempt(fn)
    return out
