import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from blindcs.bounds import (C1, C2, BoundInputs, binom, bounds_table, ceil_fraction, coherence_tail,
                            eigengap_lower_bound, eigenvector_error_bound, ell_bound_gaussian,
                            ell_bound_gaussian_exact, ell_bound_hybrid, ell_bound_hybrid_exact,
                            gamma_threshold, lowrank_measurement_bound, manifold_dim, n_bound_gaussian,
                            n_bound_gaussian_exact, n_bound_hybrid, pigeonhole_overlap,
                            projected_variance, subspace_error_bound, subspace_sample_requirement, zeta)
from blindcs.errors import DomainError
from oracles import bounds_oracle as oracle
from oracles import subspace_oracle


# ---- worked values, each also produced by the brute-force oracle

@pytest.mark.parametrize("args, expected", [((16, 6, 2, 8), 184), ((4, 5, 1, 4), 13)])
def test_ell_bound_gaussian_values(args, expected):
    assert ell_bound_gaussian(*args) == expected == oracle.ell_gaussian(*args)


def test_ell_bound_gaussian_rational():
    assert ell_bound_gaussian_exact(16, 6, 2, 8) == Fraction(49, 4) * 15


@pytest.mark.parametrize("beta, num, den, expected", [(0.5, 1, 2, 5513), (0.1, 1, 10, 27563)])
def test_n_bound_gaussian_values(beta, num, den, expected):
    assert n_bound_gaussian(16, 6, 2, 8, beta) == expected
    assert oracle.n_gaussian(16, 6, 2, 8, num, den) == expected


def test_n_bound_gaussian_beta_to_one_matches_ell_times_supports():
    beta = Fraction(999999, 10**6)
    q = n_bound_gaussian_exact(16, 6, 2, 8, beta)
    assert q * beta == ell_bound_gaussian_exact(16, 6, 2, 8) * binom(6, 2)
    assert n_bound_gaussian(16, 6, 2, 8, 0.999999) - 184 * 15 <= 15


@pytest.mark.parametrize("p, expected", [(12, 10), (9, 25)])
def test_ell_bound_hybrid_values(p, expected):
    assert ell_bound_hybrid(16, 2, p) == expected == oracle.ell_hybrid(16, 2, p)


def test_lowrank_bound_value():
    lb = lowrank_measurement_bound(16, 10, 2)
    assert lb.per_column == 9 == oracle.lowrank_per_column(16, 10, 2)
    assert lb.total == 89


def test_lowrank_bound_single_column():
    d, k = 16, 2
    assert lowrank_measurement_bound(d, 1, k).total == 2 * k * (d + 1 - 2 * k) + 1


def test_manifold_dim():
    assert manifold_dim(16, 10, 2) == 48


def test_preconditions():
    with pytest.raises(DomainError):
        ell_bound_gaussian(16, 6, 2, 4)  # p = 2k
    with pytest.raises(DomainError):
        ell_bound_hybrid(16, 2, 7)  # p = 3k + 1
    with pytest.raises(DomainError):
        coherence_tail(10, 0.0)


def test_pigeonhole():
    assert pigeonhole_overlap(184, 6, 2) == 13 >= ceil_fraction(Fraction(49, 4))
    assert pigeonhole_overlap(1, 6, 2) == 1
    assert pigeonhole_overlap(15, 6, 2) == 1


# ---- concentration and spectral helpers

def test_constants():
    assert C1 == pytest.approx(5.0088, abs=1e-4)
    assert C2 == pytest.approx(7.6885, abs=1e-4)


def test_coherence_tail_value():
    assert coherence_tail(100, 0.5) == pytest.approx(0.1187, abs=1e-4)
    assert coherence_tail(100, 0.5) == pytest.approx(float(subspace_oracle.coherence_tail(100, 0.5)), rel=1e-14)
    assert coherence_tail(100, 1e-9) == pytest.approx(2.0, abs=1e-9)


def test_zeta_values():
    assert zeta(0.2, 2, 100, 50) == pytest.approx(0.2)
    assert zeta(0.0, 3, 10, 12) == pytest.approx(math.sqrt(3 / 12))
    assert zeta(1.0, 2, 4, 10**9) == pytest.approx(1.0)


def test_eigengap_values():
    assert eigengap_lower_bound(1.0, 0.1) == pytest.approx(1 - (0.3 / 0.99) ** 2)
    assert eigengap_lower_bound(0.7, 0.0) == pytest.approx(0.7)
    assert eigengap_lower_bound(1.0, 0.5) == pytest.approx(-3.0)
    with pytest.raises(DomainError):
        eigengap_lower_bound(0.01, 0.5)


def test_subspace_bound_against_mpmath_oracle():
    ours = subspace_error_bound(1, 10**4, 8, 16, 0.1, 0.9)
    ref = subspace_oracle.subspace_error_bound(1, 10**4, 8, 16, "0.1", "0.9")
    assert ours == pytest.approx(float(ref), rel=1e-13)


def test_subspace_bound_monotone():
    vals = [subspace_error_bound(1, ell, 8, 16, 0.1, 0.9) for ell in (10, 100, 1000, 10**4, 10**5)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert subspace_error_bound(1, 1000, 16, 16, 0.1, 0.9) < subspace_error_bound(1, 1000, 8, 16, 0.1, 0.9)


def test_sample_requirement_achieves_eps():
    eps = 0.05
    ell = subspace_sample_requirement(1, 8, 16, 0.1, 0.9, eps)
    assert subspace_error_bound(1, ell, 8, 16, 0.1, 0.9) <= eps + 1e-12


def test_eigenvector_bound_is_twice_projector_bound():
    assert eigenvector_error_bound(1, 500, 8, 16, 0.1, 0.5) == 2 * subspace_error_bound(1, 500, 8, 16, 0.1, 0.5)


def test_projected_variance_orthonormal():
    import numpy as np
    assert projected_variance(np.eye(5), 0, 0.25) == pytest.approx(1.0)


# ---- properties

small = st.integers(min_value=1, max_value=4)


@given(k=small, extra_d=st.integers(1, 12), m_extra=st.integers(0, 3), extra_p=st.integers(1, 8))
def test_gaussian_bounds_are_ceilings_of_exact_rationals(k, extra_d, m_extra, extra_p):
    d, m = 2 * k + extra_d, k + m_extra
    p = 2 * k + extra_p
    q = ell_bound_gaussian_exact(d, m, k, p)
    assert isinstance(q, Fraction)
    assert ell_bound_gaussian(d, m, k, p) == math.ceil(q) == oracle.ell_gaussian(d, m, k, p)


@given(k=small, extra_d=st.integers(1, 12), extra_p=st.integers(1, 10))
def test_hybrid_bound_matches_oracle_and_gamma(k, extra_d, extra_p):
    d, p = 2 * k + extra_d, 3 * k + 1 + extra_p
    assert isinstance(ell_bound_hybrid_exact(d, k, p), Fraction)
    assert ell_bound_hybrid(d, k, p) == oracle.ell_hybrid(d, k, p) == gamma_threshold(d, k, p)


@given(k=small, extra_d=st.integers(1, 12), m_extra=st.integers(0, 3), extra_p=st.integers(1, 10),
       spare=st.integers(0, 4))
def test_hybrid_never_needs_more_than_gaussian_per_support(k, extra_d, m_extra, extra_p, spare):
    # the hybrid scheme spends k + 1 rows on the fixed part; with the same
    # varying budget the per-support requirements coincide, and spending fewer
    # rows on the Gaussian side can only raise the Gaussian requirement
    d, m = 2 * k + extra_d, k + m_extra
    p = 3 * k + 1 + extra_p + spare
    p_gauss = p - k - 1 - spare
    hybrid = ell_bound_hybrid_exact(d, k, p)
    gauss = ell_bound_gaussian_exact(d, m, k, p_gauss) / binom(m, k)
    assert hybrid <= gauss
    assert (hybrid == gauss) == (spare == 0)


@given(d=st.integers(2, 40), ell=st.integers(1, 30), r=st.integers(1, 3))
def test_lowrank_bound_against_oracle(d, ell, r):
    if 2 * r > d:
        return
    assert lowrank_measurement_bound(d, ell, r).per_column == oracle.lowrank_per_column(d, ell, r)


@given(p_f=st.integers(1, 500), t=st.floats(1e-3, 5.0))
def test_coherence_tail_range_and_monotone(p_f, t):
    v = coherence_tail(p_f, t)
    assert 0 < v <= 2
    assert coherence_tail(p_f + 1, t) <= v
    assert coherence_tail(p_f, t * 1.1) <= v


def test_n_bound_hybrid_defined():
    assert n_bound_hybrid(16, 6, 2, 12, 0.5) >= ell_bound_hybrid(16, 2, 12) * binom(6, 2)


def test_bounds_table_rows():
    reps = bounds_table(BoundInputs(d=16, m=6, k=2, p=8, beta=0.5))
    got = {r.name: r.integer for r in reps}
    assert got["ell_bound_gaussian"] == 184
    assert got["n_bound_gaussian"] == 5513
