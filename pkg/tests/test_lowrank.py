import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindcs.errors import PreconditionError
from blindcs.grouping import numerical_rank
from blindcs.lowrank import (GroupRecoveryProblem, RecoveryOptions, atoms_from_spans, group_span,
                             pairing_trial, random_low_rank, recover_group, uniqueness_pairing_test,
                             verify_nullspace_disjointness)
from blindcs.rng import make_rng


def _problem(d, ell, k, p, seed):
    rng = make_rng(seed, "test")
    Y = random_low_rank(d, ell, k, rng)
    mats = rng.standard_normal((ell, p, d)) / np.sqrt(d)
    return Y, GroupRecoveryProblem(np.arange(ell), mats, np.einsum("npd,dn->np", mats, Y), k)


def test_full_measurements_exact():
    Y, prob = _problem(8, 6, 2, 8, 0)
    out = recover_group(prob, seed=1)
    assert out.converged and out.residual <= 1e-10 and out.restarts_used == 1
    assert np.linalg.norm(out.recovered - Y) <= 1e-8 * np.linalg.norm(Y)


def test_too_few_measurements_rejected():
    _, prob = _problem(8, 6, 3, 2, 0)
    with pytest.raises(PreconditionError):
        recover_group(prob)


def test_at_bound_recovers_most():
    hits = sum(pairing_trial(16, 10, 2, 9, make_rng(3, t)).success for t in range(20))
    assert hits >= 18


def test_below_bound_fails_more_often():
    low = sum(pairing_trial(16, 10, 2, 4, make_rng(4, t)).success for t in range(20))
    high = sum(pairing_trial(16, 10, 2, 9, make_rng(4, t)).success for t in range(20))
    assert low < high


def test_pairing_full_rank_measurements():
    assert uniqueness_pairing_test(8, 5, 1, 8, 10, 0).frequency == 1.0


def test_nullspace_disjointness_at_bound():
    assert verify_nullspace_disjointness(6, 4, 1, 17, 1000, 0) == 0


def test_single_functional_rarely_annihilates_but_cannot_identify():
    assert verify_nullspace_disjointness(6, 4, 1, 1, 200, 0) == 0
    # but one measurement is nowhere near enough to pin the matrix down
    assert uniqueness_pairing_test(6, 4, 1, 1, 10, 0).frequency == 0.0


@given(st.integers(5, 10), st.integers(3, 8), st.integers(1, 2), st.integers(0, 10**6))
def test_output_rank_and_consistency(d, ell, k, seed):
    p = d  # fully determined, converges
    _, prob = _problem(d, ell, k, p, seed)
    opts = RecoveryOptions(restarts=3)
    out = recover_group(prob, opts, seed=seed)
    assert numerical_rank(out.recovered, 1e-8) <= k
    if out.converged:
        resid = np.einsum("npd,dn->np", prob.mats, out.recovered) - prob.observations
        assert np.linalg.norm(resid, axis=1).max() <= opts.tol


@given(st.integers(0, 10**6), st.sampled_from([0.5, 3.0, 10.0]))
def test_scale_equivariance(seed, c):
    Y, prob = _problem(12, 8, 2, 10, seed)
    scaled = GroupRecoveryProblem(prob.columns, prob.mats, c * prob.observations, prob.k)
    a = recover_group(prob, seed=seed)
    b = recover_group(scaled, seed=seed)
    if a.converged and b.converged:
        assert np.linalg.norm(b.recovered - c * a.recovered) <= 1e-9 * np.linalg.norm(c * a.recovered)


def test_rank_deficient_group_under_low_rank():
    # rank-1 data fitted at k=2 still reaches zero residual
    Y, prob = _problem(10, 6, 1, 10, 2)
    prob2 = GroupRecoveryProblem(prob.columns, prob.mats, prob.observations, 2)
    out = recover_group(prob2, seed=0)
    assert out.converged


def test_atoms_from_spans_triangle(rng):
    A = np.linalg.qr(rng.standard_normal((8, 3)))[0]
    spans = [group_span(A[:, S] @ rng.standard_normal((2, 4)), 2) for S in ([0, 1], [1, 2], [0, 2])]
    atoms, counts = atoms_from_spans(spans, 3)
    assert atoms.shape == (8, 3)
    G = np.abs(A.T @ atoms)
    assert np.allclose(np.sort(G.max(axis=1)), 1, atol=1e-10)


def test_atoms_from_spans_no_intersection(rng):
    U = np.linalg.qr(rng.standard_normal((8, 4)))[0]
    atoms, counts = atoms_from_spans([U[:, :2], U[:, 2:]])
    assert atoms.shape == (8, 0) and len(counts) == 0
