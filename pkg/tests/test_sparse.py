import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindcs.errors import BudgetError, DimensionError
from blindcs.measurement import apply, sample_gaussian, sample_hybrid
from blindcs.model import ProblemDims, generate_dictionary, synthesize
from blindcs.sparse import (FLAG_OVERFIT, check_restricted_injectivity, exhaustive_search, omp,
                            omp_batch, recover_all_coefficients)


def test_omp_identity():
    sol = omp(np.eye(4), np.array([1.0, 0, 0, 0]), 1)
    assert sol.support == (0,) and sol.values[0] == pytest.approx(1.0) and sol.residual == 0


def test_omp_exact_full_measurements(rng):
    A = np.linalg.qr(rng.standard_normal((12, 12)))[0][:, :10]
    x = np.zeros(10)
    x[[2, 7]] = [0.6, -1.1]
    sol = omp(A, A @ x, 2)
    assert sol.support == (2, 7) and np.allclose(sol.values, [0.6, -1.1]) and sol.residual <= 1e-10


def test_omp_compressive_support_recovery():
    A = generate_dictionary(16, 20, 0).atoms
    hits = 0
    for t in range(1000):
        r = np.random.default_rng(t)
        S = np.sort(r.choice(20, 2, replace=False))
        Phi = r.standard_normal((8, 16)) / 4
        sol = omp(Phi @ A, Phi @ A[:, S] @ (1 - r.random(2)), 2)
        hits += sol.support == tuple(S)
    assert hits >= 990


def test_omp_flags_overfit(rng):
    A = rng.standard_normal((10, 6))
    sol = omp(A, A[:, 1] * 2.0, 2)
    assert "exact_before_k" in sol.flags and sol.residual <= 1e-10


def test_omp_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        omp(np.eye(3), np.ones(4), 1)


def test_exhaustive_budget():
    with pytest.raises(BudgetError):
        exhaustive_search(np.eye(40), np.ones(40), 5, budget=1000)


def test_injectivity_examples(rng):
    assert check_restricted_injectivity(np.eye(6), generate_dictionary(6, 9, 0), 4)
    assert not check_restricted_injectivity(rng.standard_normal((3, 8)), generate_dictionary(8, 10, 0), 4)
    ok = 0
    for t in range(1000):
        r = np.random.default_rng(t)
        ok += check_restricted_injectivity(r.standard_normal((5, 10)), r.standard_normal((10, 6)), 4)
    assert ok >= 999


def test_recover_with_true_dictionary():
    good = 0
    for seed in range(50):
        inst = synthesize(ProblemDims(16, 10, 2, 40), "interval", "iid", seed)
        ens = sample_gaussian(7, 16, 40, seed + 99)
        out = recover_all_coefficients(inst.A, ens, apply(ens, inst.Y), 2)
        good += np.linalg.norm(out.X - inst.X) <= 1e-8 * np.linalg.norm(inst.X)
    assert good >= 49


def test_recover_overfit_k_plus_one():
    inst = synthesize(ProblemDims(16, 8, 2, 30), "interval", "iid", 1)
    ens = sample_hybrid(3, 9, 16, 30, 2)
    out = recover_all_coefficients(inst.A, ens, apply(ens, inst.Y), 3)
    assert out.residuals.max() <= 1e-10
    assert np.all(out.flags & FLAG_OVERFIT)
    assert np.linalg.norm(out.Y - inst.Y) <= 1e-8 * np.linalg.norm(inst.Y)


@given(st.integers(0, 10**6))
def test_pd_invariance(seed):
    r = np.random.default_rng(seed)
    inst = synthesize(ProblemDims(12, 7, 2, 20), "interval", "iid", seed)
    ens = sample_hybrid(3, 7, 12, 20, seed + 1)
    rec = apply(ens, inst.Y)
    perm = r.permutation(7)
    D = r.choice([-1, 1], 7) * r.uniform(0.5, 2.0, 7)
    base = recover_all_coefficients(inst.A, ens, rec, 2)
    alt = recover_all_coefficients(inst.A[:, perm] * D, ens, rec, 2)
    assert np.linalg.norm(alt.Y - base.Y) <= 1e-10 * np.linalg.norm(inst.Y)


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_omp_residual_non_increasing(seed, k):
    r = np.random.default_rng(seed)
    D = r.standard_normal((9, 12))
    sol = omp(D, r.standard_normal(9), k, fallback=False)
    h = sol.history
    assert all(b <= a * (1 + 1e-12) + 1e-14 for a, b in zip(h, h[1:]))


@given(st.integers(0, 10**6))
def test_exact_recovery_under_injectivity(seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((10, 7))
    Phi = r.standard_normal((6, 10))
    k = 2
    if not check_restricted_injectivity(Phi, A, 2 * k):
        return
    S = np.sort(r.choice(7, k, replace=False))
    x = np.zeros(7)
    x[S] = r.uniform(0.5, 1.5, k) * r.choice([-1, 1], k)
    sol = omp(Phi @ A, Phi @ A @ x, k)
    if sol.residual <= 1e-10 * np.linalg.norm(Phi @ A @ x):
        assert np.allclose(sol.dense(7), x, atol=1e-8)


def test_batch_matches_single(rng):
    D = rng.standard_normal((8, 10))
    Y = D[:, :3] @ rng.standard_normal((3, 5))
    X, R, flags = omp_batch(D, Y, 3)
    for j in range(5):
        sol = omp(D, Y[:, j], 3, fallback=False)
        assert np.allclose(sol.dense(10), X[:, j], atol=1e-10)
