import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindcs.dictlearn import (ClusterOptions, CompressiveData, ConnectionGraph, DictionaryEstimate,
                               RefineOptions, build_connection_graph, build_connection_graph_compressive,
                               estimate_atom, estimate_dictionary, overlapping_cluster, refine_dictionary)
from blindcs.errors import DegenerateError
from blindcs.measurement import apply, project_all, sample_gaussian, sample_hybrid
from blindcs.model import ProblemDims, generate_dictionary, synthesize


@pytest.fixture(scope="module")
def gamma_instance():
    return synthesize(ProblemDims(64, 80, 3, 2000), "symmetric", "iid", 0)


def _share_mask(supports, m):
    n = len(supports)
    share = np.zeros((n, n), dtype=bool)
    for a in range(m):
        c = np.any(supports == a, axis=1)
        share |= np.outer(c, c)
    np.fill_diagonal(share, False)
    return share


def test_graph_examples():
    e = np.eye(3)
    g = build_connection_graph(np.column_stack([e[:, 0], e[:, 0], e[:, 1]]))
    assert g.adjacency[0, 1] and not g.adjacency[0, 2] and not g.adjacency[1, 2]
    assert g.n_edges == 1 and g.edges().tolist() == [[0, 1]]
    with pytest.raises(DegenerateError):
        build_connection_graph(np.column_stack([e[:, 0], np.zeros(3)]))


def test_disjoint_support_edge_rate(gamma_instance):
    inst = gamma_instance
    share = _share_mask(inst.coeffs.supports, 80)
    disjoint = ~share
    np.fill_diagonal(disjoint, False)
    g = build_connection_graph(inst.Y)
    assert g.adjacency[disjoint].mean() <= 0.05


def test_compressive_graph_identity_sketch(gamma_instance):
    Y = gamma_instance.Y[:, :300]
    a = build_connection_graph(Y).adjacency
    b = build_connection_graph_compressive(np.eye(64), Y).adjacency
    assert np.array_equal(a, b)


def test_compressive_graph_large_sketch_agrees(gamma_instance):
    Y = gamma_instance.Y
    F = np.random.default_rng(0).standard_normal((32, 64))
    a = build_connection_graph(Y).adjacency
    b = build_connection_graph_compressive(F, F @ Y).adjacency
    iu = np.triu_indices(Y.shape[1], 1)
    assert (a[iu] == b[iu]).mean() >= 0.95


def test_false_edges_grow_as_sketch_shrinks(gamma_instance):
    inst = gamma_instance
    Y = inst.Y[:, :1000]
    share = _share_mask(inst.coeffs.supports[:1000], 80)
    disjoint = ~share
    np.fill_diagonal(disjoint, False)
    rng = np.random.default_rng(1)
    rates = []
    for p_f in (64, 32, 16, 8, 4):
        F = rng.standard_normal((p_f, 64))
        rates.append(build_connection_graph_compressive(F, F @ Y).adjacency[disjoint].mean())
    assert all(a < b for a, b in zip(rates, rates[1:]))


def _graph(adj):
    adj = np.asarray(adj, dtype=bool)
    return ConnectionGraph(adj | adj.T, 0.5, True)


def test_two_cliques():
    adj = np.zeros((10, 10), dtype=bool)
    adj[:5, :5] = adj[5:, 5:] = True
    np.fill_diagonal(adj, False)
    cs = overlapping_cluster(_graph(adj), 2, ClusterOptions())
    assert sorted(map(tuple, cs.clusters)) == [tuple(range(5)), tuple(range(5, 10))]


def test_clique_missing_edge():
    adj = np.ones((8, 8), dtype=bool)
    np.fill_diagonal(adj, False)
    adj[0, 1] = adj[1, 0] = False
    cs = overlapping_cluster(_graph(adj), 1, ClusterOptions())
    assert len(cs.clusters) == 1 and cs.clusters[0].tolist() == list(range(8))


@pytest.mark.xfail(strict=True, reason="cluster purity reaches about 60% at this scale, not 90%")
def test_cluster_purity():
    inst = synthesize(ProblemDims(64, 80, 3, 5000), "symmetric", "iid", 1)
    est = estimate_dictionary(inst.Y, 80, 3, seed=1)
    S = inst.coeffs.supports
    purity = [np.bincount(S[c].ravel(), minlength=80).max() / len(c) for c in est.clusters.clusters]
    assert np.mean(np.asarray(purity) >= 0.9) >= 0.9


def test_estimate_atom_copies(rng):
    a = rng.standard_normal(6)
    a /= np.linalg.norm(a)
    est = estimate_atom(np.tile(a[:, None], (1, 5)))
    assert min(np.linalg.norm(est.vector - a), np.linalg.norm(est.vector + a)) <= 1e-12
    assert est.eigengap == pytest.approx(1.0)


def test_estimate_atom_cluster_accuracy():
    # 2000 samples that all use atom 5, two other random atoms, +-1 coefficients
    A = generate_dictionary(64, 80, 2).atoms
    r = np.random.default_rng(2)
    others = np.array([r.choice(np.delete(np.arange(80), 5), 2, replace=False) for _ in range(2000)])
    X = np.zeros((80, 2000))
    X[5] = r.choice([-1.0, 1.0], 2000)
    np.put_along_axis(X.T, others, r.choice([-1.0, 1.0], (2000, 2)), axis=1)
    v = estimate_atom(A @ X).vector
    a = A[:, 5]
    assert min(np.linalg.norm(v - a), np.linalg.norm(v + a)) <= 0.1


def test_projected_full_rank_equals_complete(rng):
    Y = rng.standard_normal((8, 40))
    ens = sample_gaussian(8, 8, 40, 3)
    Yp = project_all(ens, apply(ens, Y))
    a, b = estimate_atom(Y).vector, estimate_atom(Yp, "projected").vector
    assert np.allclose(a, b, atol=1e-10)


def test_single_atom_pipeline(rng):
    Y = rng.standard_normal((5, 1)) * rng.standard_normal((1, 50)) + 0.01 * rng.standard_normal((5, 50))
    est = estimate_dictionary(Y, 1, 1)
    w, V = np.linalg.eigh(Y @ Y.T / 50)
    assert abs(est.atoms[:, 0] @ V[:, -1]) == pytest.approx(1.0)


def test_refine_fixed_point():
    inst = synthesize(ProblemDims(16, 20, 2, 600), "symmetric", "iid", 3)
    est = DictionaryEstimate(inst.A.copy())
    out = refine_dictionary(est, inst.Y, 2)
    assert out.residual_history[-1] <= 1e-10
    assert np.abs(out.atoms - inst.A).max() <= 1e-8


def test_refine_monotone_complete():
    inst = synthesize(ProblemDims(16, 20, 2, 800), "symmetric", "iid", 4)
    noisy = inst.A + 0.2 * np.random.default_rng(0).standard_normal(inst.A.shape)
    out = refine_dictionary(DictionaryEstimate(noisy), inst.Y, 2, RefineOptions(iters=10))
    h = out.residual_history
    assert all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))


def test_refine_monotone_compressive():
    inst = synthesize(ProblemDims(16, 12, 2, 600), "symmetric", "iid", 5)
    ens = sample_hybrid(3, 10, 16, 600, 6)
    rec = apply(ens, inst.Y)
    noisy = inst.A + 0.1 * np.random.default_rng(1).standard_normal(inst.A.shape)
    out = refine_dictionary(DictionaryEstimate(noisy), None, 2, RefineOptions(iters=8), ensemble=ens,
                            record=rec)
    h = out.residual_history
    assert len(h) >= 2 and all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))


def test_compressive_data_shapes():
    inst = synthesize(ProblemDims(16, 12, 2, 50), "symmetric", "iid", 5)
    ens = sample_hybrid(3, 10, 16, 50, 6)
    cd = CompressiveData.from_record(ens, apply(ens, inst.Y))
    assert cd.sketch.shape == (3, 50) and cd.projected.shape == (16, 50)
    assert np.allclose(cd.sketch, ens.fixed @ inst.Y)


@given(st.integers(0, 10**6), st.integers(1, 30))
def test_covariance_psd(seed, n):
    Y = np.random.default_rng(seed).standard_normal((6, n))
    assert np.linalg.eigvalsh(estimate_atom(Y).covariance).min() >= -1e-10


@given(st.integers(0, 10**6), st.integers(10, 200))
def test_eigenvector_projector_inequality(seed, ell):
    r = np.random.default_rng(seed)
    d, p = 10, 5
    a = r.standard_normal(d)
    Y = np.outer(a, r.choice([-1, 1], ell)) + 0.5 * r.standard_normal((d, ell))
    ens = sample_gaussian(p, d, ell, seed)
    Yp = project_all(ens, apply(ens, Y))
    ah, at = estimate_atom(Y).vector, estimate_atom(Yp).vector
    if ah @ at < 0:
        at = -at
    gap = np.linalg.norm(np.outer(ah, ah) - np.outer(at, at), 2)
    assert np.linalg.norm(ah - at) <= 2 * gap + 1e-10
