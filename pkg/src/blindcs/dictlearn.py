"""Dictionary learning by overlapping clustering and spectral atom estimates.

Pipeline
--------
1. Connection graph: an edge joins samples whose inner product is at least
   ``threshold`` in absolute value (on the fixed-part sketches ``F y_j`` in
   compressive mode).
2. Overlapping clusters: each seed edge ``(u, v)`` proposes the common
   neighbourhood ``N(u) & N(v) | {u, v}``; near-duplicate candidates
   (Jaccard >= 0.8) are merged.
3. Per-cluster spectral estimate: the principal eigenvector of the cluster's
   empirical covariance (of the projected samples ``Phi^+ Phi y_j`` in
   compressive mode).
4. Refinement: alternate k-sparse coding with OMP and a least-squares
   dictionary update.

A raw common-neighbourhood candidate mixes samples of several atoms, since
``N(u) & N(v)`` contains every sample sharing *any* atom with both ``u`` and
``v``. Candidates are therefore purified: the cluster is re-estimated as the
samples whose correlation with the current principal direction exceeds
``purify_tau``, until it stabilises. See ``ClusterOptions``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateError, DimensionError
from .measurement import HybridEnsemble, project_all, projectors
from .rng import make_rng
from .sparse import EXACT_RES, exhaustive_search, omp_batch

__all__ = [
    "ConnectionGraph",
    "ClusterSet",
    "ClusterOptions",
    "SpectralEstimate",
    "DictionaryEstimate",
    "RefineOptions",
    "build_connection_graph",
    "build_connection_graph_compressive",
    "overlapping_cluster",
    "purifier",
    "estimate_atom",
    "estimate_dictionary",
    "refine_dictionary",
    "CompressiveData",
]


@dataclass
class ConnectionGraph:
    """Undirected graph on samples; ``adjacency`` is an (n, n) boolean matrix."""

    adjacency: np.ndarray
    threshold: float
    normalized: bool

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edges(self) -> np.ndarray:
        """(n_edges, 2) array of pairs i < j."""
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return np.column_stack([i, j])


def _unit_columns(M):
    nrm = np.linalg.norm(M, axis=0)
    if np.any(nrm == 0):
        raise DegenerateError(f"{int(np.sum(nrm == 0))} zero-norm column(s) cannot be normalised")
    return M / nrm


def build_connection_graph(samples, threshold: float = 0.5, normalize: bool = True,
                           block: int = 2048) -> ConnectionGraph:
    """Edge (i, j) iff ``|<y_i, y_j>| >= threshold``, i != j.

    The Gram matrix is formed in row blocks.
    """
    Y = np.asarray(samples, dtype=float)
    if Y.ndim != 2 or Y.shape[1] == 0:
        raise DimensionError("samples must be a non-empty 2-D array (columns are samples)")
    if normalize:
        Y = _unit_columns(Y)
    n = Y.shape[1]
    adj = np.zeros((n, n), dtype=bool)
    for s in range(0, n, block):
        adj[s:s + block] = np.abs(Y[:, s:s + block].T @ Y) >= threshold
    np.fill_diagonal(adj, False)
    adj |= adj.T  # guards against asymmetric rounding at the threshold
    return ConnectionGraph(adj, float(threshold), bool(normalize))


def build_connection_graph_compressive(F, FY, threshold: float = 0.5, normalize: bool = True) -> ConnectionGraph:
    """The same rule applied to the fixed-part sketches ``F y_j``."""
    F = np.asarray(F, dtype=float)
    FY = np.asarray(FY, dtype=float)
    if FY.shape[0] != F.shape[0]:
        raise DimensionError(f"sketch has {FY.shape[0]} rows, F has {F.shape[0]}")
    return build_connection_graph(FY, threshold, normalize)


@dataclass
class ClusterSet:
    clusters: list[np.ndarray]
    shortfall: bool = False
    tries: int = 0

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters]


@dataclass
class ClusterOptions:
    """Clustering knobs.

    ``min_common`` is the minimum candidate size (default k + 1 when built by
    ``estimate_dictionary``). Seeding visits samples in random order and
    proposes ``seeds_per_node`` edges from samples covered fewer than
    ``coverage`` times; it stops once ``m`` clusters exist and a
    ``coverage_frac`` share of samples is covered, or after ``max_tries``.
    Without a refine step, a node adjacent to at least ``complete_frac`` of a
    candidate joins it, so a single missing edge does not split a community.
    """

    min_common: int = 3
    jaccard_merge: float = 0.8
    min_cluster: int = 3
    seeds_per_node: int = 2
    coverage: int = 1
    coverage_frac: float = 0.99
    max_tries: int | None = None
    purify_tau: float = 0.7
    purify_iters: int = 30
    dedupe_cos: float = 0.9
    complete_frac: float = 0.8


def overlapping_cluster(graph: ConnectionGraph, m: int | None = None, opts: ClusterOptions | None = None,
                        refine: Callable[[np.ndarray], np.ndarray] | None = None,
                        seed: int = 0) -> ClusterSet:
    """Edge-seeded common-neighbourhood clustering with Jaccard merging.

    Without ``refine``, merging takes the union of candidates whose Jaccard
    similarity reaches ``jaccard_merge``, and the m largest clusters are
    returned. With ``refine`` (e.g. ``purifier``), each candidate is refined
    first, and a refined candidate close to an existing cluster is absorbed by
    it; all clusters are returned for downstream selection.
    """
    opts = opts or ClusterOptions()
    n = graph.n
    if n == 0:
        raise DimensionError("empty graph")
    adj = graph.adjacency
    rng = make_rng(seed, "clusters")
    members: list[np.ndarray] = []  # boolean masks
    cover = np.zeros(n, dtype=np.int64)
    tries = 0
    budget = opts.max_tries if opts.max_tries is not None else np.inf
    for u in rng.permutation(n):
        if cover[u] >= opts.coverage:
            continue
        nb = np.flatnonzero(adj[u])
        rng.shuffle(nb)
        for v in nb[: opts.seeds_per_node]:
            if any(M[u] and M[v] for M in members):
                continue
            tries += 1
            C = np.flatnonzero(adj[u] & adj[v])
            C = np.union1d(C, [u, v])
            if len(C) < opts.min_common:
                continue
            if refine is not None:
                C = refine(C)
                if len(C) < opts.min_cluster:
                    continue
            else:
                C = np.flatnonzero(adj[:, C].sum(axis=1) >= opts.complete_frac * len(C) - 1e-9)
                C = np.union1d(C, [u, v])
            b = np.zeros(n, dtype=bool)
            b[C] = True
            merged = False
            for i, M in enumerate(members):
                inter = np.count_nonzero(M & b)
                if inter >= opts.jaccard_merge * np.count_nonzero(M | b):
                    if refine is None:
                        cover[b & ~M] += 1
                        members[i] = M | b
                    merged = True
                    break
            if not merged:
                members.append(b)
                cover[C] += 1
        if m is not None and len(members) >= m and np.mean(cover >= opts.coverage) >= opts.coverage_frac:
            break
        if tries >= budget:
            break
    clusters = [np.flatnonzero(M) for M in members]
    clusters = [c for c in clusters if len(c) >= opts.min_cluster]
    shortfall = m is not None and len(clusters) < m
    if refine is None and m is not None:
        order = sorted(range(len(clusters)), key=lambda i: (-len(clusters[i]), clusters[i][0]))
        clusters = [clusters[i] for i in order[:m]]
    return ClusterSet(clusters, shortfall, tries)


@dataclass
class SpectralEstimate:
    covariance: np.ndarray
    vector: np.ndarray
    eigengap: float
    source: str = "complete"


def _canonical_sign(v):
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def estimate_atom(cluster_columns, source: str = "complete") -> SpectralEstimate:
    """Principal eigenvector of ``(1/|C|) sum_j y_j y_j^T``.

    The sign is fixed so that the largest-magnitude entry is positive.
    ``source`` only labels the estimate ("complete" or "projected").
    """
    Yc = np.asarray(cluster_columns, dtype=float)
    if Yc.ndim != 2 or Yc.shape[1] < 1:
        raise DimensionError("cluster must be a d x |C| array with |C| >= 1")
    if not np.any(Yc):
        raise DegenerateError("all-zero cluster")
    cov = Yc @ Yc.T / Yc.shape[1]
    cov = (cov + cov.T) / 2
    w, V = np.linalg.eigh(cov)
    gap = w[-1] - (w[-2] if len(w) > 1 else 0.0)
    return SpectralEstimate(cov, _canonical_sign(V[:, -1]), float(gap), source)


@dataclass
class CompressiveData:
    """What the compressive pipeline sees.

    ``sketch`` is ``F Y`` (p_f x n), ``projected`` the columns
    ``P_j y_j`` with ``P_j`` the orthogonal projector onto the row space of
    ``V_j``, and ``bases`` the orthonormal bases ``Q_j`` (n, d, p_v).
    """

    F: np.ndarray
    sketch: np.ndarray
    projected: np.ndarray
    bases: np.ndarray

    @classmethod
    def from_record(cls, ensemble: HybridEnsemble, record) -> "CompressiveData":
        if not isinstance(ensemble, HybridEnsemble):
            raise TypeError("compressive mode needs a hybrid ensemble")
        return cls(ensemble.fixed, record.fixed_sketch,
                   project_all(ensemble, record, part="varying"),
                   projectors(ensemble, part="varying"))

    def correlation(self, a) -> np.ndarray:
        """Unbiased per-sample estimate of ``<a, y_j>`` from ``P_j y_j``.

        ``<a, P_j y_j> / ||P_j a||^2`` recovers the coefficient of ``a`` when
        ``y_j`` contains it and is small otherwise.
        """
        c = np.einsum("ndp,d->np", self.bases, a)
        return np.einsum("dn,d->n", self.projected, a) / np.maximum(np.einsum("np,np->n", c, c), 1e-300)


def purifier(samples, tau: float = 0.7, iters: int = 30, min_size: int = 3,
             correlation: Callable[[np.ndarray], np.ndarray] | None = None):
    """Return a function that refines a candidate cluster.

    The refined cluster is ``{j : |corr_j(a)| >= tau}`` where ``a`` is the
    principal direction of the current cluster; iterated to a fixed point.
    ``correlation`` defaults to ``a @ samples``.
    """
    Y = np.asarray(samples, dtype=float)
    corr = correlation if correlation is not None else (lambda a: a @ Y)

    def refine(C):
        for _ in range(iters):
            a = estimate_atom(Y[:, C]).vector
            newC = np.flatnonzero(np.abs(corr(a)) >= tau)
            if len(newC) < min_size or np.array_equal(newC, C):
                return newC
            C = newC
        return C

    return refine


@dataclass
class DictionaryEstimate:
    atoms: np.ndarray  # d x m, unit columns
    provenance: list[tuple[int, float]] = field(default_factory=list)  # (cluster id, eigengap)
    iterations: int = 0
    shortfall: bool = False
    residual_history: list[float] = field(default_factory=list)
    clusters: ClusterSet | None = None
    graph_edges: int = 0


def _select(estimates, m, dedupe_cos):
    order = []
    for i in np.argsort([-e.eigengap for e in estimates], kind="stable"):
        if all(abs(estimates[i].vector @ estimates[j].vector) < dedupe_cos for j in order):
            order.append(int(i))
        if len(order) == m:
            break
    return order


def estimate_dictionary(data, m: int, k: int, mode: str = "complete", ensemble=None, record=None,
                        threshold: float = 0.5, normalize: bool = True,
                        opts: ClusterOptions | None = None, selection: str = "eigengap",
                        seed: int = 0) -> DictionaryEstimate:
    """Spectral dictionary estimate from complete data or hybrid measurements.

    ``data`` is the d x n sample matrix in complete mode and is ignored in
    compressive mode, where ``ensemble`` and ``record`` supply ``F Y`` and the
    varying-part measurements. ``selection="eigengap"`` keeps the m clusters
    with the largest observed eigengaps whose directions are distinct;
    ``"largest"`` keeps the m largest clusters. Missing atoms (shortfall) are
    filled with random unit vectors and flagged.
    """
    if opts is None:
        opts = ClusterOptions(min_common=k + 1, min_cluster=k + 1, coverage=k)
    if mode == "complete":
        Y = np.asarray(data, dtype=float)
        graph = build_connection_graph(Y, threshold, normalize)
        source = "complete"
        corr = None
    elif mode == "compressive":
        cd = data if isinstance(data, CompressiveData) else CompressiveData.from_record(ensemble, record)
        graph = build_connection_graph_compressive(cd.F, cd.sketch, threshold, normalize)
        Y = cd.projected
        source = "projected"
        corr = cd.correlation
    else:
        raise ValueError(f"unknown mode {mode!r}")
    d = Y.shape[0]
    if m == 1 and k == 1:
        est = estimate_atom(Y, source)
        return DictionaryEstimate(est.vector[:, None], [(0, est.eigengap)], graph_edges=graph.n_edges)
    refine = purifier(Y, opts.purify_tau, opts.purify_iters, opts.min_cluster, corr)
    cs = overlapping_cluster(graph, m, opts, refine=refine, seed=seed)
    estimates = [estimate_atom(Y[:, c], source) for c in cs.clusters]
    if selection == "eigengap":
        chosen = _select(estimates, m, opts.dedupe_cos)
    elif selection == "largest":
        chosen = sorted(range(len(estimates)), key=lambda i: -len(cs.clusters[i]))[:m]
    else:
        raise ValueError(f"unknown selection {selection!r}")
    atoms = np.zeros((d, m))
    prov = []
    for slot, i in enumerate(chosen):
        atoms[:, slot] = estimates[i].vector
        prov.append((i, estimates[i].eigengap))
    shortfall = len(chosen) < m
    if shortfall:
        fill = make_rng(seed, "fill").standard_normal((d, m - len(chosen)))
        atoms[:, len(chosen):] = fill / np.linalg.norm(fill, axis=0)
        prov.extend((-1, 0.0) for _ in range(m - len(chosen)))
    return DictionaryEstimate(atoms, prov, 0, shortfall or cs.shortfall, clusters=cs,
                              graph_edges=graph.n_edges)


@dataclass(frozen=True)
class RefineOptions:
    iters: int = 30
    keep_factor: float = 3.0  # keep samples with residual <= max(factor * median, floor)
    keep_floor: float = 0.1
    dead_usage: float = 0.25  # dead if used < dead_usage * expected share
    duplicate_cos: float = 0.95
    reseed_cos: float = 0.8
    tol: float = 1e-12
    cg_iters: int = 200
    exhaustive_budget: int = 5000  # k-subsets per column for the coding fallback


def _mod_update(Y, X, keep):
    A, *_ = np.linalg.lstsq(X[:, keep].T, Y[:, keep].T, rcond=None)
    return A.T


def _cg_update(mats, Z, X, keep, A0, iters):
    """Least squares over A for ``z_j = Phi_j A x_j`` (j in keep), by CG."""
    mats, Z, X = mats[keep], Z[keep], X[:, keep]

    def normal(A):
        w = np.einsum("npd,dn->np", mats, A @ X)
        return np.einsum("npd,np->dn", mats, w) @ X.T

    B = np.einsum("npd,np->dn", mats, Z) @ X.T
    A = A0.copy()
    R = B - normal(A)
    P = R.copy()
    rs = np.sum(R * R)
    b2 = max(np.sum(B * B), 1e-300)
    for _ in range(iters):
        if rs <= 1e-28 * b2:
            break
        AP = normal(P)
        alpha = rs / np.sum(P * AP)
        A += alpha * P
        R -= alpha * AP
        rs_new = np.sum(R * R)
        P = R + (rs_new / rs) * P
        rs = rs_new
    return A


def _reseed(R, n_new, cos, rng, d):
    """Directions shared by many residual vectors, found greedily."""
    out = []
    Rn = R / np.maximum(np.linalg.norm(R, axis=0), 1e-300)
    for _ in range(n_new):
        if Rn.shape[1] < 2:
            v = rng.standard_normal(d)
            out.append(v / np.linalg.norm(v))
            continue
        G = np.abs(Rn.T @ Rn)
        a = Rn[:, int((G >= cos).sum(axis=0).argmax())]
        for _ in range(10):
            sel = np.abs(a @ Rn) >= cos
            _, V = np.linalg.eigh(Rn[:, sel] @ Rn[:, sel].T)
            a = V[:, -1]
        out.append(a)
        Rn = Rn[:, np.abs(a @ Rn) < cos]
    return out


def _fallback(dict_of, Zt, X, res, k, budget):
    """Exhaustive k-subset search for columns OMP left with a residual."""
    m = X.shape[0]
    if math.comb(m, k) > budget:
        return X, res
    for j in np.flatnonzero(res > EXACT_RES * np.linalg.norm(Zt, axis=0)):
        S, x, r = exhaustive_search(dict_of(j), Zt[:, j], k, budget)
        if r < res[j]:
            X[:, j] = 0.0
            X[list(S), j] = x
            res[j] = r
    return X, res


def refine_dictionary(estimate, data, k: int, opts: RefineOptions | None = None, ensemble=None,
                      record=None, seed: int = 0) -> DictionaryEstimate:
    """Alternate OMP coding and a least-squares dictionary update.

    Complete mode (``ensemble is None``): ``data`` is Y and the update is
    ``argmin_A ||Y_K - A X_K||`` over the well-fit samples K. Compressive mode:
    coding uses ``Phi_j A`` and the update solves the measurement-space least
    squares by conjugate gradients.

    Atoms used too rarely or duplicating another atom are replaced by
    directions shared by the badly fit residuals. An iteration is accepted
    only if the total residual does not increase; when neither the full
    update nor the plain update (no replacement) is accepted, refinement
    stops and returns the current state.
    """
    opts = opts or RefineOptions()
    A = np.array(getattr(estimate, "atoms", estimate), dtype=float)
    A /= np.linalg.norm(A, axis=0)
    d, m = A.shape
    rng = make_rng(seed, "refine")
    compressive = ensemble is not None
    if compressive:
        mats = ensemble.mats
        Z = record.observations
        norms = np.linalg.norm(Z, axis=1)

        def code(A):
            D = mats @ A
            X, R, _ = omp_batch(D, Z.T, k)
            return _fallback(lambda j: D[j], Z.T, X, np.linalg.norm(R, axis=0), k, opts.exhaustive_budget)

        def update(A, X, keep):
            return _cg_update(mats, Z, X, keep, A, opts.cg_iters)

        def residual_dirs(A_rest, cols):
            _, R, _ = omp_batch(mats[cols] @ A_rest, Z[cols].T, max(k - 1, 1))
            Q = projectors(ensemble)[cols]
            # back-project measurement residuals through each Phi_j
            Rin = np.linalg.solve(np.swapaxes(mats[cols] @ Q, 1, 2), R.T[..., None])[..., 0]
            return np.einsum("ndp,np->dn", Q, Rin)
    else:
        Y = np.asarray(data, dtype=float)
        norms = np.linalg.norm(Y, axis=0)

        def code(A):
            X, R, _ = omp_batch(A, Y, k)
            return _fallback(lambda j: A, Y, X, np.linalg.norm(R, axis=0), k, opts.exhaustive_budget)

        def update(A, X, keep):
            return _mod_update(Y, X, keep)

        def residual_dirs(A_rest, cols):
            _, R, _ = omp_batch(A_rest, Y[:, cols], max(k - 1, 1))
            return R

    safe = np.where(norms > 0, norms, 1.0)
    X, res = code(A)
    total = float(np.sqrt(np.sum(res ** 2)))
    history = [total]
    it_done = 0
    for it in range(opts.iters):
        if total <= opts.tol * max(float(np.linalg.norm(norms)), 1e-300):
            break
        rel = res / safe
        keep = rel <= max(opts.keep_factor * np.median(rel), opts.keep_floor)
        if not keep.any():
            keep = np.ones_like(keep)
        Anew = update(A, X, keep)
        nrm = np.linalg.norm(Anew, axis=0)
        An = Anew / np.where(nrm > 0, nrm, 1.0)
        used = np.count_nonzero(X[:, keep], axis=1)
        bad = set(np.flatnonzero((used < opts.dead_usage * keep.sum() * k / m) | (nrm < 1e-8)).tolist())
        G = np.abs(An.T @ An)
        np.fill_diagonal(G, 0)
        _, jj = np.nonzero(np.triu(G > opts.duplicate_cos))
        bad |= set(jj.tolist())
        H = np.flatnonzero(~keep)
        candidates = [An]
        if bad and len(H) > k:
            Ar = An.copy()
            dirs = _reseed(residual_dirs(np.delete(An, sorted(bad), axis=1), H), len(bad), opts.reseed_cos, rng, d)
            for b, a in zip(sorted(bad), dirs):
                Ar[:, b] = a
            candidates = [Ar, An]
        accepted = False
        for cand in candidates:
            Xc, rc = code(cand)
            tc = float(np.sqrt(np.sum(rc ** 2)))
            if tc <= total * (1 + 1e-12) or (cand is An and len(candidates) == 1 and tc <= total):
                A, X, res, total = cand, Xc, rc, tc
                accepted = True
                break
        if not accepted:
            break
        history.append(total)
        it_done = it + 1
    prov = list(getattr(estimate, "provenance", []))
    return DictionaryEstimate(A, prov, it_done, getattr(estimate, "shortfall", False), history,
                              getattr(estimate, "clusters", None), getattr(estimate, "graph_edges", 0))
