"""Support grouping from the fixed-part sketch ``F Y``.

With ``p_f >= k + 1`` fixed measurements, a (k+1)-column sketch ``F Y_J``
has rank k exactly when the columns share a support (almost surely). The
grouping procedure tests every (k+1)-subset, then merges dependent subsets
that share at least k columns into groups J(S).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BudgetError, PreconditionError

__all__ = [
    "RankEvidence",
    "RankTestResult",
    "SupportGrouping",
    "numerical_rank",
    "rank_test_fixed",
    "enumerate_dependent_subsets",
    "merge_into_groups",
    "filter_recoverable",
    "group_from_sketch",
    "RANK_TOL",
    "GROUP_TOL",
    "ENUM_BUDGET",
]

RANK_TOL = 1e-8
# Enumeration sweeps ~5e5 random subsets per instance; a tighter cutoff keeps
# coincidental near-singular sketches out while exact ones sit near 1e-15.
GROUP_TOL = 1e-10
ENUM_BUDGET = 10**7
_SCREEN_SLACK = 16.0  # absorbs rounding in the determinant screen


@dataclass
class RankEvidence:
    subset: np.ndarray
    singular_values: np.ndarray
    decided_rank: int
    tol: float


class RankTestResult(NamedTuple):
    is_rank_k: bool
    evidence: RankEvidence


@dataclass
class SupportGrouping:
    n: int
    groups: list[np.ndarray]
    ungrouped: np.ndarray
    evidence: list[RankEvidence] = field(default_factory=list)
    contaminated: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    subsets: np.ndarray | None = None

    def labels(self) -> np.ndarray:
        """Group id per column, -1 for ungrouped."""
        lab = np.full(self.n, -1, dtype=np.int64)
        for g, J in enumerate(self.groups):
            lab[J] = g
        return lab

    def as_sets(self) -> set[frozenset]:
        return {frozenset(int(j) for j in J) for J in self.groups}


def _rank_from_sv(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def numerical_rank(M, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol * sigma_max`` (0 for M = 0)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        raise ValueError("numerical_rank of an empty matrix")
    return _rank_from_sv(np.linalg.svd(M, compute_uv=False), tol)


def rank_test_fixed(F, sketch, k: int, tol: float = RANK_TOL, subset=None) -> RankTestResult:
    """Certify ``rank(Y_J) = k`` from the sketch ``F Y_J``.

    Valid only when ``p_f > k``; the certificate is ``rank(F Y_J) == k``.
    """
    F = np.asarray(F, dtype=float)
    sketch = np.asarray(sketch, dtype=float)
    p_f = F.shape[0]
    if p_f <= k:
        raise PreconditionError(f"rank test needs p_f > k, got p_f={p_f}, k={k}")
    if sketch.shape[0] != p_f:
        raise ValueError(f"sketch has {sketch.shape[0]} rows, F has {p_f}")
    s = np.linalg.svd(sketch, compute_uv=False)
    r = _rank_from_sv(s, tol)
    if subset is None:
        subset = np.arange(sketch.shape[1])
    return RankTestResult(r == k, RankEvidence(np.asarray(subset), s, r, tol))


def _check_budget(n, size, budget):
    count = math.comb(n, size)
    if count > budget:
        raise BudgetError(f"C({n},{size}) = {count} subsets exceeds budget {budget}")
    return count


def _confirm(FY, cand: np.ndarray, k: int, tol: float) -> np.ndarray:
    if len(cand) == 0:
        return cand
    sub = FY[:, cand].transpose(1, 0, 2)  # (batch, p_f, k+1)
    s = np.linalg.svd(sub, compute_uv=False)
    ok = s[:, k] <= tol * s[:, 0]
    ok |= s[:, 0] == 0
    return cand[ok]


def _cofactors(B: np.ndarray) -> np.ndarray:
    """Generalised cross products of k vectors in R^(k+1).

    ``B`` has shape (batch, k+1, k); returns (batch, k+1) with
    ``det([B | x]) = cof @ x``.
    """
    batch, kp1, k = B.shape
    out = np.empty((batch, kp1))
    rows = np.arange(kp1)
    for r in range(kp1):
        minor = B[:, rows != r, :]
        out[:, r] = (-1) ** (r + k) * (np.linalg.det(minor) if k > 0 else 1.0)
    return out


def _square_candidates(FY, k, tol, chunk):
    p_f, n = FY.shape
    norms2 = np.sum(FY * FY, axis=0)
    cols = np.arange(n)
    found = []
    it = itertools.combinations(range(n), k)
    while True:
        heads = np.asarray(list(itertools.islice(it, chunk)), dtype=np.int64).reshape(-1, k)
        if heads.shape[0] == 0:
            break
        last = heads[:, -1]
        heads = heads[last < n - 1]
        if heads.shape[0] == 0:
            continue
        cof = _cofactors(FY[:, heads].transpose(1, 0, 2))
        dets = np.abs(cof @ FY)  # (batch, n): det of head + column l
        fro2 = norms2[heads].sum(axis=1)[:, None] + norms2[None, :]
        valid = cols[None, :] > heads[:, -1][:, None]
        hit = valid & (dets <= _SCREEN_SLACK * tol * fro2 ** ((k + 1) / 2))
        bi, li = np.nonzero(hit)
        if len(bi):
            found.append(np.column_stack([heads[bi], li]))
    if not found:
        return np.zeros((0, k + 1), dtype=np.int64)
    return np.concatenate(found)


def _general_candidates(FY, k, chunk):
    n = FY.shape[1]
    it = itertools.combinations(range(n), k + 1)
    while True:
        block = np.asarray(list(itertools.islice(it, chunk)), dtype=np.int64).reshape(-1, k + 1)
        if block.shape[0] == 0:
            return
        yield block


def enumerate_dependent_subsets(
    FY, k: int, p_f: int | None = None, tol: float = GROUP_TOL,
    budget: int = ENUM_BUDGET, chunk: int = 4096,
) -> np.ndarray:
    """All (k+1)-column subsets whose sketch has numerical rank <= k.

    Returns a (count, k+1) integer array of sorted index tuples in
    lexicographic order.
    """
    FY = np.asarray(FY, dtype=float)
    p_f = FY.shape[0] if p_f is None else p_f
    if p_f < k + 1:
        raise PreconditionError(f"need p_f >= k+1, got p_f={p_f}, k={k}")
    n = FY.shape[1]
    if n < k + 1:
        return np.zeros((0, k + 1), dtype=np.int64)
    _check_budget(n, k + 1, budget)
    if p_f == k + 1:
        cand = _square_candidates(FY, k, tol, chunk)
        out = _confirm(FY, cand, k, tol)
    else:
        out = np.concatenate(
            [_confirm(FY, b, k, tol) for b in _general_candidates(FY, k, chunk * 8)]
            or [np.zeros((0, k + 1), dtype=np.int64)]
        )
    if len(out):
        out = out[np.lexsort(out.T[::-1])]
    return out.reshape(-1, k + 1)


class _DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def merge_into_groups(subsets, n: int, k: int | None = None) -> SupportGrouping:
    """Merge dependent subsets sharing at least k columns into groups.

    ``k`` defaults to ``subsets.shape[1] - 1``. A column that ends up in two
    different components is reported in ``contaminated`` and left ungrouped.
    """
    subsets = np.asarray(subsets, dtype=np.int64)
    if subsets.size == 0:
        return SupportGrouping(n, [], np.arange(n), subsets=subsets.reshape(0, (k or 0) + 1))
    size = subsets.shape[1]
    k = size - 1 if k is None else k
    dsu = _DSU(len(subsets))
    first_owner: dict[tuple, int] = {}
    for s_idx, row in enumerate(subsets):
        for key in itertools.combinations(sorted(row.tolist()), k):
            owner = first_owner.setdefault(key, s_idx)
            if owner != s_idx:
                dsu.union(owner, s_idx)
    comps: dict[int, set[int]] = {}
    for s_idx, row in enumerate(subsets):
        comps.setdefault(dsu.find(s_idx), set()).update(row.tolist())
    membership = np.zeros(n, dtype=np.int64)
    for cols in comps.values():
        membership[list(cols)] += 1
    contaminated = np.flatnonzero(membership > 1)
    bad = set(contaminated.tolist())
    groups = []
    for root in sorted(comps, key=lambda r: min(comps[r])):
        J = np.asarray(sorted(c for c in comps[root] if c not in bad), dtype=np.int64)
        if len(J):
            groups.append(J)
    grouped = np.zeros(n, dtype=bool)
    for J in groups:
        grouped[J] = True
    return SupportGrouping(n, groups, np.flatnonzero(~grouped), [], contaminated, subsets)


def filter_recoverable(grouping: SupportGrouping, gamma: int) -> SupportGrouping:
    """Keep groups with at least ``gamma`` members; the rest become ungrouped."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    keep = [i for i, J in enumerate(grouping.groups) if len(J) >= gamma]
    groups = [grouping.groups[i] for i in keep]
    evidence = [grouping.evidence[i] for i in keep] if grouping.evidence else []
    grouped = np.zeros(grouping.n, dtype=bool)
    for J in groups:
        grouped[J] = True
    return SupportGrouping(grouping.n, groups, np.flatnonzero(~grouped), evidence,
                           grouping.contaminated, grouping.subsets)


def group_from_sketch(FY, k: int, tol: float = GROUP_TOL, budget: int = ENUM_BUDGET) -> SupportGrouping:
    """Enumerate, merge and attach per-group rank evidence."""
    FY = np.asarray(FY, dtype=float)
    subsets = enumerate_dependent_subsets(FY, k, tol=tol, budget=budget)
    grouping = merge_into_groups(subsets, FY.shape[1], k)
    for J in grouping.groups:
        s = np.linalg.svd(FY[:, J], compute_uv=False)
        grouping.evidence.append(RankEvidence(J, s, _rank_from_sv(s, tol), tol))
    return grouping
