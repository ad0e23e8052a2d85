"""End-to-end blind compressed sensing with the hybrid scheme.

From hybrid measurements ``z_j = [F; V_j] y_j`` alone:

1. group columns by support with rank tests on ``F Y``;
2. keep groups with at least ``gamma`` members;
3. recover each kept group as a rank-k block from its measurements;
4. read the atoms off as one-dimensional intersections of group spans;
5. recover every column's k-sparse code on ``Phi_j A_hat``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import ell_bound_hybrid
from .errors import DomainError
from .grouping import GROUP_TOL, SupportGrouping, filter_recoverable, group_from_sketch
from .lowrank import (GroupRecoveryResult, RecoveryOptions, atoms_from_spans, group_span,
                      problem_from_record, recover_group)
from .rng import derive_seed
from .sparse import CoefficientRecovery, recover_all_coefficients

__all__ = ["BCSResult", "hybrid_bcs"]


@dataclass
class BCSResult:
    grouping: SupportGrouping
    recoverable: SupportGrouping
    gamma: int
    recoveries: list[GroupRecoveryResult] = field(default_factory=list)
    atoms: np.ndarray | None = None
    atom_counts: np.ndarray | None = None
    coefficients: CoefficientRecovery | None = None

    @property
    def Y(self) -> np.ndarray | None:
        return None if self.coefficients is None else self.coefficients.Y


def hybrid_bcs(ensemble, record, k: int, m: int, opts: RecoveryOptions | None = None,
               gamma: int | None = None, group_tol: float = GROUP_TOL, seed: int = 0,
               rows: str = "all") -> BCSResult:
    """Run the full pipeline; ``rows`` selects the rows of Phi_j used in step 3.

    ``gamma`` defaults to the hybrid per-support bound for ``(d, k, p)``,
    falling back to k + 1 when that bound is undefined (p <= 3k + 1).
    """
    if gamma is None:
        try:
            gamma = ell_bound_hybrid(ensemble.d, k, ensemble.p)
        except DomainError:
            gamma = k + 1
    grouping = group_from_sketch(record.fixed_sketch, k, tol=group_tol)
    kept = filter_recoverable(grouping, gamma)
    out = BCSResult(grouping, kept, gamma)
    spans = []
    for g, J in enumerate(kept.groups):
        prob = problem_from_record(ensemble, record, J, k, part=rows)
        res = recover_group(prob, opts, seed=derive_seed(seed, "group", g))
        out.recoveries.append(res)
        if res.converged:
            spans.append(group_span(res.recovered, k))
    if len(spans) < 2:
        return out
    atoms, counts = atoms_from_spans(spans, m)
    out.atoms, out.atom_counts = atoms, counts
    if atoms.shape[1] >= k:
        out.coefficients = recover_all_coefficients(atoms, ensemble, record, k)
    return out
