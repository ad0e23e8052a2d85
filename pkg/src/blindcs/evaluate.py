"""Scoring: dictionary matching up to permutation and sign, and error measures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateError, DimensionError

__all__ = ["MatchReport", "BCSSuccess", "match_columns", "group_error", "bcs_success", "normalize_columns"]


@dataclass
class MatchReport:
    """``permutation[i]`` is the estimate column matched to truth column i."""

    permutation: np.ndarray
    signs: np.ndarray
    per_atom_error: np.ndarray

    @property
    def max_error(self) -> float:
        return float(self.per_atom_error.max())

    @property
    def mean_error(self) -> float:
        return float(self.per_atom_error.mean())

    def aligned(self, estimate) -> np.ndarray:
        """Estimate reordered and sign-corrected to line up with the truth."""
        return np.asarray(estimate)[:, self.permutation] * self.signs


class BCSSuccess(NamedTuple):
    y_exact: bool
    dict_exact: bool


def normalize_columns(A) -> np.ndarray:
    A = np.asarray(getattr(A, "atoms", A), dtype=float)
    nrm = np.linalg.norm(A, axis=0)
    return A / np.where(nrm > 0, nrm, 1.0)


def match_columns(estimate, truth) -> MatchReport:
    """Optimal assignment on ``|truth^T estimate|`` with per-atom sign fixing.

    Both arguments are normalised to unit columns first, which reduces the
    diagonal scaling ambiguity to a sign.
    """
    E = normalize_columns(estimate)
    T = normalize_columns(truth)
    if E.shape != T.shape:
        raise DimensionError(f"shape mismatch {E.shape} vs {T.shape}")
    score = np.abs(T.T @ E)
    rows, cols = linear_sum_assignment(score, maximize=True)
    perm = np.empty(T.shape[1], dtype=np.int64)
    perm[rows] = cols
    ip = np.einsum("di,di->i", T, E[:, perm])
    signs = np.where(ip < 0, -1.0, 1.0)
    err = np.linalg.norm(T - E[:, perm] * signs, axis=0)
    return MatchReport(perm, signs, err)


def group_error(recovered, truth) -> float:
    """Relative Frobenius error ``||R - T||_F / ||T||_F``."""
    R = np.asarray(recovered, dtype=float)
    T = np.asarray(truth, dtype=float)
    if R.shape != T.shape:
        raise DimensionError(f"shape mismatch {R.shape} vs {T.shape}")
    tn = np.linalg.norm(T)
    if tn == 0:
        raise DegenerateError("truth has zero norm")
    return float(np.linalg.norm(R - T) / tn)


def bcs_success(instance, recovered_Y, dict_report: MatchReport | None, tol: float) -> BCSSuccess:
    """Exact-recovery indicators for data and dictionary at tolerance ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    Y = getattr(instance, "Y", instance)
    y_ok = group_error(recovered_Y, Y) <= tol
    d_ok = dict_report is not None and dict_report.max_error <= tol
    return BCSSuccess(bool(y_ok), bool(d_ok))
