import numpy as np

from blindcs.bcs import hybrid_bcs
from blindcs.evaluate import bcs_success, match_columns
from blindcs.measurement import apply, sample_hybrid
from blindcs.model import ProblemDims, synthesize


def _run(seed, p_v=9):
    inst = synthesize(ProblemDims.balanced(16, 6, 2, 10), "interval", "balanced", seed)
    ens = sample_hybrid(3, p_v, 16, inst.dims.n, seed + 1)
    return inst, hybrid_bcs(ens, apply(ens, inst.Y), 2, 6, seed=seed)


def test_end_to_end_recovers_y_and_dictionary():
    inst, res = _run(0)
    assert res.gamma == 10
    assert len(res.recoverable.groups) == 15
    rep = match_columns(res.atoms, inst.A)
    assert bcs_success(inst, res.Y, rep, 1e-6) == (True, True)


def test_groups_below_gamma_are_not_recovered():
    inst = synthesize(ProblemDims(16, 6, 2, 60), "interval", "iid", 3)
    ens = sample_hybrid(3, 9, 16, 60, 4)
    res = hybrid_bcs(ens, apply(ens, inst.Y), 2, 6)
    assert all(len(J) >= res.gamma for J in res.recoverable.groups)
    assert len(res.recoveries) == len(res.recoverable.groups)


def test_too_few_groups_yields_no_atoms():
    inst = synthesize(ProblemDims.balanced(16, 6, 2, 3), "interval", "balanced", 1)
    ens = sample_hybrid(3, 9, 16, inst.dims.n, 2)
    res = hybrid_bcs(ens, apply(ens, inst.Y), 2, 6)  # every group has 3 < 10 members
    assert res.atoms is None and res.Y is None
