import numpy as np
import pytest

from blindcs import io
from blindcs.dictlearn import ClusterSet, build_connection_graph
from blindcs.evaluate import match_columns
from blindcs.grouping import group_from_sketch
from blindcs.measurement import apply, sample_gaussian, sample_hybrid
from blindcs.model import ProblemDims, synthesize


def test_csv_roundtrip(tmp_path):
    rows = [(1, 0.1 + 0.2, True, "x"), (2, -1e-300, False, "")]
    p = io.write_csv(tmp_path / "a.csv", "demo", ["i", "v", "b", "s"], rows)
    schema, version, cols, got = io.read_csv(p)
    assert (schema, version, cols) == ("demo", io.CSV_VERSION, ["i", "v", "b", "s"])
    assert float(got[0][1]) == 0.1 + 0.2 and float(got[1][1]) == -1e-300
    assert got[0][2] == "1" and got[1][3] == ""


def test_csv_requires_schema_line(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        io.read_csv(p)


@pytest.mark.parametrize("hybrid", [True, False])
def test_instance_roundtrip(tmp_path, hybrid):
    inst = synthesize(ProblemDims.balanced(8, 4, 2, 2), "interval", "balanced", 3)
    ens = sample_hybrid(3, 4, 8, inst.dims.n, 5) if hybrid else sample_gaussian(5, 8, inst.dims.n, 5)
    rec = apply(ens, inst.Y)
    io.save_instance(tmp_path / "i.npz", inst, rec)
    inst2, rec2 = io.load_instance(tmp_path / "i.npz")
    assert np.array_equal(inst2.Y, inst.Y) and np.array_equal(inst2.X, inst.X)
    assert np.array_equal(rec2.observations, rec.observations)
    assert np.array_equal(rec2.ensemble.mats, ens.mats)
    assert inst2.dims == inst.dims


def test_instance_without_record(tmp_path):
    inst = synthesize(ProblemDims(8, 4, 2, 5), seed=1)
    io.save_instance(tmp_path / "i.npz", inst)
    _, rec = io.load_instance(tmp_path / "i.npz")
    assert rec is None


def test_row_helpers(rng):
    inst = synthesize(ProblemDims.balanced(10, 4, 2, 4), "interval", "balanced", 0)
    ens = sample_hybrid(3, 5, 10, inst.dims.n, 1)
    g = group_from_sketch(apply(ens, inst.Y).fixed_sketch, 2)
    rows = io.grouping_rows(g)
    assert len(rows) == inst.dims.n and all(r[2] == 2 for r in rows if r[1] >= 0)
    m = io.match_rows(match_columns(inst.A, inst.A))
    assert [r[:3] for r in m] == [(i, i, 1) for i in range(4)]
    trip = io.triplet_rows(inst.X)
    assert len(trip) == 2 * inst.dims.n
    assert all(inst.X[a, c] == v for c, a, v in trip)
    assert trip == sorted(trip, key=lambda t: (t[0], t[1]))
    graph = build_connection_graph(inst.Y)
    assert len(io.edge_rows(graph)) == graph.n_edges
    assert io.cluster_rows(ClusterSet([np.array([1, 2]), np.array([0])])) == [(0, 1), (0, 2), (1, 0)]
