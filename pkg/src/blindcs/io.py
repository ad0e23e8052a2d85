"""File formats.

Matrix container
    A NumPy ``.npz`` archive. The entry ``header`` holds a JSON document
    (dims, seeds, models, ensemble description); every other entry is a
    C-order (row-major) float64 or int64 matrix. Instances store ``A``,
    ``X``, ``Y`` and ``supports`` (n x k); a measurement record adds
    ``observations`` (n x p). Sampling matrices are not stored: the ensemble
    is rebuilt from the ``ensemble`` block of the header.

CSV
    The first line is ``# blindcs <schema> v<version>``, the second the
    column names. Floats are written with 17 significant digits so files
    round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .measurement import MeasurementRecord, ensemble_from_header
from .model import Dictionary, ProblemDims, SparseCodingInstance, SparseCoefficientMatrix

__all__ = [
    "CSV_VERSION",
    "format_value",
    "write_csv",
    "read_csv",
    "save_container",
    "load_container",
    "save_instance",
    "load_instance",
    "grouping_rows",
    "match_rows",
    "triplet_rows",
    "edge_rows",
    "cluster_rows",
    "bounds_rows",
]

CSV_VERSION = 1


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, schema: str, columns, rows, version: int = CSV_VERSION) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# blindcs {schema} v{version}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path):
    """Return ``(schema, version, columns, rows)`` with rows as string lists."""
    with Path(path).open(newline="") as fh:
        first = fh.readline().split()
        if len(first) != 4 or first[:2] != ["#", "blindcs"] or not first[3].startswith("v"):
            raise ValueError(f"{path}: missing blindcs schema line")
        reader = csv.reader(fh)
        columns = next(reader)
        return first[2], int(first[3][1:]), columns, list(reader)


def save_container(path, header: dict, **arrays) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {k: np.ascontiguousarray(v) for k, v in arrays.items()}
    with path.open("wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **payload)
    return path


def load_container(path):
    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        arrays = {k: z[k] for k in z.files if k != "header"}
    return header, arrays


def save_instance(path, instance: SparseCodingInstance, record: MeasurementRecord | None = None) -> Path:
    dims = instance.dims
    header = {
        "kind": "instance",
        "dims": {"d": dims.d, "m": dims.m, "k": dims.k, "n": dims.n, "ell": dims.ell},
        "coeff_model": instance.coeffs.coeff_model,
        "mode": instance.mode,
        "seed": instance.seed,
    }
    arrays = {"A": instance.A, "X": instance.X, "Y": instance.Y, "supports": instance.coeffs.supports}
    if record is not None:
        header["ensemble"] = record.ensemble.header()
        arrays["observations"] = record.observations
    return save_container(path, header, **arrays)


def load_instance(path):
    """Return ``(instance, record)``; ``record`` is None if none was stored."""
    header, arr = load_container(path)
    if header.get("kind") != "instance":
        raise ValueError(f"{path}: not an instance container")
    dims = ProblemDims(**header["dims"])
    coeffs = SparseCoefficientMatrix(arr["X"], arr["supports"], header["coeff_model"])
    inst = SparseCodingInstance(dims, Dictionary(arr["A"]), coeffs, arr["Y"], header["seed"], header["mode"])
    record = None
    if "ensemble" in header:
        ens = ensemble_from_header(header["ensemble"])
        record = MeasurementRecord(arr["observations"], ens)
    return inst, record


def grouping_rows(grouping):
    """(column_index, group_id, certified_rank); ungrouped columns get id -1."""
    rank_of = {g: ev.decided_rank for g, ev in enumerate(grouping.evidence)}
    labels = grouping.labels()
    return [(j, int(g), rank_of.get(int(g), "") if g >= 0 else "") for j, g in enumerate(labels)]


def match_rows(report):
    """(atom, matched_to, sign, error)."""
    return [(i, int(report.permutation[i]), int(report.signs[i]), float(report.per_atom_error[i]))
            for i in range(len(report.permutation))]


def triplet_rows(X):
    """(column, atom, value) for every non-zero of X, column-major order."""
    atoms, cols = np.nonzero(np.asarray(X).T)[::-1]
    order = np.lexsort((atoms, cols))
    return [(int(cols[i]), int(atoms[i]), float(X[atoms[i], cols[i]])) for i in order]


def edge_rows(graph):
    return [(int(i), int(j)) for i, j in graph.edges()]


def cluster_rows(cluster_set):
    return [(c, int(j)) for c, cols in enumerate(cluster_set.clusters) for j in cols]


def bounds_rows(reports):
    """(name, value_rational, value_int, vacuous, inputs as key=value;...)."""
    rows = []
    for r in reports:
        inputs = ";".join(f"{k}={format_value(v)}" for k, v in sorted(r.inputs.items()))
        rows.append((r.name, r.value_rational, "" if r.integer is None else r.integer, int(r.vacuous), inputs))
    return rows
