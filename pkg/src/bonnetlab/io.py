"""Deterministic report serialization and data-file formats.

JSON reports are emitted with sorted keys and floats at 17 significant
digits so identical runs produce identical bytes.  Field data files carry a
chart plus per-node row-major g and II entries; grids export as CSV and, for
surfaces in R^3, Wavefront OBJ meshes.
"""

import json

import numpy as np

from .errors import FieldsFormatError, SingularMetric
from .hypersurface import Chart, HypersurfacePatch
from .reconstruct import TensorFieldPair


def _emit(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v != v:
            return "NaN"
        if v == float("inf"):
            return "Infinity"
        if v == float("-inf"):
            return "-Infinity"
        return format(v, ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        return _emit(value.tolist())
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: str(kv[0]))
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_emit(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_emit(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)!r}")


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    return _emit(obj) + "\n"


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))


# -- (g, II) field files ---------------------------------------------------------


def save_fields(fields: TensorFieldPair, path) -> None:
    """Sample the fields on their chart grid and write the JSON data file."""
    chart = fields.chart
    nodes = chart.node_grid().reshape(-1, chart.n)
    g = fields.g(nodes)
    II = fields.II(nodes)
    payload = {
        "chart": chart.to_json(),
        "g": [row.reshape(-1).tolist() for row in g],
        "II": [row.reshape(-1).tolist() for row in II],
    }
    write_json(payload, path)


def load_fields(path) -> TensorFieldPair:
    """Read a (g, II) data file; raises FieldsFormatError with a located message."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FieldsFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise FieldsFormatError(f"{path}: {exc}")

    if not isinstance(data, dict):
        raise FieldsFormatError(f"{path}: top level must be an object")
    for key in ("chart", "g", "II"):
        if key not in data:
            raise FieldsFormatError(f"{path}: missing field '{key}'")
    try:
        chart = Chart.from_json(data["chart"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FieldsFormatError(f"{path}: field 'chart': {exc}")

    n = chart.n
    count = int(np.prod(chart.grid))

    def parse(key):
        rows = data[key]
        if not isinstance(rows, list) or len(rows) != count:
            raise FieldsFormatError(
                f"{path}: field '{key}' must list {count} nodes, got "
                f"{len(rows) if isinstance(rows, list) else type(rows).__name__}")
        out = np.empty((count, n, n))
        for i, row in enumerate(rows):
            arr = np.asarray(row, dtype=float)
            if arr.shape == (n, n):
                out[i] = arr
            elif arr.shape == (n * n,):
                out[i] = arr.reshape(n, n)
            else:
                raise FieldsFormatError(
                    f"{path}: field '{key}' node {i}: expected {n * n} entries "
                    f"(row-major), got shape {arr.shape}")
        return out.reshape(tuple(chart.grid) + (n, n))

    g_grid = parse("g")
    II_grid = parse("II")
    try:
        return TensorFieldPair.from_grids(chart, g_grid, II_grid)
    except (ValueError, SingularMetric) as exc:
        raise FieldsFormatError(f"{path}: {exc}")


# -- delimited / mesh exports ------------------------------------------------------


def export_fields_csv(fields: TensorFieldPair, path) -> None:
    """Chart nodes with row-major g and II entries as delimited columns."""
    chart = fields.chart
    n = chart.n
    nodes = chart.node_grid().reshape(-1, n)
    g = fields.g(nodes).reshape(-1, n * n)
    II = fields.II(nodes).reshape(-1, n * n)
    cols = ([f"u{i + 1}" for i in range(n)]
            + [f"g{i + 1}{j + 1}" for i in range(n) for j in range(n)]
            + [f"II{i + 1}{j + 1}" for i in range(n) for j in range(n)])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for u, gr, IIr in zip(nodes, g, II):
            vals = [format(float(v), ".17g") for v in (*u, *gr, *IIr)]
            fh.write(",".join(vals) + "\n")


def export_positions_csv(chart: Chart, positions: np.ndarray, path) -> None:
    """Rows of chart coordinates followed by image coordinates."""
    n = chart.n
    d = positions.shape[-1]
    nodes = chart.node_grid().reshape(-1, n)
    flat = positions.reshape(-1, d)
    header = ",".join([f"u{i + 1}" for i in range(n)] + [f"x{i + 1}" for i in range(d)])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for u, x in zip(nodes, flat):
            vals = [format(float(v), ".17g") for v in (*u, *x)]
            fh.write(",".join(vals) + "\n")


def export_patch_csv(patch: HypersurfacePatch, path) -> None:
    """Sample the immersion on the chart grid and export as CSV."""
    nodes = patch.chart.node_grid()
    positions = patch.f(nodes.reshape(-1, patch.n)).reshape(nodes.shape[:-1] + (patch.n + 1,))
    export_positions_csv(patch.chart, positions, path)


def export_obj(positions: np.ndarray, path) -> None:
    """Wavefront OBJ quad mesh from a 2-d grid of points in R^3."""
    if positions.ndim != 3 or positions.shape[-1] != 3:
        raise ValueError("OBJ export needs a (rows, cols, 3) position grid")
    rows, cols, _ = positions.shape
    with open(path, "w") as fh:
        for p in positions.reshape(-1, 3):
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for i in range(rows - 1):
            for j in range(cols - 1):
                a = i * cols + j + 1
                b = a + 1
                c = a + cols + 1
                d = a + cols
                fh.write(f"f {a} {b} {c} {d}\n")


def load_obj_vertices(path) -> np.ndarray:
    """Vertex array of an OBJ file (testing / round-trip helper)."""
    verts = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(t) for t in line.split()[1:4]])
    return np.asarray(verts)
