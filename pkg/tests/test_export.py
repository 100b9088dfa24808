import json

import numpy as np
import pandas as pd
import pytest

from divmeasure.export import (measure_to_json, mesh_to_csv, mesh_to_off, read_face_table, read_grid,
                               round_floats, table_to_csv, write_face_table, write_grid, write_json)
from divmeasure.flux import FaceKey
from divmeasure.geometry import SurfaceMesh
from divmeasure.grid import GridSpec, ScalarGridField, VectorGridField
from divmeasure.measures import ConvergenceTable, SignedMeasure


@pytest.fixture
def tiny_grid():
    return GridSpec.from_bounds([0.0, -1.0], [1.0, 1.0], 0.25)


def test_round_floats():
    data = {"a": 1 / 3, "b": [np.float64(2 / 3), np.int64(4)], "c": float("nan"), "d": np.bool_(True)}
    out = round_floats(data)
    assert out == {"a": 0.333333333333, "b": [0.666666666667, 4], "c": "nan", "d": True}
    assert isinstance(out["b"][1], int)


def test_json_reports_are_sorted(tmp_path):
    path = write_json({"z": 1.0, "a": (1, 2)}, tmp_path / "sub" / "r.json")
    text = path.read_text()
    assert text.index('"a"') < text.index('"z"')
    assert json.loads(text)["a"] == [1, 2]


def test_grid_files(tmp_path, tiny_grid, rng):
    scalar = ScalarGridField(tiny_grid, rng.normal(size=tiny_grid.shape))
    vector = VectorGridField(tiny_grid, rng.normal(size=tiny_grid.shape + (2,)))
    write_grid(scalar, tmp_path / "s.bin")
    write_grid(vector, tmp_path / "v.bin")
    assert (tmp_path / "s.bin").stat().st_size == 8 * scalar.values.size
    header = json.loads((tmp_path / "v.bin.json").read_text())
    assert header["components"] == 2 and header["cells"] == [4, 8]
    back = read_grid(tmp_path / "v.bin")
    assert isinstance(back, VectorGridField)
    assert np.array_equal(back.values, vector.values)
    assert back.grid == tiny_grid
    assert np.array_equal(read_grid(tmp_path / "s.bin").values, scalar.values)


def test_off_needs_triangles(tmp_path):
    segment = SurfaceMesh(2, [[[0, 0], [1, 0]]], [[0, 1]], [1.0])
    with pytest.raises(ValueError):
        mesh_to_off(segment, tmp_path / "m.off")
    mesh_to_csv(segment, tmp_path / "m.csv")
    assert pd.read_csv(tmp_path / "m.csv").columns.tolist() == ["x0", "y0", "x1", "y1", "nx", "ny", "area"]

    triangle = SurfaceMesh(3, [[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], [[0, 0, 1]], [0.5])
    lines = mesh_to_off(triangle, tmp_path / "t.off").read_text().splitlines()
    assert lines[0] == "OFF"
    assert lines[1] == "3 1 0"
    assert lines[-1] == "3 0 1 2"


def test_measure_summary(tiny_grid):
    segment = SurfaceMesh(2, [[[0.1, 0.0], [0.6, 0.0]]], [[0, 1]], [0.5])
    mu = SignedMeasure(tiny_grid, np.ones(tiny_grid.shape), [(segment, 2.0)], [([0.3, 0.3], -0.5)])
    data = measure_to_json(mu)
    assert data["ac_total"] == pytest.approx(2.0)
    assert data["surface_total"] == pytest.approx(1.0)
    assert data["atoms"] == [{"point": [0.3, 0.3], "weight": -0.5}]
    assert data["tv"] == pytest.approx(3.5)


def test_tables_to_csv(tmp_path):
    table_to_csv(ConvergenceTable([(0.1, 0.6, 2.0)]), tmp_path / "a.csv")
    table_to_csv(pd.DataFrame([{"pair": "u^2/2", "value": -1 / 12}]), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[1] == "0.1,0.6,2"
    assert (tmp_path / "b.csv").read_text().splitlines()[1] == "u^2/2,-0.0833333333333"


def test_face_table_file(tmp_path):
    frame = pd.DataFrame([
        {"axis": 0, "cube": "1 2", "slice": 3, "value": 0.25, "jump": 0.0},
        {"axis": 1, "cube": "0 0", "slice": 8, "value": -1.5, "jump": -1.0},
    ])
    path = write_face_table(frame, tmp_path / "faces.csv")
    entries, shocks = read_face_table(path, 2)
    assert entries == {FaceKey(0, (1, 2), 3): 0.25, FaceKey(1, (0, 0), 8): -1.5}
    assert shocks == {FaceKey(1, (0, 0), 8): -1.0}
    with pytest.raises(ValueError):
        read_face_table(path, 3)
