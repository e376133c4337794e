import json
from dataclasses import dataclass

import numpy as np

from utilities.serializers import (
    SCHEMA_VERSION,
    ResultWriter,
    csv_bytes,
    format_float,
    json_bytes,
    sha256_file,
    to_serializable,
)


@dataclass
class Sample:
    name: str
    value: float


def test_format_float_has_seventeen_digits():
    assert format_float(0.1) == "1.0000000000000001e-01"
    assert format_float(-2.0) == "-2.0000000000000000e+00"


def test_to_serializable_handles_numpy_and_complex():
    payload = {
        "array": np.array([1.0, np.nan]),
        "complex": 1 + 2j,
        "flag": np.bool_(True),
        "count": np.int64(3),
        "inf": float("inf"),
        "sample": Sample("a", 0.5),
        "pair": (1, 2),
    }
    assert to_serializable(payload) == {
        "array": [1.0, None],
        "complex": [1.0, 2.0],
        "flag": True,
        "count": 3,
        "inf": None,
        "sample": {"name": "a", "value": 0.5},
        "pair": [1, 2],
    }


def test_float_keys_become_strings():
    assert to_serializable({0.2: 1.5}) == {"0.2": 1.5}


def test_empty_csv_keeps_header():
    assert csv_bytes(["alpha", "beta"], []) == b"alpha,beta\n"


def test_csv_float_format():
    text = csv_bytes(["x", "n"], [(0.5, 2)]).decode()
    assert text == "x,n\n5.0000000000000000e-01,2\n"


def test_json_is_sorted_and_versioned():
    document = json.loads(json_bytes({"b": 1, "a": float("nan")}))
    assert document == {"a": None, "b": 1, "schema_version": SCHEMA_VERSION}
    assert list(document) == sorted(document)


def test_writer_inventory_and_manifest(tmp_path):
    writer = ResultWriter(tmp_path / "out")
    csv_path = writer.write_csv("rows.csv", ["x"], [(1.0,)])
    json_path = writer.write_json("data.json", {"value": 1})
    manifest_path = writer.write_manifest({"command": "test"})

    assert writer.inventory["rows.csv"] == sha256_file(csv_path)
    assert writer.inventory["data.json"] == sha256_file(json_path)
    manifest = json.loads(manifest_path.read_text())
    assert manifest["command"] == "test"
    assert [entry["name"] for entry in manifest["files"]] == ["data.json", "rows.csv"]
    assert not list((tmp_path / "out").glob(".*.tmp"))


def test_writes_are_reproducible(tmp_path):
    first = ResultWriter(tmp_path / "a").write_json("x.json", {"v": [0.1, 0.2]})
    second = ResultWriter(tmp_path / "b").write_json("x.json", {"v": [0.1, 0.2]})
    assert first.read_bytes() == second.read_bytes()
