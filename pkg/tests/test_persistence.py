import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusgff import SchemaError
from torusgff import persistence as io


def test_write_read_roundtrip(tmp_path):
    payload = {"a": 1, "b": [1.5, 2.0], "c": {"x": "y"}, "arr": np.arange(3), "f": np.float64(0.1)}
    p = io.write_json(tmp_path / "sub" / "r.json", "report", payload)
    back = io.read_json(p, "report")
    assert back == {"a": 1, "b": [1.5, 2.0], "c": {"x": "y"}, "arr": [0, 1, 2], "f": 0.1}
    assert p.read_bytes().endswith(b"\n") and b"\r" not in p.read_bytes()


def test_nonfinite_values_serialize_as_strings():
    assert json.loads(io.dumps({"x": float("nan"), "y": float("inf")})) == {"x": "nan", "y": "inf"}


def test_corrupted_json_names_byte_offset(tmp_path):
    p = io.write_json(tmp_path / "r.json", "report", {"a": 1})
    raw = p.read_bytes()
    cut = raw.index(b'"payload"') + len(b'"payload"')
    p.write_bytes(raw[:cut] + b"=" + raw[cut + 1:])
    with pytest.raises(SchemaError, match=f"byte offset {cut}"):
        io.read_json(p)


def test_schema_version_bump_rejected(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"schema": "torusgff/report", "schema_version": 2, "payload": {}}))
    with pytest.raises(SchemaError, match="unsupported version"):
        io.read_json(p)
    p.write_text(json.dumps({"payload": {}}))
    with pytest.raises(SchemaError, match="missing schema"):
        io.read_json(p)
    io.write_json(p, "report", {})
    with pytest.raises(SchemaError, match="expected schema"):
        io.read_json(p, "manifest")


def test_io_errors_carry_path(tmp_path):
    missing = tmp_path / "nope" / "x.json"
    with pytest.raises(io.ArtifactIOError, match="nope"):
        io.read_json(missing)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(io.ArtifactIOError, match="file"):
        io.write_json(blocker / "x.json", "report", {})


def test_csv_format(tmp_path):
    p = io.write_csv(tmp_path / "t.csv", ["a", "b", "c"], [(1, 0.1, "x,y"), (2, 1 / 3, True)], ["note"])
    text = p.read_text()
    assert text == '# note\na,b,c\n1,0.10000000000000001,"x,y"\n2,0.33333333333333331,true\n'
    comments, cols, rows = io.read_csv(tmp_path / "t.csv")
    assert comments == ["note"] and cols == ["a", "b", "c"]
    assert float(rows[1][1]) == 1 / 3


@settings(max_examples=100)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digits_roundtrip(x):
    assert float(io.fmt(x)) == x


@settings(max_examples=50)
@given(st.dictionaries(st.text(min_size=1, max_size=5),
                       st.one_of(st.integers(), st.floats(allow_nan=False), st.text(max_size=5),
                                 st.lists(st.integers(), max_size=3)), max_size=6))
def test_dumps_is_stable_under_reserialization(d):
    text = io.dumps(d)
    assert io.dumps(json.loads(text)) == text


def test_manifest_digest_and_tamper_detection(tmp_path):
    out = io.write_csv(tmp_path / "o.csv", ["a"], [(1,)])
    m = io.build_manifest("0.1.0", ["verify", "x"], {"seed": 1}, 1, [], [out], "t0", "t1")
    assert m["outputs"] == {"o.csv": io.digest_file(out)}
    p = io.write_manifest(tmp_path / "manifest.json", m)
    back = io.read_manifest(p)
    assert back == m
    # timestamps are excluded from the digest
    assert io.manifest_digest(dict(m, started="other")) == m["digest"]
    bad = dict(m, seed=2)
    io.write_manifest(p, bad)
    with pytest.raises(SchemaError, match="digest mismatch"):
        io.read_manifest(p)
