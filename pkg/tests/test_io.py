from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrinterdict.errors import MalformedInstance
from qrinterdict.graph import diamond, generate_random
from qrinterdict.io import dumps, instance_from_dict, instance_to_dict, load_instance, save_instance


@given(st.integers(3, 20), st.integers(0, 1000))
def test_roundtrip(n, seed):
    inst = generate_random(n, 0.5, 0.5, seed)
    again = instance_from_dict(json.loads(dumps(instance_to_dict(inst))))
    assert again == inst.instance


def test_file_roundtrip(tmp_path):
    path = tmp_path / "d.json"
    save_instance(diamond(), path)
    loaded = load_instance(path)
    assert loaded.instance == diamond().instance
    first = path.read_text()
    save_instance(loaded, path)
    assert path.read_text() == first


def test_dumps_canonical():
    text = dumps({"b": 1, "a": np.float64(2.5), "c": np.arange(2), "d": float("inf")})
    assert text.endswith("\n")
    doc = json.loads(text)
    assert list(doc) == ["a", "b", "c", "d"]
    assert doc["c"] == [0, 1]
    assert isinstance(doc["d"], str)


def test_bad_schema():
    doc = instance_to_dict(diamond())
    doc["schema"] = 99
    with pytest.raises(MalformedInstance):
        instance_from_dict(doc)


def test_sparse_ids_rejected():
    doc = instance_to_dict(diamond())
    doc["nodes"][1]["id"] = 7
    with pytest.raises(MalformedInstance):
        instance_from_dict(doc)


def test_missing_field_rejected():
    doc = instance_to_dict(diamond())
    del doc["origin"]
    with pytest.raises(MalformedInstance):
        instance_from_dict(doc)
