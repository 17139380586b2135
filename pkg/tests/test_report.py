import json
import math

import numpy as np

from delone_lab.report import dumps, fmt, write_csv


def test_seventeen_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(math.pi)) == math.pi


def test_dumps_roundtrip_and_nonfinite():
    text = dumps({"a": 0.1, "b": [1, 2.5], "c": np.float64(1 / 3), "d": np.inf, "e": True})
    assert '"a": 0.10000000000000001' in text
    assert "Infinity" in text
    data = json.loads(text)
    assert data["c"] == 1 / 3 and data["e"] is True


def test_write_csv(tmp_path):
    write_csv([{"x": 0.1, "flag": True, "v": [1.0, 2.0]}], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == "x,flag,v\n0.10000000000000001,1,1 2\n"
