import json

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from hystrelax.controls import Control
from hystrelax.export import fmt, read_csv, write_csv, write_json, write_trajectory_csv
from hystrelax.solver import SolverConfig, solve


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_roundtrips_exactly(x):
    assert float(fmt(x)) == x


def test_fmt_integers_and_numpy():
    assert fmt(3) == "3" and fmt(np.int64(7)) == "7"
    assert fmt(np.float64(0.1)) == "0.10000000000000001"


def test_csv_roundtrip(tmp_path):
    p = write_csv(tmp_path / "a.csv", ("n", "val"), [(1, 0.5), (2, 1 / 3)])
    header, rows = read_csv(p)
    assert header == ["n", "val"] and float(rows[1][1]) == 1 / 3


def test_json_handles_numpy(tmp_path):
    p = write_json(tmp_path / "a.json", {"b": np.arange(3), "a": np.float64(1.5)})
    assert json.loads(p.read_text()) == {"a": 1.5, "b": [0, 1, 2]}
    assert p.read_text().index('"a"') < p.read_text().index('"b"')


def test_trajectory_csv_layout(tmp_path, small_budworm):
    s = small_budworm
    tr = solve(s, SolverConfig(dt=0.1), Control.constant(0.5, s.mesh.n, s.horizon))
    header, rows = read_csv(write_trajectory_csv(tmp_path / "t.csv", tr))
    assert header == ["t", "x", "sigma", "v", "w", "u", "force"]
    assert len(rows) == len(tr.times) * s.mesh.n
    last = rows[-1]
    assert float(last[0]) == tr.times[-1] and float(last[1]) == s.mesh.x[-1]
    assert float(last[2]) == tr.sigma[-1, -1]
