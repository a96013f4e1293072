"""Columnar binary trajectory format and CSV export."""

import numpy as np
import pytest

from paratrap.core import DriveSchedule, TrapParams
from paratrap.dynamics import Oscillator1D, integrate_1d
from paratrap.trajio import (
    read_columns,
    trajectory_to_csv,
    write_columns,
    write_matrix_csv,
    write_trajectory,
)


def test_round_trip_preserves_bits(tmp_path):
    rng = np.random.default_rng(0)
    cols = {"a": rng.normal(size=1000), "b": rng.uniform(size=1000)}
    path = tmp_path / "data.cols"
    write_columns(path, cols.keys(), cols.values(), 4.096e9, t0=1e-9,
                  meta={"seed": 42})
    back = read_columns(path)
    assert back.columns == ("a", "b")
    assert back.sample_rate == 4.096e9
    assert back.t0 == 1e-9
    assert back.meta == {"seed": 42}
    for name in cols:
        assert np.array_equal(back.data[name], cols[name])
    times = back.times()
    assert times[0] == 1e-9
    assert times.size == 1000


def test_write_is_deterministic(tmp_path):
    data = np.linspace(0.0, 1.0, 257)
    p1 = tmp_path / "a.cols"
    p2 = tmp_path / "b.cols"
    write_columns(p1, ("v",), [data], 1e9, meta={"x": 1, "a": 2})
    write_columns(p2, ("v",), [data], 1e9, meta={"a": 2, "x": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_trajectory_round_trip(tmp_path):
    trap = TrapParams()
    traj = integrate_1d(1e-6, 0.0, Oscillator1D(trap.omega_x),
                        DriveSchedule(epsilon_max=0.0), 0.5e-6)
    path = tmp_path / "traj.cols"
    write_trajectory(path, traj, meta={"run": "unit"})
    back = read_columns(path)
    assert back.columns == ("x", "v")
    assert np.array_equal(back.data["x"], traj.column("x"))
    assert back.meta["run"] == "unit"
    assert back.sample_rate == traj.sample_rate


def test_csv_export(tmp_path):
    trap = TrapParams()
    traj = integrate_1d(1e-6, 0.0, Oscillator1D(trap.omega_x),
                        DriveSchedule(epsilon_max=0.0), 0.2e-6)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(path, traj, max_rows=50)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,v"
    assert len(lines) == 51
    t0, x0, v0 = (float(v) for v in lines[1].split(","))
    assert t0 == 0.0 and x0 == 1e-6 and v0 == 0.0


def test_matrix_csv(tmp_path):
    path = tmp_path / "m.csv"
    write_matrix_csv(path, ["a", "b"], [(1.5, "x"), (2.0, "y")])
    assert path.read_text() == "a,b\n1.5,x\n2.0,y\n"


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.cols"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(ValueError, match="columnar"):
        read_columns(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "t.cols"
    write_columns(path, ("v",), [np.arange(100.0)], 1e9)
    blob = path.read_bytes()
    path.write_bytes(blob[:-40])
    with pytest.raises(ValueError, match="truncated"):
        read_columns(path)


def test_shape_validation(tmp_path):
    with pytest.raises(ValueError, match="equal length"):
        write_columns(tmp_path / "x.cols", ("a", "b"),
                      [np.arange(3.0), np.arange(4.0)], 1e9)
    with pytest.raises(ValueError, match="per column"):
        write_columns(tmp_path / "y.cols", ("a",),
                      [np.arange(3.0), np.arange(3.0)], 1e9)
