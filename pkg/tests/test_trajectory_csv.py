from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adagrad_fejer.adagrad import run
from adagrad_fejer.objective import get_problem
from adagrad_fejer.trajectory import TrajectoryFormatError, read_csv, write_csv


def _roundtrip(traj, tmp_path):
    path = tmp_path / "t.csv"
    write_csv(traj, path)
    return path, read_csv(path, traj.delta)


class TestCsv:
    def test_scalar_header(self, tmp_path):
        traj = run(get_problem("quad1d"), "adagrad-norm", [1.0], 3.0, 5)
        path, _ = _roundtrip(traj, tmp_path)
        assert path.read_text().splitlines()[0] == "k,x_0,g_0,v,F,step"

    def test_vector_header(self, tmp_path):
        traj = run(get_problem("flat-valley"), "adagrad", [1.0, 2.0], 3.0, 5)
        path, _ = _roundtrip(traj, tmp_path)
        assert path.read_text().splitlines()[0] == "k,x_0,x_1,g_0,g_1,v_0,v_1,F,step_0,step_1"

    @pytest.mark.parametrize("algo", ["adagrad-norm", "adagrad", "gd"])
    def test_exact_roundtrip_and_algo_detection(self, algo, tmp_path):
        traj = run(get_problem("quad-aniso"), algo, [1.0, -3.0, 10.0], 0.1, 200)
        _, back = _roundtrip(traj, tmp_path)
        assert back.algo == algo
        for name in ("x", "g", "v", "F", "step"):
            assert getattr(back, name).tobytes() == getattr(traj, name).tobytes(), name

    def test_row_count_matches_iterations(self, tmp_path):
        traj = run(get_problem("quad1d"), "adagrad-norm", [1.0], 3.0, 100)
        path, _ = _roundtrip(traj, tmp_path)
        assert len(path.read_text().splitlines()) == 101

    @pytest.mark.parametrize("text", [
        "",
        "k,x_0,g_0,v,F,step\n0,1,1,1,0.5\n",
        "k,x_0,g_0,v,F,step\n0,1,1,abc,0.5,0.5\n",
        "a,b,c\n1,2,3\n",
    ])
    def test_malformed(self, text, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(TrajectoryFormatError):
            read_csv(path, 1.0)


@settings(max_examples=30, deadline=None)
@given(
    x0=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3),
    delta=st.floats(1e-4, 1e4),
    algo=st.sampled_from(["adagrad-norm", "adagrad"]),
)
def test_roundtrip_property(tmp_path_factory, x0, delta, algo):
    traj = run(get_problem("quad-aniso"), algo, x0, delta, 30)
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    write_csv(traj, path)
    back = read_csv(path, delta)
    np.testing.assert_array_equal(back.x, traj.x)
    np.testing.assert_array_equal(back.v, traj.v)
