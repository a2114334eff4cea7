"""Per-iteration trajectory log and its CSV format."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

ALGORITHMS = ("adagrad-norm", "adagrad", "gd")


@dataclass
class TrajectoryRecord:
    """Log of a run; row ``k`` describes one gradient evaluation.

    Row ``k`` holds ``x_k``, ``g_k = grad F(x_k)``, ``F(x_k)``, the
    accumulator *after* absorbing ``g_k`` (``v_{k+1}``) and the step size
    ``1/sqrt(v_{k+1} + delta)`` applied to ``g_k``. The last row is the final
    state: its step is computed but ``x_{k+1}`` is not part of the log.

    ``v`` and ``step`` have shape ``(N,)`` for scalar-accumulator runs
    (AdaGrad-Norm, gradient descent) and ``(N, n)`` for coordinatewise AdaGrad.
    For gradient descent ``v`` still records the running sum of ``||g||^2``
    and ``step`` holds the constant step.
    """

    algo: str
    delta: float
    x: NDArray[np.float64]
    g: NDArray[np.float64]
    v: NDArray[np.float64]
    F: NDArray[np.float64]
    step: NDArray[np.float64]
    problem: str | None = None
    error: str | None = None

    def __len__(self):
        return self.x.shape[0]

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    @property
    def scalar_accumulator(self) -> bool:
        return self.v.ndim == 1

    @property
    def aborted(self) -> bool:
        return self.error is not None

    def v_before(self) -> NDArray[np.float64]:
        """Accumulator values ``v_0 .. v_{N-1}`` seen at each logged iterate."""
        zero = np.zeros((1,) + self.v.shape[1:])
        return np.concatenate([zero, self.v[:-1]])

    def v_states(self) -> NDArray[np.float64]:
        """``v_0 .. v_N``: every accumulator value the log determines."""
        zero = np.zeros((1,) + self.v.shape[1:])
        return np.concatenate([zero, self.v])


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def csv_header(n: int, scalar: bool) -> list[str]:
    cols = ["k"]
    cols += [f"x_{i}" for i in range(n)]
    cols += [f"g_{i}" for i in range(n)]
    cols += ["v"] if scalar else [f"v_{i}" for i in range(n)]
    cols += ["F"]
    cols += ["step"] if scalar else [f"step_{i}" for i in range(n)]
    return cols


def write_csv(traj: TrajectoryRecord, path: str | Path) -> None:
    scalar = traj.scalar_accumulator
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(traj.dimension, scalar))
        for k in range(len(traj)):
            row = [str(k)]
            row += [_fmt(t) for t in traj.x[k]]
            row += [_fmt(t) for t in traj.g[k]]
            row += [_fmt(traj.v[k])] if scalar else [_fmt(t) for t in traj.v[k]]
            row += [_fmt(traj.F[k])]
            row += [_fmt(traj.step[k])] if scalar else [_fmt(t) for t in traj.step[k]]
            w.writerow(row)


class TrajectoryFormatError(ValueError):
    pass


def read_csv(path: str | Path, delta: float, algo: str | None = None) -> TrajectoryRecord:
    """Parse a trajectory CSV.

    ``delta`` is not stored in the file and must be supplied. When ``algo`` is
    omitted it is inferred: per-coordinate ``v`` columns mean coordinatewise
    AdaGrad; a scalar ``v`` column is AdaGrad-Norm if every logged step equals
    ``1/sqrt(v + delta)``, gradient descent otherwise.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TrajectoryFormatError("empty trajectory file")
    header, body = rows[0], rows[1:]
    n = sum(1 for c in header if c.startswith("x_"))
    scalar = "v" in header
    if n == 0 or header != csv_header(n, scalar):
        raise TrajectoryFormatError(f"unexpected header: {header}")
    if not body:
        raise TrajectoryFormatError("trajectory has no rows")
    try:
        data = np.array([[float(t) for t in r] for r in body], dtype=float)
    except ValueError as exc:
        raise TrajectoryFormatError(str(exc)) from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise TrajectoryFormatError("ragged rows")
    if not np.array_equal(data[:, 0], np.arange(len(body))):
        raise TrajectoryFormatError("row index column is not 0..N-1")
    cols = {name: j for j, name in enumerate(header)}
    x = data[:, [cols[f"x_{i}"] for i in range(n)]]
    g = data[:, [cols[f"g_{i}"] for i in range(n)]]
    F = data[:, cols["F"]]
    if scalar:
        v = data[:, cols["v"]]
        step = data[:, cols["step"]]
    else:
        v = data[:, [cols[f"v_{i}"] for i in range(n)]]
        step = data[:, [cols[f"step_{i}"] for i in range(n)]]
    if algo is None:
        if not scalar:
            algo = "adagrad"
        elif np.array_equal(step, 1.0 / np.sqrt(v + delta)):
            algo = "adagrad-norm"
        else:
            algo = "gd"
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    return TrajectoryRecord(algo=algo, delta=float(delta), x=x, g=g, v=v, F=F, step=step)
