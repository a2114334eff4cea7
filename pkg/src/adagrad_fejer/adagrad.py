"""AdaGrad-Norm, coordinatewise AdaGrad and a fixed-step gradient baseline."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .objective import ObjectiveProblem
from .trajectory import ALGORITHMS, TrajectoryRecord

logger = logging.getLogger(__name__)


class NonFiniteError(FloatingPointError):
    """Raised when the objective returns a NaN or infinite value or gradient."""


@dataclass(frozen=True)
class OptimizerState:
    x: NDArray[np.float64]
    v: float | NDArray[np.float64]
    delta: float
    k: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be strictly positive")


def initial_state(x0: ArrayLike, delta: float, coordinatewise: bool = False) -> OptimizerState:
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    v = np.zeros_like(x) if coordinatewise else 0.0
    return OptimizerState(x=x, v=v, delta=float(delta))


# The update formulas live in these helpers so that diagnostics can replay a
# logged step with exactly the same floating point operations.

def norm_update(x, v, g, delta):
    """Return ``(v_next, x_next)`` for AdaGrad-Norm."""
    v_next = v + float(np.dot(g, g))
    return v_next, x - g / np.sqrt(v_next + delta)


def coord_update(x, v, g, delta):
    """Return ``(v_next, x_next)`` for coordinatewise AdaGrad."""
    v_next = v + g * g
    return v_next, x - g / np.sqrt(v_next + delta)


def gd_update(x, g, eta):
    return x - eta * g


def _checked_gradient(p: ObjectiveProblem, x) -> NDArray[np.float64]:
    g = np.asarray(p.gradient(x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"non-finite gradient at x={x}")
    return g


def step_norm(s: OptimizerState, p: ObjectiveProblem) -> OptimizerState:
    if np.ndim(s.v) != 0:
        raise ValueError("AdaGrad-Norm needs a scalar accumulator")
    g = _checked_gradient(p, s.x)
    v, x = norm_update(s.x, s.v, g, s.delta)
    return replace(s, x=x, v=v, k=s.k + 1)


def step_coord(s: OptimizerState, p: ObjectiveProblem) -> OptimizerState:
    if np.shape(s.v) != s.x.shape:
        raise ValueError("coordinatewise AdaGrad needs one accumulator per coordinate")
    g = _checked_gradient(p, s.x)
    v, x = coord_update(s.x, s.v, g, s.delta)
    return replace(s, x=x, v=v, k=s.k + 1)


def step_gd(s: OptimizerState, p: ObjectiveProblem, eta: float) -> OptimizerState:
    if eta > 1.0 / p.lipschitz:
        warnings.warn(f"step {eta} exceeds 1/L = {1.0 / p.lipschitz}", RuntimeWarning, stacklevel=2)
    g = _checked_gradient(p, s.x)
    return replace(s, x=gd_update(s.x, g, eta), v=s.v + float(np.dot(g, g)), k=s.k + 1)


def run(
    p: ObjectiveProblem,
    algo: str,
    x0: ArrayLike,
    delta: float = 1.0,
    max_iters: int = 1000,
    stop_grad_tol: float = 0.0,
    eta: float | None = None,
) -> TrajectoryRecord:
    """Iterate one of the three methods and log every gradient evaluation.

    At most ``max_iters`` rows are recorded (row 0 is ``x0``). The run stops
    early when ``stop_grad_tol > 0`` and ``||grad F(x_k)|| <= stop_grad_tol``.
    A NaN or infinite value/gradient ends the run; the partial log is returned
    with ``error`` set.

    ``eta`` is the gradient-descent step and defaults to ``1/L``.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be strictly positive")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.shape != (p.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, problem dimension is {p.dimension}")
    if algo == "gd":
        eta = 1.0 / p.lipschitz if eta is None else float(eta)
        if eta > 1.0 / p.lipschitz:
            warnings.warn(f"step {eta} exceeds 1/L = {1.0 / p.lipschitz}", RuntimeWarning, stacklevel=2)

    coord = algo == "adagrad"
    n = p.dimension
    xs = np.empty((max_iters, n))
    gs = np.empty((max_iters, n))
    vs = np.empty((max_iters, n)) if coord else np.empty(max_iters)
    steps = np.empty_like(vs)
    Fs = np.empty(max_iters)
    v = np.zeros(n) if coord else 0.0
    error = None
    rows = 0
    for k in range(max_iters):
        f = float(p.value(x))
        g = np.asarray(p.gradient(x), dtype=float)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            error = f"non-finite objective or gradient at iteration {k}"
            logger.warning(error)
            break
        if algo == "adagrad-norm":
            v_next, x_next = norm_update(x, v, g, delta)
            step = 1.0 / np.sqrt(v_next + delta)
        elif coord:
            v_next, x_next = coord_update(x, v, g, delta)
            step = 1.0 / np.sqrt(v_next + delta)
        else:
            v_next, x_next = v + float(np.dot(g, g)), gd_update(x, g, eta)
            step = eta
        xs[k], gs[k], vs[k], Fs[k], steps[k] = x, g, v_next, f, step
        rows = k + 1
        if stop_grad_tol > 0 and np.linalg.norm(g) <= stop_grad_tol:
            break
        x, v = x_next, v_next

    return TrajectoryRecord(
        algo=algo,
        delta=float(delta),
        x=xs[:rows],
        g=gs[:rows],
        v=vs[:rows],
        F=Fs[:rows],
        step=steps[:rows],
        problem=p.name,
        error=error,
    )
