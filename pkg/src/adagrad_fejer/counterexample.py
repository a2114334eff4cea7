"""A divergent AdaGrad sequence for a convex function on (-1/2, 1/2).

The iterates alternate between the two ends of the interval:

    x_{2k}   =  1/2 - 2^{-(k+1)}
    x_{2k+1} = -1/2 + 2^{-(k+2)}

and the derivative values ``z_k`` are chosen so that one AdaGrad-Norm step
with ``delta = 15`` maps ``x_k`` to ``x_{k+1}``. Interpolating the knots
``(x_k, z_k)`` affinely gives a non-decreasing derivative, i.e. a convex
function whose AdaGrad trajectory oscillates with amplitude tending to 1.

Re-running AdaGrad against the interpolated derivative is badly conditioned:
near the knots the derivative's slope grows like ``|z_k| 2^k``, so a rounding
error in ``x`` is amplified by a factor ~100 per step and float64 loses the
trajectory after about ten steps. The rerun therefore uses ``mpmath`` with a
working precision that grows with ``K`` (see :func:`default_precision`).
"""

from __future__ import annotations

import bisect
import contextlib
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np
from numpy.typing import NDArray

from .checks import Verdict, tolerance
from .fejer import convergence_certificate
from .trajectory import TrajectoryRecord

DELTA = 15.0
Z0 = 1.0
DEFAULT_K = 12
MAX_K = 20


class DomainError(ValueError):
    """An iterate left the interval on which the derivative is interpolated."""


def default_precision(K: int) -> int:
    """Decimal digits for the rerun; about ``0.35 K^2`` digits are lost to conditioning."""
    return 40 + (K * K) // 2


def _check_K(K: int, minimum: int = 1) -> None:
    if not minimum <= K <= MAX_K:
        raise ValueError(f"K must be in [{minimum}, {MAX_K}], got {K}")


def gen_x(K: int, dps: int | None = None) -> list:
    """Closed-form iterates ``x_0 .. x_{2K+1}``.

    Values are dyadic rationals, exact both as floats and as ``mpf``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    half, two, ctx = (0.5, 2.0, contextlib.nullcontext()) if dps is None else (
        mpmath.mpf(0.5), mpmath.mpf(2), mpmath.workdps(dps))
    xs = []
    with ctx:
        for k in range(K + 1):
            xs.append(half - two ** -(k + 1))
            xs.append(-half + two ** -(k + 2))
    return xs


def gen_z(xs, delta: float = DELTA, z0: float = Z0, dps: int | None = None) -> list:
    """Derivative values ``z_0 .. z_{len(xs)-2}``.

    ``z_k`` for ``k >= 1`` has magnitude
    ``gap / sqrt(1 - gap^2) * sqrt(delta + sum_{i<k} z_i^2)`` with
    ``gap = |x_{k+1} - x_k|`` and sign ``(-1)^k``; this makes
    ``z_k / sqrt(delta + sum_{i<=k} z_i^2) = x_k - x_{k+1}``.
    """
    if dps is None:
        sqrt, conv, ctx = math.sqrt, float, contextlib.nullcontext()
    else:
        sqrt, conv, ctx = mpmath.sqrt, mpmath.mpf, mpmath.workdps(dps)
    with ctx:
        d = conv(delta)
        z = [conv(z0)]
        total = z[0] * z[0]
        for k in range(1, len(xs) - 1):
            gap = abs(conv(xs[k + 1]) - conv(xs[k]))
            if not gap < 1:
                raise ValueError(f"gap |x_{k + 1} - x_{k}| = {float(gap)} must be < 1")
            mag = gap / sqrt(1 - gap * gap) * sqrt(d + total)
            zk = -mag if k % 2 else mag
            z.append(zk)
            total += zk * zk
    return z


def check_technical_lemma(b: float, delta: float, c: float) -> float:
    """``|a^2 / (delta + c + a^2) - b^2|`` for ``a = b / sqrt(1 - b^2) * sqrt(delta + c)``."""
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    if not delta > 0 or c < 0:
        raise ValueError("need delta > 0 and c >= 0")
    a = b / math.sqrt(1.0 - b * b) * math.sqrt(delta + c)
    return abs(a * a / (delta + c + a * a) - b * b)


@dataclass
class PiecewiseAffineDerivative:
    """Non-decreasing piecewise-affine map through the knots ``(x_k, z_k)``.

    Right of ``x_0`` it interpolates the even knots, left of ``x_0`` the odd
    knots together with ``(x_0, z_0)``. Knot lists are sorted increasingly.
    """

    left_x: list
    left_z: list
    right_x: list
    right_z: list
    dps: int

    @property
    def x0(self):
        return self.right_x[0]

    @property
    def domain(self) -> tuple:
        return self.left_x[0], self.right_x[-1]

    def _locate(self, x, slack: float):
        lo, hi = self.domain
        if x < lo:
            if lo - x > slack:
                raise DomainError(f"x = {mpmath.nstr(x, 17)} is left of the domain [{float(lo)}, {float(hi)}]")
            x = lo
        elif x > hi:
            if x - hi > slack:
                raise DomainError(f"x = {mpmath.nstr(x, 17)} is right of the domain [{float(lo)}, {float(hi)}]")
            x = hi
        knots_x, knots_z = (self.right_x, self.right_z) if x >= self.x0 else (self.left_x, self.left_z)
        j = min(max(bisect.bisect_right(knots_x, x) - 1, 0), len(knots_x) - 2)
        return x, knots_x, knots_z, j

    def __call__(self, x, slack: float = 0.0):
        with mpmath.workdps(self.dps):
            x, kx, kz, j = self._locate(mpmath.mpf(x), slack)
            t = (x - kx[j]) / (kx[j + 1] - kx[j])
            return kz[j] + t * (kz[j + 1] - kz[j])

    def evaluate(self, xs) -> NDArray[np.float64]:
        return np.array([float(self(x)) for x in xs])

    def antiderivative(self, x, slack: float = 0.0):
        """``f(x) = integral from x_0 to x`` of the derivative, exact on each affine piece."""
        with mpmath.workdps(self.dps):
            x, kx, kz, j = self._locate(mpmath.mpf(x), slack)
            x0 = self.x0
            if x >= x0:
                total = mpmath.mpf(0)
                for i in range(j):
                    total += (kx[i + 1] - kx[i]) * (kz[i] + kz[i + 1]) / 2
                gx = self(x)
                return total + (x - kx[j]) * (kz[j] + gx) / 2
            # left pieces: integrate from x up to x_0 and negate
            total = mpmath.mpf(0)
            for i in range(j + 1, len(kx) - 1):
                total += (kx[i + 1] - kx[i]) * (kz[i] + kz[i + 1]) / 2
            gx = self(x)
            total += (kx[j + 1] - x) * (gx + kz[j + 1]) / 2
            return -total


@dataclass
class CounterexampleModel:
    K: int
    delta: float
    z0: float
    dps: int
    x: list
    z: list
    derivative: PiecewiseAffineDerivative = field(repr=False)

    @property
    def x_float(self) -> NDArray[np.float64]:
        return np.array([float(t) for t in self.x])

    @property
    def z_float(self) -> NDArray[np.float64]:
        return np.array([float(t) for t in self.z])


def build_derivative(model_x: list, model_z: list, dps: int) -> PiecewiseAffineDerivative:
    """Affine interpolant of the knots, split at ``x_0`` as described above."""
    right_x, right_z = list(model_x[0::2]), list(model_z[0::2])
    left_x = list(reversed(model_x[1::2])) + [model_x[0]]
    left_z = list(reversed(model_z[1::2])) + [model_z[0]]
    for name, kx in (("right", right_x), ("left", left_x)):
        if any(b <= a for a, b in zip(kx, kx[1:])):
            raise ValueError(f"{name} knots are not strictly increasing")
    return PiecewiseAffineDerivative(left_x, left_z, right_x, right_z, dps)


def build_model(K: int = DEFAULT_K, delta: float = DELTA, z0: float = Z0, dps: int | None = None) -> CounterexampleModel:
    """Sequences ``x_0 .. x_{2K+1}``, ``z_0 .. z_{2K+1}`` and their derivative interpolant."""
    _check_K(K)
    dps = default_precision(K) if dps is None else int(dps)
    xs = gen_x(K + 1, dps)[: 2 * K + 3]
    zs = gen_z(xs, delta, z0, dps)
    xs = xs[: 2 * K + 2]
    return CounterexampleModel(K, float(delta), float(z0), dps, xs, zs, build_derivative(xs, zs, dps))


def check_step_identity(model: CounterexampleModel) -> NDArray[np.float64]:
    """``|x_k - z_k / sqrt(delta + sum_{i<=k} z_i^2) - x_{k+1}|`` in float64, ``k < 2K+1``."""
    x, z = model.x_float, model.z_float
    out = np.empty(len(x) - 1)
    for k in range(len(x) - 1):
        s = math.fsum(t * t for t in z[: k + 1])
        out[k] = abs(x[k] - z[k] / math.sqrt(model.delta + s) - x[k + 1])
    return out


def gap_identity_residuals(model: CounterexampleModel) -> NDArray[np.float64]:
    """Relative error of ``|z_k| / sqrt(delta + sum_{i<=k} z_i^2) = |x_{k+1} - x_k|`` in float64."""
    x, z = model.x_float, model.z_float
    out = np.empty(len(x) - 1)
    for k in range(len(x) - 1):
        s = math.fsum(t * t for t in z[: k + 1])
        gap = abs(x[k + 1] - x[k])
        out[k] = abs(abs(z[k]) / math.sqrt(model.delta + s) - gap) / gap
    return out


def predicted_oscillation(k: int) -> float:
    """``x_{2k} - x_{2k+1} = 1 - 3 * 2^{-(k+2)}``."""
    return 1.0 - 3.0 * 2.0 ** -(k + 2)


def sequence_hypotheses(model: CounterexampleModel) -> dict[str, bool]:
    """Ordering and sign conditions the interpolation argument relies on."""
    x, z = model.x, model.z
    even, odd = x[0::2], x[1::2]
    ze, zo = z[0::2], z[1::2]
    knot_values = list(reversed(zo)) + [z[0]] + list(ze[1:])
    return {
        "x1_below_x0": bool(x[1] < x[0] and z[1] <= z[0]),
        "even_x_increasing": all(b > a for a, b in zip(even, even[1:])),
        "odd_x_decreasing": all(b < a for a, b in zip(odd, odd[1:])),
        "even_z_nondecreasing": all(b >= a for a, b in zip(ze, ze[1:])),
        "odd_z_nonincreasing": all(b <= a for a, b in zip(zo, zo[1:])),
        "inside_half_interval": all(abs(t) < 0.5 for t in x),
        "abs_z_increasing": all(abs(b) > abs(a) for a, b in zip(z, z[1:])),
        "signs_alternate": all((t >= 0) if k % 2 == 0 else (t <= 0) for k, t in enumerate(z)),
        "derivative_nondecreasing": all(b >= a for a, b in zip(knot_values, knot_values[1:])),
    }


@dataclass
class CounterexampleRun:
    model: CounterexampleModel
    x_rerun: list
    trajectory: TrajectoryRecord
    step_residuals: NDArray[np.float64]
    rerun_errors: NDArray[np.float64]
    verdicts: list[Verdict]
    hypotheses: dict[str, bool]
    cauchy_tail: Verdict

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def oscillation_observed(self, k: int) -> float:
        return abs(float(self.x_rerun[2 * k] - self.x_rerun[2 * k + 1]))

    def certificate(self) -> dict:
        K = self.model.K
        return {
            "K": K,
            "delta": self.model.delta,
            "z0": self.model.z0,
            "precision_digits": self.model.dps,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "hypotheses": self.hypotheses,
            "oscillation": [
                {"k": k, "predicted": predicted_oscillation(k), "observed": self.oscillation_observed(k)}
                for k in range(K + 1)
            ],
            "trajectory_cauchy_tail": self.cauchy_tail.to_dict(),
            "pass": self.passed,
        }

    def write_csv(self, path: str | Path) -> None:
        xp = self.model.x_float
        z = self.model.z_float
        n = len(xp)

        def fmt(t):
            return "" if t is None else format(float(t), ".17g")

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "x_paper", "x_rerun", "z", "gap", "oscillation_predicted",
                        "oscillation_observed", "step_residual"])
            for k in range(n):
                last = k == n - 1
                pair = k // 2 if k % 2 == 0 else None
                w.writerow([
                    k,
                    fmt(xp[k]),
                    fmt(self.x_rerun[k]),
                    fmt(z[k]),
                    fmt(None if last else abs(xp[k + 1] - xp[k])),
                    fmt(None if pair is None else predicted_oscillation(pair)),
                    fmt(None if pair is None else self.oscillation_observed(pair)),
                    fmt(None if last else self.step_residuals[k]),
                ])


def run_counterexample(K: int = DEFAULT_K, dps: int | None = None) -> CounterexampleRun:
    """Run AdaGrad-Norm (``x_0 = 0``, ``v_0 = 0``, ``delta = 15``) on the interpolated derivative.

    The rerun must reproduce the closed-form iterates within ``1e-8 (1 + k)``
    and its oscillation ``|x_{2k} - x_{2k+1}|`` must match ``1 - 3 * 2^{-(k+2)}``.
    """
    _check_K(K, minimum=2)
    model = build_model(K, dps=dps)
    deriv = model.derivative
    rerun_tol = tolerance("counterexample_rerun", 1e-8)
    n = len(model.x)
    with mpmath.workdps(model.dps):
        d = mpmath.mpf(model.delta)
        x = mpmath.mpf(0)
        v = mpmath.mpf(0)
        xs, gs, vs, steps = [], [], [], []
        for k in range(n):
            g = deriv(x, slack=rerun_tol * (1 + k))
            v = v + g * g
            step = 1 / mpmath.sqrt(v + d)
            xs.append(x)
            gs.append(g)
            vs.append(v)
            steps.append(step)
            x = x - g * step
        Fs = [deriv.antiderivative(t, slack=rerun_tol * (1 + k)) for k, t in enumerate(xs)]

    def arr(seq):
        return np.array([float(t) for t in seq])

    traj = TrajectoryRecord(
        algo="adagrad-norm",
        delta=model.delta,
        x=arr(xs)[:, None],
        g=arr(gs)[:, None],
        v=arr(vs),
        F=arr(Fs),
        step=arr(steps),
        problem="counterexample",
    )
    with mpmath.workdps(model.dps):
        errors = np.array([float(abs(a - b)) for a, b in zip(xs, model.x)])
    residuals = check_step_identity(model)
    hyp = sequence_hypotheses(model)

    scaled = errors / (1.0 + np.arange(n))
    top = K
    observed = abs(float(xs[2 * top] - xs[2 * top + 1]))
    verdicts = [
        Verdict.from_margin("counterexample_identity", -float(residuals.max()),
                            tolerance("counterexample_identity", 1e-10)),
        Verdict.from_margin("counterexample_rerun", -float(scaled.max()), rerun_tol,
                            "max_k |x_rerun_k - x_k| / (1 + k)"),
        Verdict.from_margin("oscillation_closed_form", observed - predicted_oscillation(top),
                            tolerance("oscillation_closed_form", 1e-9), f"pair k={top}"),
        Verdict("sequence_hypotheses", all(hyp.values()), detail=", ".join(k for k, ok in hyp.items() if not ok)),
    ]
    cert = convergence_certificate(traj, None, tail=min(10, n - 1), tol=tolerance("convergence", 1e-4))
    return CounterexampleRun(model, xs, traj, residuals, errors, verdicts, hyp, cert.clause("cauchy_tail"))
