"""Numerical certificates for the quasi-Fejér convergence argument.

Every quantity is recomputed from a logged trajectory: per-step residuals of
the (variable metric) quasi-Fejér inequalities, the metric growth sequence
``eta_k``, the gradient-energy bounds and a finite-horizon convergence
certificate. Residuals are reported with the sign convention "<= 0 holds".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .adagrad import coord_update, gd_update, norm_update
from .checks import Verdict, tolerance
from .objective import ObjectiveProblem
from .summation import compensated_cumsum
from .trajectory import TrajectoryRecord


class DiagnosticUnavailable(ValueError):
    """The problem lacks information (e.g. the minimum value) a check needs."""


# -- metric ------------------------------------------------------------------

@dataclass
class MetricSequence:
    """Diagonal metrics ``B_k = diag(b_k)`` with ``b_{k,i} = sqrt(delta + v_{k,i})``.

    ``b`` has shape ``(K, n)``; scalar-accumulator runs use ``n = 1`` and the
    metric ``b_k * I``.
    """

    b: NDArray[np.float64]
    delta: float

    @classmethod
    def from_trajectory(cls, traj: TrajectoryRecord) -> "MetricSequence":
        v = traj.v_states()
        if v.ndim == 1:
            v = v[:, None]
        return cls(np.sqrt(traj.delta + v), traj.delta)

    @property
    def metric_floor(self) -> float:
        return math.sqrt(self.delta)

    def __len__(self):
        return self.b.shape[0]


def metric_norm_sq(b: ArrayLike, d: ArrayLike) -> float:
    """``||d||_B^2 = sum_i b_i d_i^2`` for ``B = diag(b)``."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if b.shape != d.shape:
        raise ValueError(f"metric has shape {b.shape}, vector has shape {d.shape}")
    if not np.all(b > 0):
        raise ValueError("metric weights must be strictly positive")
    return float(np.sum(b * d * d))


def _metric_norms_sq(b: NDArray, d: NDArray) -> NDArray:
    # row-wise metric_norm_sq; b may have a single broadcast column
    return np.sum(b * d * d, axis=1)


def eta_sequence(metrics: MetricSequence) -> NDArray[np.float64]:
    """``eta_k = max_i b_{k+1,i} / b_{k,i} - 1``."""
    b = metrics.b
    return np.max(b[1:] / b[:-1], axis=1) - 1.0


def eta_summability_margins(metrics: MetricSequence) -> NDArray[np.float64]:
    """Margins ``b_{M,i}/sqrt(delta) - sum_{k<M} (b_{k+1,i}/b_{k,i} - 1)`` for every ``M >= 1``.

    Returned array has shape ``(K - 1, n)``; row ``M - 1`` belongs to horizon ``M``.
    """
    b = metrics.b
    lhs = compensated_cumsum(b[1:] / b[:-1] - 1.0)
    return b[1:] / metrics.metric_floor - lhs


def eta_summability_bound(metrics: MetricSequence, M: int, delta: float | None = None) -> NDArray[np.float64]:
    """Per-coordinate margins of the summability bound at horizon ``M`` (>= 0 means it holds)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if M >= len(metrics):
        raise ValueError(f"horizon {M} exceeds the {len(metrics) - 1} logged metric updates")
    if delta is not None and delta != metrics.delta:
        metrics = MetricSequence(metrics.b, float(delta))
    return eta_summability_margins(metrics)[M - 1]


# -- quasi-Fejér residuals ----------------------------------------------------

def _checked_witness(xstar, traj: TrajectoryRecord, problem: ObjectiveProblem | None):
    z = np.atleast_1d(np.asarray(xstar, dtype=float))
    if z.shape != (traj.dimension,):
        raise ValueError(f"witness has shape {z.shape}, trajectory dimension is {traj.dimension}")
    if problem is not None and not problem.is_minimizer(z):
        raise ValueError("witness is not a minimizer: the inequality is only claimed on argmin")
    return z


def quasi_fejer_residual(
    traj: TrajectoryRecord,
    xstar: ArrayLike,
    delta: float | None = None,
    problem: ObjectiveProblem | None = None,
) -> NDArray[np.float64]:
    """``r_k = ||x_{k+1}-z||^2 - ||x_k-z||^2 - ||g_k||^2 / delta``.

    For gradient descent trajectories the error term is dropped (plain Fejér
    monotonicity). Not defined for coordinatewise AdaGrad.
    """
    if traj.algo == "adagrad":
        raise ValueError("scalar quasi-Fejér inequality applies to AdaGrad-Norm or gradient descent")
    delta = traj.delta if delta is None else float(delta)
    z = _checked_witness(xstar, traj, problem)
    d = traj.x - z
    dist = np.sum(d * d, axis=1)
    err = np.zeros(len(traj) - 1) if traj.algo == "gd" else np.sum(traj.g[:-1] ** 2, axis=1) / delta
    return dist[1:] - dist[:-1] - err


def epsilon_sequence(traj: TrajectoryRecord, delta: float | None = None) -> NDArray[np.float64]:
    """``eps_k = ||g_k||^2 / sqrt(delta)``."""
    delta = traj.delta if delta is None else float(delta)
    return np.sum(traj.g**2, axis=1) / math.sqrt(delta)


def variable_metric_residual(
    traj: TrajectoryRecord,
    xstar: ArrayLike,
    delta: float | None = None,
    problem: ObjectiveProblem | None = None,
) -> NDArray[np.float64]:
    """``R_k = ||x_{k+1}-z||^2_{B_{k+1}} - (1+eta_k)||x_k-z||^2_{B_k} - eps_k``."""
    if traj.algo == "gd":
        raise ValueError("variable metric inequality applies to AdaGrad trajectories")
    if delta is not None and float(delta) != traj.delta:
        traj = _with_delta(traj, float(delta))
    z = _checked_witness(xstar, traj, problem)
    metrics = MetricSequence.from_trajectory(traj)
    N = len(traj)
    b = metrics.b[:N]
    dist = _metric_norms_sq(b, traj.x - z)
    eta = eta_sequence(metrics)[: N - 1]
    eps = epsilon_sequence(traj)[: N - 1]
    return dist[1:] - (1.0 + eta) * dist[:-1] - eps


def metric_distances(traj: TrajectoryRecord, z: ArrayLike) -> NDArray[np.float64]:
    """``||x_k - z||_{B_k}`` along the trajectory."""
    metrics = MetricSequence.from_trajectory(traj)
    d = traj.x - np.asarray(z, dtype=float)
    return np.sqrt(_metric_norms_sq(metrics.b[: len(traj)], d))


def _with_delta(traj: TrajectoryRecord, delta: float) -> TrajectoryRecord:
    return replace(traj, delta=delta)


# -- gradient energy ------------------------------------------------------------

def lemma_quadratic_bound(a: float, b: float) -> float:
    """``b^2 + b sqrt(a)``: every ``Z >= 0`` with ``Z / sqrt(Z + a) <= b`` is at most this."""
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    return b * b + b * math.sqrt(a)


@dataclass
class Crossing:
    """Where the adaptive denominator first reaches ``L``.

    For scalar runs ``k0`` is the crossing iteration (``None`` if never).
    For coordinatewise runs ``per_coordinate[i]`` is ``k_i`` or ``None``,
    ``I`` lists crossing coordinates and ``k0 = max_{i in I} k_i``.
    """

    k0: int | None
    per_coordinate: list[int | None] = field(default_factory=list)

    @property
    def I(self) -> list[int]:
        return [i for i, k in enumerate(self.per_coordinate) if k is not None]


def _first_crossing(v: NDArray, L: float, delta: float) -> int | None:
    hit = np.nonzero(np.sqrt(v + delta) >= L)[0]
    return int(hit[0]) if hit.size else None


def crossing_index(traj: TrajectoryRecord, L: float, delta: float | None = None) -> Crossing:
    """Smallest logged ``k`` with ``sqrt(v_k + delta) >= L`` (per coordinate for AdaGrad)."""
    delta = traj.delta if delta is None else float(delta)
    v = traj.v_before()
    if v.ndim == 1:
        k = _first_crossing(v, L, delta)
        return Crossing(k, [k])
    per = [_first_crossing(v[:, i], L, delta) for i in range(v.shape[1])]
    hits = [k for k in per if k is not None]
    return Crossing(max(hits) if hits else None, per)


@dataclass
class GradEnergyCheck:
    """Gradient-energy bound versus logged partial sums.

    ``relative_margin`` is ``min (bound - partial sum) / max(1, bound)`` over
    every checked partial sum and coordinate.
    """

    crossing: Crossing
    C: float
    bounds: list[dict]
    relative_margin: float

    def verdict(self, tol: float | None = None) -> Verdict:
        tol = tolerance("grad_energy", 1e-12) if tol is None else tol
        return Verdict.from_margin("grad_energy", self.relative_margin, tol, "relative to max(1, bound)")

    def to_dict(self) -> dict:
        return {
            "k0": self.crossing.k0,
            "coordinate_set_I": self.crossing.I,
            "C": self.C,
            "per_coordinate": self.bounds,
            "relative_margin": self.relative_margin,
        }


def _gap_at(traj: TrajectoryRecord, p: ObjectiveProblem, k: int) -> float:
    if p.min_value is None:
        raise DiagnosticUnavailable(f"problem {p.name!r} has no known minimum value")
    return float(traj.F[k] - p.min_value)


def _crossed_bound(gap: float, v_k0: float, delta: float) -> float:
    return 4.0 * gap * gap + 2.0 * gap * math.sqrt(v_k0 + delta)


def _check_column(
    energy: NDArray, v_before: NDArray, k0: int | None, crossed: bool, gap: float, L: float, delta: float
) -> dict:
    """Check one coordinate's (or the whole norm's) gradient energy."""
    N = energy.shape[0]
    if crossed:
        bound = _crossed_bound(gap, float(v_before[k0]), delta)
        partial = compensated_cumsum(energy[k0:])
        branch = "crossed"
    else:
        bound = L * L - delta
        # v_{k+1} < L^2 - delta is only implied for logged v, i.e. k + 1 <= N - 1
        partial = compensated_cumsum(energy[: N - 1]) if N > 1 else np.zeros(0)
        branch = "never-crossed"
    worst = float(partial.max()) if partial.size else 0.0
    return {
        "branch": branch,
        "bound": bound,
        "max_partial_sum": worst,
        "relative_margin": (bound - worst) / max(1.0, abs(bound)),
    }


def grad_energy_bound_norm(traj: TrajectoryRecord, p: ObjectiveProblem, delta: float | None = None) -> GradEnergyCheck:
    """Scalar AdaGrad-Norm bound on the sum of squared gradient norms.

    After the crossing index ``k0`` the sum from ``k0`` on is bounded by
    ``4 (F(x_k0) - F*)^2 + 2 (F(x_k0) - F*) sqrt(v_k0 + delta)``; without a
    crossing every partial sum stays below ``L^2 - delta``.
    """
    delta = traj.delta if delta is None else float(delta)
    L = p.lipschitz
    cross = crossing_index(traj, L, delta)
    energy = np.sum(traj.g**2, axis=1)
    v = traj.v_before()
    if p.min_value is None:
        raise DiagnosticUnavailable(f"problem {p.name!r} has no known minimum value")
    gap = _gap_at(traj, p, cross.k0) if cross.k0 is not None else math.nan
    col = _check_column(energy, v, cross.k0, cross.k0 is not None, gap, L, delta)
    col["k0"] = cross.k0
    return GradEnergyCheck(cross, 0.0, [col], col["relative_margin"])


def coordinate_constant(L: float, delta: float, n: int) -> float:
    """``C = L / (2 delta) * n * (L^2 - delta)``, clamped at 0 when ``delta >= L^2``."""
    return max(0.0, L / (2.0 * delta) * n * (L * L - delta))


def grad_energy_bound_coord(traj: TrajectoryRecord, p: ObjectiveProblem, delta: float | None = None) -> GradEnergyCheck:
    """Per-coordinate version of the bound for coordinatewise AdaGrad.

    Coordinates in ``I`` use ``4 (F(x_k0) - F* + C)^2 + 2 (F(x_k0) - F* + C) sqrt(v_{k0,p} + delta)``;
    the others are capped by ``L^2 - delta``.
    """
    delta = traj.delta if delta is None else float(delta)
    if traj.scalar_accumulator:
        raise ValueError("coordinatewise bound needs per-coordinate accumulators")
    L = p.lipschitz
    n = traj.dimension
    if p.min_value is None:
        raise DiagnosticUnavailable(f"problem {p.name!r} has no known minimum value")
    cross = crossing_index(traj, L, delta)
    C = coordinate_constant(L, delta, n)
    gap = _gap_at(traj, p, cross.k0) + C if cross.k0 is not None else math.nan
    v = traj.v_before()
    cols = []
    for i in range(n):
        crossed = cross.per_coordinate[i] is not None
        col = _check_column(traj.g[:, i] ** 2, v[:, i], cross.k0, crossed, gap, L, delta)
        col["coordinate"] = i
        col["k_i"] = cross.per_coordinate[i]
        cols.append(col)
    margin = min(c["relative_margin"] for c in cols)
    return GradEnergyCheck(cross, C, cols, margin)


# -- convergence ----------------------------------------------------------------

@dataclass
class ConvergenceCertificate:
    clauses: list[Verdict]
    tail: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses if c.available)

    def clause(self, name: str) -> Verdict:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)


def convergence_certificate(
    traj: TrajectoryRecord,
    p: ObjectiveProblem | None = None,
    tail: int = 100,
    tol: float | None = None,
) -> ConvergenceCertificate:
    """Finite-horizon evidence of sequential convergence.

    Clauses: ``boundedness`` (all iterates finite), ``cauchy_tail`` (the last
    ``tail`` iterates within ``tol`` of the final one), ``optimality`` (final
    objective gap at most ``tol (1 + |F*|)``) and ``metric_stabilization``
    (``eta`` summed over the tail at most ``tol``). A failing clause says
    nothing about the infinite sequence, only about this log.
    """
    tol = tolerance("convergence", 1e-4) if tol is None else float(tol)
    N = len(traj)
    if not 1 <= tail < N:
        raise ValueError(f"tail must be in [1, {N - 1}] for a trajectory of {N} rows")
    norms = np.linalg.norm(traj.x, axis=1)
    bounded = Verdict("boundedness", bool(np.all(np.isfinite(norms))), float(np.max(norms)), math.nan,
                      "margin holds max_k ||x_k||")
    spread = float(np.max(np.linalg.norm(traj.x[-tail - 1:] - traj.x[-1], axis=1)))
    cauchy = Verdict.from_margin("cauchy_tail", -spread, tol, f"max tail distance {spread:.3e}")
    if p is not None and p.min_value is not None:
        gap = float(traj.F[-1] - p.min_value)
        allowed = tol * (1.0 + abs(p.min_value))
        optimal = Verdict.from_margin("optimality", -gap, allowed, f"final objective gap {gap:.3e}")
    else:
        optimal = Verdict.unavailable("optimality", "minimum value unknown")
    if traj.algo == "gd":
        eta_tail = 0.0
    else:
        eta = eta_sequence(MetricSequence.from_trajectory(traj))
        eta_tail = float(math.fsum(eta[-tail:]))
    metric = Verdict.from_margin("metric_stabilization", -eta_tail, tol, f"tail eta sum {eta_tail:.3e}")
    return ConvergenceCertificate([bounded, cauchy, optimal, metric], tail)


# -- log integrity --------------------------------------------------------------

def reconstruction_error(traj: TrajectoryRecord) -> float:
    """Largest discrepancy between logged ``(v_{k+1}, x_{k+1})`` and a replay of the update.

    The replay uses the optimizer's own update functions, so an untouched log
    reproduces bit for bit and the result is exactly 0.
    """
    worst = 0.0
    v_prev = np.zeros(traj.dimension) if traj.algo == "adagrad" else 0.0
    for k in range(len(traj)):
        x, g = traj.x[k], traj.g[k]
        if traj.algo == "adagrad-norm":
            v_next, x_next = norm_update(x, v_prev, g, traj.delta)
        elif traj.algo == "adagrad":
            v_next, x_next = coord_update(x, v_prev, g, traj.delta)
        else:
            v_next = v_prev + float(np.dot(g, g))
            x_next = gd_update(x, g, traj.step[k])
        worst = max(worst, float(np.max(np.abs(np.asarray(v_next) - traj.v[k]))))
        if k + 1 < len(traj):
            worst = max(worst, float(np.max(np.abs(x_next - traj.x[k + 1]))))
        v_prev = traj.v[k]
    return worst


# -- report ------------------------------------------------------------------------

def _list(a) -> list | None:
    if a is None:
        return None
    return np.asarray(a, dtype=float).tolist()


@dataclass
class FejerReport:
    residuals_quasi_fejer: NDArray | None
    residuals_variable_metric: NDArray | None
    eta: NDArray | None
    eps: NDArray | None
    eta_partial_sums: NDArray | None
    grad_energy_partial_sums: NDArray
    crossing_index: int | None
    coordinate_set_I: list[int]
    bounds: dict
    verdicts: list[Verdict]
    witness: NDArray | None = None
    metric_distances: NDArray | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts if v.available)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "residuals_quasi_fejer": _list(self.residuals_quasi_fejer),
            "residuals_variable_metric": _list(self.residuals_variable_metric),
            "eta": _list(self.eta),
            "eps": _list(self.eps),
            "eta_partial_sums": _list(self.eta_partial_sums),
            "grad_energy_partial_sums": _list(self.grad_energy_partial_sums),
            "crossing_index": self.crossing_index,
            "coordinate_set_I": self.coordinate_set_I,
            "bounds": self.bounds,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def diagnose(
    traj: TrajectoryRecord,
    p: ObjectiveProblem,
    tail: int = 100,
    tol: float | None = None,
) -> FejerReport:
    """Run every applicable check on ``traj`` and collect the verdicts.

    The Fejér witness is the point of argmin nearest ``x_0``. Checks that need
    an unknown minimizer or minimum value are reported as unavailable.
    The convergence tail is capped at half the trajectory length.
    """
    verdicts: list[Verdict] = []
    N = len(traj)
    if traj.dimension != p.dimension:
        raise ValueError(f"trajectory dimension {traj.dimension} does not match problem {p.name!r}")

    verdicts.append(Verdict.from_margin("reconstruction", -reconstruction_error(traj),
                                        tolerance("reconstruction", 0.0)))
    dv = np.diff(traj.v_states(), axis=0)
    verdicts.append(Verdict.from_margin("accumulator_monotone", float(np.min(dv)),
                                        tolerance("accumulator_monotone", 0.0)))

    energy = np.sum(traj.g**2, axis=1)
    adaptive = traj.algo != "gd"
    metrics = MetricSequence.from_trajectory(traj) if adaptive else None
    eta = eta_sequence(metrics) if adaptive else None
    eps = epsilon_sequence(traj) if adaptive else None

    z = p.nearest_minimizer(traj.x[0])
    if z is not None and not p.is_minimizer(z):
        z = None
    r = R = dists = None
    if traj.algo != "adagrad":
        if z is None or N < 2:
            verdicts.append(Verdict.unavailable("quasi_fejer", "no minimizer witness"))
        else:
            r = quasi_fejer_residual(traj, z, problem=p)
            scale = 1.0 + float(np.sum((traj.x[0] - z) ** 2))
            verdicts.append(Verdict.from_margin("quasi_fejer", -float(np.max(r)),
                                                tolerance("quasi_fejer", 1e-12) * scale))
    if adaptive:
        if z is None or N < 2:
            verdicts.append(Verdict.unavailable("variable_metric", "no minimizer witness"))
        else:
            R = variable_metric_residual(traj, z, problem=p)
            b0 = metrics.b[0]
            scale = (1.0 + float(np.sum(b0 * (traj.x[0] - z) ** 2))) * float(np.max(1.0 + eta[: N - 1]))
            verdicts.append(Verdict.from_margin("variable_metric", -float(np.max(R)),
                                                tolerance("variable_metric", 1e-10) * scale))
        margins = eta_summability_margins(metrics)
        scale = max(1.0, float(np.max(metrics.b)) / metrics.metric_floor)
        verdicts.append(Verdict.from_margin("eta_summability", float(np.min(margins)),
                                            tolerance("eta_summability", 1e-12) * scale))

    bounds: dict = {}
    cross = Crossing(None)
    if adaptive:
        try:
            check = grad_energy_bound_coord(traj, p) if traj.algo == "adagrad" else grad_energy_bound_norm(traj, p)
        except DiagnosticUnavailable as exc:
            verdicts.append(Verdict.unavailable("grad_energy", str(exc)))
        else:
            cross = check.crossing
            bounds = check.to_dict()
            verdicts.append(check.verdict())

    if N >= 2:
        cert = convergence_certificate(traj, p, tail=max(1, min(tail, N // 2)), tol=tol)
        verdicts += [Verdict(f"convergence_{c.name}", c.passed, c.margin, c.tolerance, c.detail)
                     for c in cert.clauses]
    if z is not None:
        dists = metric_distances(traj, z) if adaptive else np.linalg.norm(traj.x - z, axis=1)

    return FejerReport(
        residuals_quasi_fejer=r,
        residuals_variable_metric=R,
        eta=eta,
        eps=eps,
        eta_partial_sums=compensated_cumsum(eta) if adaptive else None,
        grad_energy_partial_sums=compensated_cumsum(energy),
        crossing_index=cross.k0,
        coordinate_set_I=cross.I,
        bounds=bounds,
        verdicts=verdicts,
        witness=z,
        metric_distances=dists,
    )
