"""Smooth convex test problems and a numerical Descent-Lemma check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

Vector = NDArray[np.float64]


@dataclass(frozen=True)
class ObjectiveProblem:
    """A convex objective with an ``L``-Lipschitz gradient on all of R^n.

    ``minimizer`` is set when the argmin is a single point. Problems whose
    argmin is a larger set provide ``argmin_projection`` instead, so that
    Fejér diagnostics can pick the nearest solution as a witness.
    """

    name: str
    dimension: int
    value: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    lipschitz: float
    minimizer: Vector | None = None
    min_value: float | None = None
    argmin_projection: Callable[[Vector], Vector] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not self.lipschitz > 0:
            raise ValueError("lipschitz constant must be positive")

    def nearest_minimizer(self, x: ArrayLike) -> Vector | None:
        """Return the point of argmin closest to ``x``, if it is known."""
        if self.argmin_projection is not None:
            return np.asarray(self.argmin_projection(np.asarray(x, dtype=float)), dtype=float)
        if self.minimizer is not None:
            return self.minimizer.copy()
        return None

    def is_minimizer(self, z: ArrayLike, rtol: float = 1e-10) -> bool:
        g = self.gradient(np.asarray(z, dtype=float))
        return bool(np.linalg.norm(g) <= rtol * max(1.0, self.lipschitz))


def make_quadratic(A_diag: ArrayLike, b: ArrayLike, name: str = "quadratic") -> ObjectiveProblem:
    """Separable quadratic ``F(x) = 1/2 <diag(A)(x - c), x - c>`` with ``diag(A) c = b``.

    The minimum value is 0 and is attained at ``c``.
    """
    a = np.atleast_1d(np.asarray(A_diag, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.ndim != 1 or b.shape != a.shape:
        raise ValueError("A_diag and b must be vectors of the same length")
    if not np.all(a > 0):
        raise ValueError("all diagonal entries must be positive")
    center = b / a

    def value(x):
        d = x - center
        return 0.5 * float(np.dot(a * d, d))

    def gradient(x):
        return a * (x - center)

    return ObjectiveProblem(
        name=name,
        dimension=a.size,
        value=value,
        gradient=gradient,
        lipschitz=float(a.max()),
        minimizer=center,
        min_value=0.0,
        params={"A_diag": a.tolist(), "b": b.tolist()},
    )


def make_coupled_quadratic(
    matrix: ArrayLike = ((2.0, 1.0), (1.0, 2.0)),
    center: ArrayLike = (1.0, -1.0),
    name: str = "quad-coupled",
) -> ObjectiveProblem:
    """Non-separable quadratic ``1/2 (x - c)^T A (x - c)`` with ``A`` symmetric positive definite."""
    A = np.asarray(matrix, dtype=float)
    c = np.asarray(center, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or c.shape != (A.shape[0],):
        raise ValueError("matrix must be square and match the center's length")
    if not np.allclose(A, A.T):
        raise ValueError("matrix must be symmetric")
    eig = np.linalg.eigvalsh(A)
    if eig.min() <= 0:
        raise ValueError("matrix must be positive definite")

    def value(x):
        d = x - c
        return 0.5 * float(d @ A @ d)

    def gradient(x):
        return A @ (x - c)

    return ObjectiveProblem(
        name=name,
        dimension=c.size,
        value=value,
        gradient=gradient,
        lipschitz=float(eig.max()),
        minimizer=c,
        min_value=0.0,
        params={"matrix": A.tolist(), "center": c.tolist()},
    )


def make_huber(width: float = 1.0, name: str = "huber1d") -> ObjectiveProblem:
    """1-D Huber function: quadratic on ``[-w, w]``, affine outside.

    With ``w = 1`` this is ``x^2/2`` for ``|x| <= 1`` and ``|x| - 1/2`` otherwise.
    The gradient is 1-Lipschitz and the function is not strongly convex in
    its tails.
    """
    w = float(width)
    if not w > 0:
        raise ValueError("width must be positive")

    def value(x):
        t = abs(float(x[0]))
        return 0.5 * t * t if t <= w else w * t - 0.5 * w * w

    def gradient(x):
        return np.clip(x, -w, w)

    return ObjectiveProblem(
        name=name,
        dimension=1,
        value=value,
        gradient=gradient,
        lipschitz=1.0,
        minimizer=np.zeros(1),
        min_value=0.0,
        params={"width": w},
    )


def make_flat_valley(dimension: int = 2, curvature: float = 1.0, name: str = "flat-valley") -> ObjectiveProblem:
    """``F(x) = curvature/2 * x_1^2``; every point with ``x_1 = 0`` is a minimizer."""
    n = int(dimension)
    if n < 2:
        raise ValueError("flat valley needs at least two coordinates")
    if not curvature > 0:
        raise ValueError("curvature must be positive")
    c = float(curvature)

    def value(x):
        return 0.5 * c * float(x[0]) ** 2

    def gradient(x):
        g = np.zeros_like(x, dtype=float)
        g[0] = c * x[0]
        return g

    def project(x):
        z = np.array(x, dtype=float)
        z[0] = 0.0
        return z

    return ObjectiveProblem(
        name=name,
        dimension=n,
        value=value,
        gradient=gradient,
        lipschitz=c,
        min_value=0.0,
        argmin_projection=project,
        params={"dimension": n, "curvature": c},
    )


def _quad1d(a: float = 1.0, b: float = 0.0):
    return make_quadratic([a], [b], name="quad1d")


def _quad_aniso(A_diag=(1.0, 4.0, 0.25), b=(1.0, -2.0, 0.5)):
    return make_quadratic(A_diag, b, name="quad-aniso")


PROBLEMS: dict[str, Callable[..., ObjectiveProblem]] = {
    "quad1d": _quad1d,
    "quad-aniso": _quad_aniso,
    "quad-coupled": make_coupled_quadratic,
    "huber1d": make_huber,
    "flat-valley": make_flat_valley,
}


def get_problem(name: str, **params) -> ObjectiveProblem:
    """Build a corpus problem by name, with optional parameter overrides."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {', '.join(PROBLEMS)}") from None
    return factory(**params)


def make_problem_corpus() -> list[ObjectiveProblem]:
    return [factory() for factory in PROBLEMS.values()]


def starting_points(problem: ObjectiveProblem) -> list[Vector]:
    """Three deterministic starting points used by the experiment matrix."""
    n = problem.dimension
    signs = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    return [np.full(n, 1.0), 3.0 * signs, np.linspace(10.0, -10.0, n)]


def descent_lemma_check(p: ObjectiveProblem, x: ArrayLike, y: ArrayLike) -> float:
    """Amount by which the Descent Lemma fails at the pair ``(x, y)``.

    Returns ``max(0, |F(y) - F(x) - <grad F(x), y - x>| - L/2 ||y - x||^2)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    gap = abs(p.value(y) - p.value(x) - float(np.dot(p.gradient(x), d)))
    return max(0.0, gap - 0.5 * p.lipschitz * float(np.dot(d, d)))
