"""The acceptance matrix: every corpus problem x algorithm x delta x starting point.

Each criterion returns a :class:`Criterion` row; ``verify_all`` runs them all.
Corpus runs are independent and may be evaluated in worker processes.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .adagrad import run
from .checks import Verdict, tolerance
from .counterexample import check_step_identity, check_technical_lemma, run_counterexample
from .fejer import diagnose, lemma_quadratic_bound
from .objective import PROBLEMS, descent_lemma_check, get_problem, starting_points

DELTAS = (0.1, 3.0, 100.0)
ALGOS = ("adagrad-norm", "adagrad")
ITERS = 10_000
TAIL = 100


@dataclass
class Criterion:
    name: str
    passed: bool
    summary: str
    verdicts: list[Verdict] = field(default_factory=list)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary}"


@dataclass(frozen=True)
class RunSpec:
    problem: str
    algo: str
    delta: float
    start: int
    iters: int = ITERS

    def label(self) -> str:
        return f"{self.problem}/{self.algo}/delta={self.delta:g}/x0#{self.start}"


@dataclass
class RunSummary:
    spec: RunSpec
    verdicts: dict[str, Verdict]
    digest: str
    tail_spread: float


def _digest(traj) -> str:
    h = hashlib.sha256()
    for a in (traj.x, traj.g, traj.v, traj.step, traj.F):
        h.update(np.ascontiguousarray(a, dtype=float).reshape(len(traj), -1).tobytes())
    return h.hexdigest()


def evaluate_run(spec: RunSpec) -> RunSummary:
    p = get_problem(spec.problem)
    x0 = starting_points(p)[spec.start]
    traj = run(p, spec.algo, x0, spec.delta, spec.iters)
    if traj.aborted:
        raise FloatingPointError(f"{spec.label()}: {traj.error}")
    report = diagnose(traj, p, tail=TAIL)
    spread = float(np.max(np.linalg.norm(traj.x[-TAIL - 1:] - traj.x[-1], axis=1)))
    return RunSummary(spec, {v.name: v for v in report.verdicts}, _digest(traj), spread)


def corpus_specs(iters: int = ITERS) -> list[RunSpec]:
    return [
        RunSpec(name, algo, delta, s, iters)
        for name in PROBLEMS
        for algo in ALGOS
        for delta in DELTAS
        for s in range(3)
    ]


@lru_cache(maxsize=4)
def corpus_runs(iters: int = ITERS, jobs: int = 1) -> tuple[RunSummary, ...]:
    specs = corpus_specs(iters)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return tuple(pool.map(evaluate_run, specs))
    return tuple(evaluate_run(s) for s in specs)


def _verdict_criterion(name: str, runs, verdict_names: list[str]) -> Criterion:
    failures = []
    worst = math.inf
    count = 0
    for r in runs:
        for vn in verdict_names:
            v = r.verdicts.get(vn)
            if v is None or not v.available:
                failures.append(f"{r.spec.label()}:{vn} unavailable")
                continue
            count += 1
            if math.isfinite(v.margin) and math.isfinite(v.tolerance):
                worst = min(worst, v.margin + v.tolerance)
            if not v.passed:
                failures.append(f"{r.spec.label()}:{vn} margin={v.margin:.3e} tol={v.tolerance:.1e}")
    if failures:
        return Criterion(name, False, f"{len(failures)} failing checks; first: {failures[0]}")
    return Criterion(name, True, f"{count} checks over {len(runs)} runs, min slack incl. tolerance {worst:.3e}")


# -- criteria ---------------------------------------------------------------------

def criterion_quasi_fejer(runs) -> Criterion:
    return _verdict_criterion("1 quasi-Fejer inequality (AdaGrad-Norm)",
                              [r for r in runs if r.spec.algo == "adagrad-norm"], ["quasi_fejer"])


def criterion_variable_metric(runs) -> Criterion:
    return _verdict_criterion("2 variable-metric inequality (AdaGrad)",
                              [r for r in runs if r.spec.algo == "adagrad"], ["variable_metric"])


def criterion_grad_energy(runs) -> Criterion:
    return _verdict_criterion("3 gradient-energy bounds", runs, ["grad_energy"])


def criterion_eta_summability(runs) -> Criterion:
    return _verdict_criterion("4 eta summability", runs, ["eta_summability"])


def criterion_convergence(runs) -> Criterion:
    names = ["convergence_boundedness", "convergence_cauchy_tail",
             "convergence_optimality", "convergence_metric_stabilization"]
    return _verdict_criterion(f"5 sequential convergence (tail={TAIL})", runs, names)


def quadratic_lemma_grid(z_max: int = 10_000, a_max: int = 1_000) -> dict:
    """Brute-force the quadratic lemma on ``Z = i/100``, ``a = j/100``.

    For each grid pair the smallest grid value ``b = m/100`` with
    ``Z / sqrt(Z + a) <= b`` is found; larger ``b`` only loosen the claim.
    The premise and conclusion are decided in exact integer arithmetic:

        premise     100 i^2 <= m^2 (i + j)
        conclusion  100 i - m^2 <= 10 m sqrt(j)

    The float implementation is compared against the same points with an
    allowance of four units in the last place, since ``i/100`` is not exactly
    representable.
    """
    i = np.arange(z_max + 1, dtype=np.int64)[:, None]
    j = np.arange(a_max + 1, dtype=np.int64)[None, :]
    I, J = np.broadcast_arrays(i, j)
    num, den = 100 * I * I, I + J
    m = np.ceil(np.sqrt(num / np.maximum(den, 1))).astype(np.int64)
    # float sqrt may be off by one in either direction; settle exactly
    while (low := m * m * den < num).any():
        m[low] += 1
    while (high := (m > 0) & ((m - 1) ** 2 * den >= num)).any():
        m[high] -= 1
    lhs = 100 * I - m * m
    exact_violations = int(np.count_nonzero((lhs > 0) & (lhs * lhs > 100 * m * m * J)))

    Z, a, b = I / 100.0, J / 100.0, m / 100.0
    bound = b * b + b * np.sqrt(a)
    float_violations = int(np.count_nonzero(Z > bound * (1 + 4 * np.finfo(float).eps)))
    # spot-check that the vectorised formula is the library function
    rng = np.random.default_rng(0)
    picks = rng.integers(0, Z.size, 200)
    mismatch = max(abs(lemma_quadratic_bound(a.flat[k], b.flat[k]) - bound.flat[k]) for k in picks)
    return {"pairs": int(Z.size), "exact_violations": exact_violations,
            "float_violations": float_violations, "function_mismatch": float(mismatch)}


def criterion_quadratic_lemma() -> Criterion:
    res = quadratic_lemma_grid()
    ok = res["exact_violations"] == 0 and res["float_violations"] == 0 and res["function_mismatch"] == 0.0
    return Criterion("6 quadratic lemma grid", ok,
                     f"{res['pairs']} (Z, a) pairs, exact violations {res['exact_violations']}, "
                     f"float violations {res['float_violations']}")


def criteria_counterexample(runs, K: int = 12, k_osc: int = 10) -> list[Criterion]:
    cx = run_counterexample(K)
    ident = cx.verdicts[0]
    rerun_v = cx.verdicts[1]
    res = check_step_identity(cx.model)
    a = Criterion("7a counterexample step identity", bool(ident.passed),
                  f"max residual {res.max():.3e} <= {ident.tolerance:.0e}", [ident])
    b = Criterion("7b counterexample rerun matches closed form", bool(rerun_v.passed and cx.passed),
                  f"max |x_rerun - x|/(1+k) {-rerun_v.margin:.3e} <= {rerun_v.tolerance:.0e} "
                  f"({cx.model.dps} digits)", list(cx.verdicts))
    osc = cx.oscillation_observed(k_osc)
    osc_tol = tolerance("counterexample_oscillation", 1e-3)
    conv_tol = tolerance("convergence", 1e-4)
    corpus_spread = max(r.tail_spread for r in runs)
    ok = osc >= 1.0 - osc_tol and corpus_spread <= conv_tol
    c = Criterion("7c divergence vs corpus convergence", ok,
                  f"oscillation at k={k_osc}: {osc:.6f} >= {1 - osc_tol:g}; "
                  f"max corpus tail spread {corpus_spread:.3e} <= {conv_tol:g}")
    return [a, b, c]


def criterion_technical_lemma(delta: float = 15.0) -> Criterion:
    tol = tolerance("technical_lemma", 1e-14)
    bs = np.linspace(0.005, 0.995, 100)
    cs = np.concatenate([[0.0], np.logspace(-6, 12, 99)])
    worst = max(check_technical_lemma(b, delta, c) / (1 + b * b) for b in bs for c in cs)
    return Criterion("8a technical lemma residual", worst <= tol,
                     f"max residual/(1+b^2) {worst:.3e} <= {tol:.0e} on 100x100 (b, c) grid")


def criterion_descent_lemma(seed: int = 0, pairs: int = 1000) -> Criterion:
    tol = tolerance("descent_lemma", 1e-9)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in PROBLEMS:
        p = get_problem(name)
        for _ in range(pairs):
            x = rng.normal(scale=5.0, size=p.dimension)
            y = rng.normal(scale=5.0, size=p.dimension)
            scale = max(1.0, p.lipschitz * float(np.dot(y - x, y - x)))
            worst = max(worst, descent_lemma_check(p, x, y) / scale)
    return Criterion("8b descent lemma margins", worst <= tol,
                     f"max scaled margin {worst:.3e} <= {tol:.0e} ({pairs} pairs x {len(PROBLEMS)} problems)")


def criterion_equivalence_1d(runs) -> Criterion:
    by_key = {}
    for r in runs:
        if get_problem(r.spec.problem).dimension == 1:
            by_key.setdefault((r.spec.problem, r.spec.delta, r.spec.start), {})[r.spec.algo] = r.digest
    diff = [k for k, d in by_key.items() if d["adagrad-norm"] != d["adagrad"]]
    return Criterion("9 1-D AdaGrad-Norm == AdaGrad bit for bit", not diff and bool(by_key),
                     f"{len(by_key) - len(diff)}/{len(by_key)} trajectory pairs identical")


def verify_all(seed: int = 0, jobs: int = 1, iters: int = ITERS) -> list[Criterion]:
    runs = corpus_runs(iters, jobs)
    rows = [
        criterion_quasi_fejer(runs),
        criterion_variable_metric(runs),
        criterion_grad_energy(runs),
        criterion_eta_summability(runs),
        criterion_convergence(runs),
        criterion_quadratic_lemma(),
    ]
    rows += criteria_counterexample(runs)
    rows += [criterion_technical_lemma(), criterion_descent_lemma(seed), criterion_equivalence_1d(runs)]
    return rows
