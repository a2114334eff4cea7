from __future__ import annotations

import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adagrad_fejer.adagrad import run
from adagrad_fejer.fejer import (
    DiagnosticUnavailable,
    MetricSequence,
    convergence_certificate,
    coordinate_constant,
    crossing_index,
    diagnose,
    epsilon_sequence,
    eta_sequence,
    eta_summability_bound,
    grad_energy_bound_coord,
    grad_energy_bound_norm,
    lemma_quadratic_bound,
    metric_norm_sq,
    quasi_fejer_residual,
    reconstruction_error,
    variable_metric_residual,
)
from adagrad_fejer.objective import PROBLEMS, ObjectiveProblem, get_problem, make_quadratic, starting_points
from adagrad_fejer.trajectory import TrajectoryRecord

SQRT3 = math.sqrt(3.0)


@pytest.fixture(scope="module")
def quad1d_run():
    return run(get_problem("quad1d"), "adagrad-norm", [1.0], 3.0, 10_000)


def _metrics(*rows, delta=1.0):
    return MetricSequence(np.array(rows, dtype=float), delta)


def _constant_traj(z, algo="adagrad-norm", n_rows=200, delta=1.0):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    x = np.tile(z, (n_rows, 1))
    g = np.zeros_like(x)
    v = np.zeros(n_rows) if algo != "adagrad" else np.zeros_like(x)
    step = np.full(v.shape, 1.0 / math.sqrt(delta))
    return TrajectoryRecord(algo, delta, x, g, v, np.zeros(n_rows), step)


class TestMetric:
    @pytest.mark.parametrize("b,d,expected", [([1, 4], [1, 1], 5.0), ([2, 3], [1, -2], 14.0)])
    def test_norm(self, b, d, expected):
        assert metric_norm_sq(b, d) == expected

    def test_identity_metric(self):
        d = np.array([0.3, -1.2, 2.0])
        assert metric_norm_sq(np.ones(3), d) == pytest.approx(float(d @ d))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            metric_norm_sq([1.0, 0.0], [1.0, 1.0])

    def test_floor(self):
        traj = run(get_problem("quad-aniso"), "adagrad", [1.0, 1.0, 1.0], 4.0, 50)
        m = MetricSequence.from_trajectory(traj)
        assert m.metric_floor == 2.0
        assert np.all(m.b >= m.metric_floor)
        assert np.all(np.diff(m.b, axis=0) >= 0)


class TestEta:
    def test_ratio(self):
        assert eta_sequence(_metrics([2, 3], [2.2, 3.0]))[0] == pytest.approx(0.1)

    def test_constant(self):
        assert eta_sequence(_metrics([2, 3], [2, 3], [2, 3])).tolist() == [0.0, 0.0]

    def test_max_over_coordinates(self):
        assert eta_sequence(_metrics([1, 1], [1.5, 2])).tolist() == [1.0]

    def test_summability_constant(self):
        margins = eta_summability_bound(_metrics([2, 3], [2, 3], delta=4.0), 1)
        np.testing.assert_allclose(margins, [1.0, 1.5])

    def test_summability_single_step(self):
        d = 9.0
        margins = eta_summability_bound(_metrics([3.0], [6.0], delta=d), 1, delta=d)
        assert margins.tolist() == [1.0]

    def test_summability_two_d_run(self):
        traj = run(get_problem("quad-coupled"), "adagrad", [1.0, 2.0], 1.0, 200)
        assert np.all(eta_summability_bound(MetricSequence.from_trajectory(traj), 100) >= 0)

    @pytest.mark.parametrize("M", [0, 5])
    def test_summability_horizon_checked(self, M):
        with pytest.raises(ValueError):
            eta_summability_bound(_metrics([1.0], [2.0], [3.0]), M)

    @settings(max_examples=60, deadline=None)
    @given(
        delta=st.floats(1e-3, 1e3),
        incr=st.lists(st.lists(st.floats(0, 1e4), min_size=2, max_size=2), min_size=1, max_size=30),
    )
    def test_eta_properties(self, delta, incr):
        v = np.vstack([np.zeros(2), np.cumsum(np.array(incr), axis=0)])
        m = MetricSequence(np.sqrt(delta + v), delta)
        eta = eta_sequence(m)
        assert np.all(eta >= 0)
        assert math.fsum(eta) <= 2 * np.max(m.b[-1]) / math.sqrt(delta) * (1 + 1e-12)
        for M in range(1, len(m)):
            assert np.all(eta_summability_bound(m, M) >= -1e-12 * max(1.0, np.max(m.b) / math.sqrt(delta)))


class TestQuasiFejer:
    def test_first_residual(self, quad1d_run):
        r = quasi_fejer_residual(quad1d_run, [0.0], 3.0)
        assert r[0] == pytest.approx(0.25 - 1 - 1 / 3, abs=1e-15)
        assert r[0] == pytest.approx(-1.0833, abs=1e-4)

    def test_stationary(self):
        assert quasi_fejer_residual(_constant_traj([0.0]), [0.0]).tolist() == [0.0] * 199

    def test_rejects_coordinatewise(self):
        traj = run(get_problem("quad-aniso"), "adagrad", [1.0, 1.0, 1.0], 1.0, 10)
        with pytest.raises(ValueError):
            quasi_fejer_residual(traj, get_problem("quad-aniso").minimizer)

    def test_rejects_non_minimizer_witness(self, quad1d_run):
        with pytest.raises(ValueError):
            quasi_fejer_residual(quad1d_run, [0.5], problem=get_problem("quad1d"))

    def test_gd_has_no_error_term(self):
        p = get_problem("quad-aniso")
        traj = run(p, "gd", [1.0, 1.0, 1.0], 1.0, 300, eta=1 / p.lipschitz)
        assert np.all(quasi_fejer_residual(traj, p.minimizer) <= 1e-12)

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_every_witness_on_flat_argmin(self, name):
        # Fejér inequality holds for any argmin point, not only the projection
        p = get_problem(name)
        traj = run(p, "adagrad-norm", starting_points(p)[2], 0.1, 2000)
        z = p.nearest_minimizer(traj.x[0])
        for shift in (0.0, 5.0, -40.0):
            w = z.copy()
            if p.minimizer is None:
                w[1:] += shift
            scale = 1 + float(np.sum((traj.x[0] - w) ** 2))
            assert np.max(quasi_fejer_residual(traj, w, problem=p)) <= 1e-12 * scale


class TestVariableMetric:
    def test_stationary(self):
        traj = _constant_traj([1.0, 2.0], algo="adagrad")
        p = make_quadratic([1.0, 1.0], [1.0, 2.0])
        assert np.all(variable_metric_residual(traj, p.minimizer, problem=p) == 0.0)

    def test_first_step_two_d(self):
        p = make_quadratic([1.0, 1.0], [0.0, 0.0])
        traj = run(p, "adagrad", [3.0, 4.0], 9.0, 2)
        assert variable_metric_residual(traj, [0.0, 0.0])[0] <= 0

    def test_rejects_gd(self):
        traj = run(get_problem("quad1d"), "gd", [1.0], 1.0, 5)
        with pytest.raises(ValueError):
            variable_metric_residual(traj, [0.0])

    def test_epsilon(self):
        traj = run(get_problem("quad1d"), "adagrad-norm", [1.0], 4.0, 3)
        eps = epsilon_sequence(traj)
        assert eps[0] == 0.5
        assert np.all(eps >= 0)

    @settings(max_examples=25, deadline=None)
    @given(
        x0=st.lists(st.floats(-20, 20, allow_nan=False), min_size=3, max_size=3),
        delta=st.floats(1e-2, 1e2),
    )
    def test_property(self, x0, delta):
        p = get_problem("quad-aniso")
        traj = run(p, "adagrad", x0, delta, 300)
        R = variable_metric_residual(traj, p.minimizer)
        m = MetricSequence.from_trajectory(traj)
        scale = (1 + metric_norm_sq(m.b[0], traj.x[0] - p.minimizer)) * (1 + np.max(eta_sequence(m)))
        assert np.max(R) <= 1e-10 * scale


class TestQuadraticLemma:
    @pytest.mark.parametrize("a,b,expected", [(0.0, 3.0, 9.0), (4.0, 3.0, 15.0)])
    def test_values(self, a, b, expected):
        assert lemma_quadratic_bound(a, b) == expected

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            lemma_quadratic_bound(-1.0, 1.0)

    @given(
        Z=st.floats(0, 100),
        a=st.floats(0, 10),
        slack=st.floats(1.0, 3.0),
    )
    def test_contract(self, Z, a, slack):
        if Z + a == 0:
            return
        b = Z / math.sqrt(Z + a) * slack
        assert Z <= lemma_quadratic_bound(a, b) * (1 + 4 * np.finfo(float).eps)

    @given(a=st.floats(0, 10), b=st.floats(0, 10), da=st.floats(0, 5), db=st.floats(0, 5))
    def test_monotone(self, a, b, da, db):
        assert lemma_quadratic_bound(a, b) <= lemma_quadratic_bound(a + da, b + db)


class TestCrossing:
    def test_immediate(self, quad1d_run):
        assert crossing_index(quad1d_run, 1.0, 3.0).k0 == 0

    def test_never_crossed(self):
        traj = run(get_problem("quad1d"), "adagrad-norm", [1.0], 1.0, 10_000)
        cr = crossing_index(traj, 10.0, 1.0)
        assert cr.k0 is None
        assert cr.I == []

    def test_flat_valley_zero_coordinate_outside_I(self):
        p = get_problem("flat-valley")
        traj = run(p, "adagrad", [3.0, 7.0], 0.25, 1000)
        cr = crossing_index(traj, p.lipschitz)
        assert 1 not in cr.I
        assert cr.I == [0]


class TestGradEnergy:
    def test_norm_example(self, quad1d_run):
        chk = grad_energy_bound_norm(quad1d_run, get_problem("quad1d"))
        assert chk.crossing.k0 == 0
        bound = chk.bounds[0]["bound"]
        assert bound == pytest.approx(4 * 0.25 + 2 * 0.5 * SQRT3)
        assert bound == pytest.approx(2.7321, abs=1e-4)
        assert chk.bounds[0]["max_partial_sum"] == pytest.approx(1.3407, abs=1e-3)
        assert chk.verdict().passed

    def test_start_at_minimizer(self):
        traj = run(get_problem("quad1d"), "adagrad-norm", [0.0], 3.0, 20)
        chk = grad_energy_bound_norm(traj, get_problem("quad1d"))
        assert chk.bounds[0]["bound"] == 0.0
        assert chk.bounds[0]["max_partial_sum"] == 0.0
        assert chk.verdict().passed

    def test_never_crossed_cap(self):
        traj = run(get_problem("quad1d"), "adagrad-norm", [1.0], 1.0, 2000)
        # any L >= true L is a valid Lipschitz constant
        p = replace(get_problem("quad1d"), lipschitz=10.0)
        chk = grad_energy_bound_norm(traj, p)
        assert chk.bounds[0]["branch"] == "never-crossed"
        assert chk.bounds[0]["bound"] == 99.0
        assert chk.verdict().passed

    def test_unknown_minimum(self):
        base = get_problem("quad1d")
        p = ObjectiveProblem("blind", 1, base.value, base.gradient, 1.0)
        traj = run(base, "adagrad-norm", [1.0], 3.0, 10)
        with pytest.raises(DiagnosticUnavailable):
            grad_energy_bound_norm(traj, p)

    def test_constant(self):
        assert coordinate_constant(2.0, 1.0, 3) == 9.0
        assert coordinate_constant(1.0, 4.0, 3) == 0.0

    def test_coord_clamped_regime(self):
        p = get_problem("quad1d")
        traj = run(p, "adagrad", [2.0], 4.0, 100)
        chk = grad_energy_bound_coord(traj, p)
        assert chk.C == 0.0
        assert chk.crossing.I == [0]
        assert chk.crossing.k0 == 0

    def test_coord_quad_aniso(self):
        p = get_problem("quad-aniso")
        traj = run(p, "adagrad", [1.0, 1.0, 1.0], 0.1, 10_000)
        chk = grad_energy_bound_coord(traj, p)
        assert chk.verdict().passed
        assert all(c["relative_margin"] >= 0 for c in chk.bounds)

    @pytest.mark.parametrize("algo", ["adagrad-norm", "adagrad"])
    def test_partial_sums_monotone(self, algo):
        p = get_problem("huber1d")
        report = diagnose(run(p, algo, [10.0], 0.1, 500), p)
        assert np.all(np.diff(report.grad_energy_partial_sums) >= 0)


class TestConvergence:
    def test_quad1d(self, quad1d_run):
        cert = convergence_certificate(quad1d_run, get_problem("quad1d"), tail=100, tol=1e-4)
        assert cert.passed
        assert all(c.available for c in cert.clauses)

    def test_constant_trajectory(self):
        cert = convergence_certificate(_constant_traj([0.0]), get_problem("quad1d"), tail=100, tol=1e-4)
        assert cert.passed
        assert cert.clause("cauchy_tail").margin == 0.0
        assert cert.clause("optimality").margin == 0.0

    def test_tail_too_long(self):
        with pytest.raises(ValueError):
            convergence_certificate(_constant_traj([0.0], n_rows=10), tail=10)

    def test_oscillating_fails(self):
        x = np.array([[(-1.0) ** k * 0.5] for k in range(300)])
        traj = TrajectoryRecord("gd", 1.0, x, x.copy(), np.zeros(300), 0.5 * x[:, 0] ** 2, np.ones(300))
        cert = convergence_certificate(traj, get_problem("quad1d"), tail=100)
        assert not cert.clause("cauchy_tail").passed


class TestDiagnose:
    @pytest.mark.parametrize("name", list(PROBLEMS))
    @pytest.mark.parametrize("algo", ["adagrad-norm", "adagrad"])
    def test_clean_runs_pass(self, name, algo):
        p = get_problem(name)
        traj = run(p, algo, starting_points(p)[1], 3.0, 3000)
        report = diagnose(traj, p)
        assert report.passed, [v for v in report.verdicts if not v.passed]
        assert reconstruction_error(traj) == 0.0

    def test_json_fields(self, quad1d_run):
        d = json.loads(diagnose(quad1d_run, get_problem("quad1d")).to_json())
        for key in ("residuals_quasi_fejer", "residuals_variable_metric", "eta", "eps",
                    "eta_partial_sums", "grad_energy_partial_sums", "crossing_index",
                    "coordinate_set_I", "bounds", "verdicts"):
            assert key in d
        assert set(d["verdicts"][0]) >= {"name", "pass", "margin", "tolerance"}
        assert all(e >= 0 for e in d["eta"]) and all(e >= 0 for e in d["eps"])

    def test_corrupted_log_fails_reconstruction(self, quad1d_run):
        x = quad1d_run.x.copy()
        x[50, 0] += 0.1
        bad = TrajectoryRecord(quad1d_run.algo, quad1d_run.delta, x, quad1d_run.g, quad1d_run.v,
                               quad1d_run.F, quad1d_run.step)
        report = diagnose(bad, get_problem("quad1d"))
        assert not report.verdict("reconstruction").passed
        assert not report.passed

    def test_gd_run(self):
        p = get_problem("quad-aniso")
        report = diagnose(run(p, "gd", [1.0, 1.0, 1.0], 1.0, 1000, eta=1 / p.lipschitz), p)
        assert report.verdict("quasi_fejer").passed
        assert report.passed

    def test_tolerance_override(self, quad1d_run, monkeypatch):
        monkeypatch.setenv("CHECK_TOL_CONVERGENCE", "1e-300")
        traj = run(get_problem("quad1d"), "adagrad-norm", [1.0], 3.0, 30)
        report = diagnose(traj, get_problem("quad1d"), tail=10)
        assert not report.verdict("convergence_cauchy_tail").passed
