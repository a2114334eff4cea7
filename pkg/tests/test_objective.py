from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adagrad_fejer.objective import (
    PROBLEMS,
    descent_lemma_check,
    get_problem,
    make_huber,
    make_problem_corpus,
    make_quadratic,
    starting_points,
)

coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


class TestMakeQuadratic:
    def test_identity(self):
        p = make_quadratic([1.0], [0.0])
        assert p.value(np.array([2.0])) == 2.0
        assert p.minimizer.tolist() == [0.0]
        assert p.lipschitz == 1.0

    def test_anisotropic_lipschitz(self):
        p = make_quadratic([1.0, 4.0], [0.0, 0.0])
        assert p.lipschitz == 4.0
        np.testing.assert_array_equal(p.minimizer, [0.0, 0.0])

    def test_shifted_minimizer(self):
        p = make_quadratic([2.0], [4.0])
        assert p.minimizer.tolist() == [2.0]
        assert p.value(p.minimizer) == 0.0

    @pytest.mark.parametrize("A", [[0.0], [1.0, -1.0]])
    def test_rejects_nonpositive_curvature(self, A):
        with pytest.raises(ValueError):
            make_quadratic(A, np.zeros(len(A)))


class TestCorpus:
    def test_contents(self):
        names = [p.name for p in make_problem_corpus()]
        assert len(names) >= 4
        assert set(names) == set(PROBLEMS)

    def test_quad1d_is_identity_quadratic(self):
        p = get_problem("quad1d")
        q = make_quadratic([1.0], [0.0])
        for x in (-3.0, 0.5, 7.0):
            assert p.value(np.array([x])) == q.value(np.array([x]))

    @pytest.mark.parametrize("x,F", [(0.5, 0.125), (1.0, 0.5), (3.0, 2.5), (-2.0, 1.5)])
    def test_huber_values(self, x, F):
        p = make_huber()
        assert p.value(np.array([x])) == pytest.approx(F)
        assert p.lipschitz == 1.0
        assert p.minimizer.tolist() == [0.0]

    def test_flat_valley_gradient(self):
        p = get_problem("flat-valley")
        np.testing.assert_array_equal(p.gradient(np.array([0.0, 7.0])), [0.0, 0.0])
        assert p.minimizer is None
        np.testing.assert_array_equal(p.nearest_minimizer([3.0, 7.0]), [0.0, 7.0])

    def test_unknown_problem_lists_corpus(self):
        with pytest.raises(KeyError, match="quad1d"):
            get_problem("nosuch")

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_gradient_vanishes_on_argmin(self, name):
        p = get_problem(name)
        for x0 in starting_points(p):
            z = p.nearest_minimizer(x0)
            assert np.linalg.norm(p.gradient(z)) <= 1e-10 * max(1.0, p.lipschitz)
            assert p.is_minimizer(z)

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_starting_points_shape(self, name):
        p = get_problem(name)
        pts = starting_points(p)
        assert len(pts) == 3
        assert all(x.shape == (p.dimension,) for x in pts)


class TestDescentLemma:
    def test_quadratic_equality(self):
        assert descent_lemma_check(get_problem("quad1d"), [0.0], [2.0]) == 0.0

    def test_degenerate_pair(self):
        p = get_problem("quad-aniso")
        x = np.array([1.0, 2.0, 3.0])
        assert descent_lemma_check(p, x, x) == 0.0

    def test_huber_random_pairs(self):
        p = get_problem("huber1d")
        rng = np.random.default_rng(1)
        worst = max(descent_lemma_check(p, rng.normal(scale=5, size=1), rng.normal(scale=5, size=1))
                    for _ in range(1000))
        assert worst <= 1e-9

    @pytest.mark.parametrize("name", list(PROBLEMS))
    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_margin_zero_everywhere(self, name, data):
        p = get_problem(name)
        x = np.array(data.draw(st.lists(coords, min_size=p.dimension, max_size=p.dimension)))
        y = np.array(data.draw(st.lists(coords, min_size=p.dimension, max_size=p.dimension)))
        scale = max(1.0, p.lipschitz * float(np.dot(y - x, y - x)))
        assert descent_lemma_check(p, x, y) <= 1e-9 * scale

    @pytest.mark.parametrize("name", list(PROBLEMS))
    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_midpoint_convexity(self, name, data):
        p = get_problem(name)
        x = np.array(data.draw(st.lists(coords, min_size=p.dimension, max_size=p.dimension)))
        y = np.array(data.draw(st.lists(coords, min_size=p.dimension, max_size=p.dimension)))
        lhs = p.value(0.5 * x + 0.5 * y)
        rhs = 0.5 * p.value(x) + 0.5 * p.value(y)
        assert lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
