"""Unit tests for the inexact-step engine: schedules, error models, run loop."""

import itertools

import numpy as np
import pytest

from igm_lab import (
    SQUARE,
    ComposedProblem,
    DivergedError,
    ExplicitSchedule,
    GeometricNorms,
    GeometricResidualSchedule,
    IncrementalBatchError,
    PolynomialNorms,
    PolynomialResidualSchedule,
    SyntheticError,
    ZeroError,
    expected_sq_error,
    igm_step,
    make_error,
    run,
)

TINY_FEATURES = np.array([[1.0, 0.0], [2.0, 0.0]])
TINY_LABELS = np.array([1.0, 2.0])


def tiny_problem():
    return ComposedProblem(TINY_FEATURES, TINY_LABELS, SQUARE)


def random_square_problem(seed, samples=6, features=3):
    rng = np.random.default_rng(seed)
    return ComposedProblem(
        rng.standard_normal((samples, features)), rng.standard_normal(samples), SQUARE
    )


class TestNormSchedules:
    def test_geometric_norm_values(self):
        norms = GeometricNorms(1.0, 0.25)
        assert norms.norm_at(1) == pytest.approx(0.5, abs=1e-16)
        assert norms.norm_at(2) == pytest.approx(0.25, abs=1e-16)

    def test_polynomial_norm_values(self):
        norms = PolynomialNorms(1.0, 1.0)
        assert norms.norm_at(1) == pytest.approx(1.0, abs=1e-16)
        assert norms.norm_at(2) == pytest.approx(0.5, abs=1e-16)

    def test_validation(self):
        with pytest.raises(ValueError):
            GeometricNorms(-1.0, 0.5)
        with pytest.raises(ValueError):
            GeometricNorms(1.0, 1.0)
        with pytest.raises(ValueError):
            GeometricNorms(1.0, 0.0)
        with pytest.raises(ValueError):
            PolynomialNorms(1.0, 0.0)
        with pytest.raises(ValueError):
            PolynomialNorms(-1.0, 1.0)


class TestBatchSchedules:
    def test_geometric_residual_sizes(self):
        schedule = GeometricResidualSchedule(0.5, 0.5, 100)
        assert [schedule.size_at(k) for k in range(3)] == [50, 75, 88]
        assert schedule.size_at(10_000) == 100

    def test_geometric_residual_meets_target(self):
        schedule = GeometricResidualSchedule(0.3, 0.8, 77)
        for k in range(60):
            left_out = (77 - schedule.size_at(k)) / 77
            assert left_out <= 0.3 * 0.8**k + 1e-12

    def test_polynomial_residual_sizes(self):
        schedule = PolynomialResidualSchedule(0.5, 1.0, 40)
        assert schedule.size_at(0) == 20
        assert schedule.size_at(1) == 35
        assert schedule.size_at(9) == 40
        for k in range(30):
            left_out = (40 - schedule.size_at(k)) / 40
            assert left_out <= 0.5 / (k + 1) ** 2 + 1e-12

    def test_sizes_are_nondecreasing(self):
        for schedule in (
            GeometricResidualSchedule(0.9, 0.7, 53),
            PolynomialResidualSchedule(0.9, 0.5, 53),
            ExplicitSchedule((1, 4, 9, 53), 53),
        ):
            sizes = [schedule.size_at(k) for k in range(200)]
            assert all(a <= b for a, b in zip(sizes, sizes[1:]))
            assert all(1 <= s <= 53 for s in sizes)
            assert sizes[-1] == 53

    def test_explicit_schedule_repeats_last_size(self):
        schedule = ExplicitSchedule((10, 20, 40), 100)
        assert schedule.size_at(1) == 20
        assert schedule.size_at(2) == 40
        assert schedule.size_at(5) == 40

    def test_validation(self):
        with pytest.raises(ValueError):
            GeometricResidualSchedule(0.0, 0.5, 10)
        with pytest.raises(ValueError):
            GeometricResidualSchedule(1.0, 0.5, 10)
        with pytest.raises(ValueError):
            PolynomialResidualSchedule(0.5, 0.0, 10)
        with pytest.raises(ValueError):
            ExplicitSchedule((), 10)
        with pytest.raises(ValueError):
            ExplicitSchedule((3, 2), 10)
        with pytest.raises(ValueError):
            ExplicitSchedule((0, 5), 10)
        with pytest.raises(ValueError):
            ExplicitSchedule((5, 11), 10)


class TestMakeError:
    def test_zero_model(self):
        problem = tiny_problem()
        e = make_error(ZeroError(), problem, np.zeros(2), 1, np.random.default_rng(0))
        assert np.array_equal(e, np.zeros(2))

    def test_synthetic_norm_is_exact(self):
        problem = tiny_problem()
        model = SyntheticError(GeometricNorms(4.0, 0.25))
        rng = np.random.default_rng(1)
        for k in (1, 2, 5):
            e = make_error(model, problem, np.zeros(2), k, rng)
            assert np.linalg.norm(e) == pytest.approx(np.sqrt(4.0 * 0.25**k), rel=1e-12)

    def test_synthetic_fixed_direction(self):
        problem = tiny_problem()
        model = SyntheticError(GeometricNorms(1.0, 0.25), direction=np.array([3.0, 4.0]))
        e = make_error(model, problem, np.zeros(2), 1, np.random.default_rng(0))
        assert np.allclose(e, 0.5 * np.array([0.6, 0.8]), atol=1e-15)

    def test_synthetic_rejects_zero_direction(self):
        with pytest.raises(ValueError):
            SyntheticError(GeometricNorms(1.0, 0.5), direction=np.zeros(3))

    def test_error_index_starts_at_one(self):
        problem = tiny_problem()
        with pytest.raises(ValueError):
            make_error(ZeroError(), problem, np.zeros(2), 0, np.random.default_rng(0))

    def test_two_sample_batch_error_closed_form(self):
        problem = tiny_problem()
        x = np.array([0.3, -0.2])
        model = IncrementalBatchError(ExplicitSchedule((1,), 2), selection="prefix")
        e = make_error(model, problem, x, 1, np.random.default_rng(0))
        g0 = problem.sample_gradient(0, x)
        g1 = problem.sample_gradient(1, x)
        assert np.allclose(e, (g0 - g1) / 2.0, atol=1e-14)

    def test_batch_mean_identity(self):
        # batch mean of per-sample gradients equals gradient + error
        problem = random_square_problem(3, samples=7, features=4)
        x = np.random.default_rng(9).standard_normal(4)
        model = IncrementalBatchError(ExplicitSchedule((3,), 7), selection="prefix")
        e = make_error(model, problem, x, 1, np.random.default_rng(0))
        batch_mean = problem.sample_gradients(x)[:3].mean(axis=0)
        assert np.allclose(problem.gradient(x) + e, batch_mean, atol=1e-12)

    def test_full_batch_error_is_exactly_zero(self):
        # regression: the complement sum must vanish identically, not just
        # to rounding, when the batch covers every sample
        problem = random_square_problem(5, samples=11, features=3)
        x = np.random.default_rng(2).standard_normal(3)
        model = IncrementalBatchError(ExplicitSchedule((11,), 11), selection="uniform")
        for seed in range(5):
            e = make_error(model, problem, x, 1, np.random.default_rng(seed))
            assert np.array_equal(e, np.zeros(3))

    def test_uniform_selection_depends_on_rng(self):
        problem = random_square_problem(8, samples=12, features=3)
        x = np.ones(3)
        model = IncrementalBatchError(ExplicitSchedule((4,), 12), selection="uniform")
        repeat = [make_error(model, problem, x, 1, np.random.default_rng(7)) for _ in range(2)]
        other = make_error(model, problem, x, 1, np.random.default_rng(8))
        assert np.array_equal(repeat[0], repeat[1])
        assert not np.array_equal(repeat[0], other)


class TestStep:
    def test_one_step_reaches_tiny_optimum(self):
        problem = tiny_problem()
        x1 = igm_step(problem, np.zeros(2), np.zeros(2))
        assert np.allclose(x1, [1.0, 0.0], atol=1e-15)
        assert problem.objective(x1) <= 1e-30

    def test_error_can_cancel_the_gradient(self):
        problem = tiny_problem()
        x1 = igm_step(problem, np.zeros(2), np.array([5.0, 0.0]))
        assert np.allclose(x1, np.zeros(2), atol=1e-15)

    def test_optimum_is_a_fixed_point(self):
        problem = tiny_problem()
        x = np.array([1.0, -3.5])
        assert np.allclose(igm_step(problem, x, np.zeros(2)), x, atol=1e-15)


class TestRun:
    def test_tiny_zero_run_values(self):
        problem = tiny_problem()
        traj = run(problem, ZeroError(), np.zeros(2), 3, seed=0)
        assert traj.fs[0] == pytest.approx(2.5, abs=1e-15)
        assert all(f <= 1e-30 for f in traj.fs[1:])
        assert traj.iterations == 3

    def test_array_shapes(self):
        problem = tiny_problem()
        traj = run(problem, ZeroError(), np.zeros(2), 4, seed=0)
        assert traj.xs.shape == (5, 2)
        assert traj.fs.shape == (5,)
        assert traj.grad_norms.shape == (5,)
        assert traj.errors.shape == (4, 2)
        assert traj.err_norms.shape == (4,)
        assert traj.step_norms.shape == (4,)
        assert traj.batch_sizes is None
        assert traj.dists is None
        assert np.all(np.isfinite(traj.fs))

    def test_zero_error_descends_monotonically(self):
        problem = random_square_problem(21, samples=10, features=5)
        traj = run(problem, ZeroError(), np.ones(5), 50, seed=0)
        assert np.all(np.diff(traj.fs) <= 1e-15)

    def test_error_norms_follow_one_based_indexing(self):
        problem = tiny_problem()
        model = SyntheticError(GeometricNorms(4.0, 0.25))
        traj = run(problem, model, np.zeros(2), 3, seed=0)
        assert traj.err_norms[0] == pytest.approx(1.0, rel=1e-12)
        assert traj.err_norms[1] == pytest.approx(0.5, rel=1e-12)
        assert traj.err_norms[2] == pytest.approx(0.25, rel=1e-12)

    def test_same_seed_reproduces_bitwise(self):
        problem = random_square_problem(31, samples=9, features=4)
        model = SyntheticError(GeometricNorms(0.5, 0.8))
        a = run(problem, model, np.zeros(4), 40, seed=5)
        b = run(problem, model, np.zeros(4), 40, seed=5)
        assert np.array_equal(a.xs, b.xs)
        assert np.array_equal(a.errors, b.errors)
        assert np.array_equal(a.fs, b.fs)

    def test_different_seeds_differ(self):
        problem = random_square_problem(31, samples=9, features=4)
        model = SyntheticError(GeometricNorms(0.5, 0.8))
        a = run(problem, model, np.zeros(4), 10, seed=5)
        b = run(problem, model, np.zeros(4), 10, seed=6)
        assert not np.array_equal(a.errors, b.errors)

    def test_batch_run_records_schedule_sizes(self):
        problem = random_square_problem(41, samples=20, features=3)
        schedule = GeometricResidualSchedule(0.5, 0.7, 20)
        traj = run(problem, IncrementalBatchError(schedule), np.zeros(3), 15, seed=0)
        expected = [schedule.size_at(k) for k in range(15)]
        assert traj.batch_sizes.tolist() == expected

    def test_metadata(self):
        problem = tiny_problem()
        traj = run(problem, ZeroError(), np.zeros(2), 1, seed=9)
        assert traj.seed == 9
        assert traj.problem_digest == problem.digest
        assert traj.model_label == "zero"

    def test_divergence_is_reported_with_iteration(self):
        # microscopic smoothness constant makes one enormous injected error
        # overshoot to a non-finite objective on the very next iterate
        problem = ComposedProblem(np.array([[1e-3]]), np.array([0.0]), SQUARE)
        model = SyntheticError(GeometricNorms(1e308, 0.9))
        with np.errstate(over="ignore"), pytest.raises(DivergedError) as excinfo:
            run(problem, model, np.zeros(1), 5, seed=0)
        assert excinfo.value.iteration == 1

    def test_input_validation(self):
        problem = tiny_problem()
        with pytest.raises(ValueError):
            run(problem, ZeroError(), np.zeros(2), 0, seed=0)
        with pytest.raises(ValueError):
            run(problem, ZeroError(), np.zeros(3), 5, seed=0)


class TestExpectedSqError:
    def test_full_batch_has_no_error(self):
        problem = random_square_problem(51, samples=6, features=3)
        assert expected_sq_error(problem, np.ones(3), 6) == 0.0

    def test_two_sample_closed_form(self):
        problem = tiny_problem()
        x = np.array([0.4, 1.3])
        g0 = problem.sample_gradient(0, x)
        g1 = problem.sample_gradient(1, x)
        expected = float(np.sum((g0 - g1) ** 2)) / 4.0
        assert expected_sq_error(problem, x, 1) == pytest.approx(expected, rel=1e-12)

    def test_single_sample_problem_returns_zero(self):
        problem = ComposedProblem(np.array([[1.0]]), np.array([2.0]), SQUARE)
        assert expected_sq_error(problem, np.zeros(1), 1) == 0.0

    def test_matches_exhaustive_enumeration(self):
        problem = random_square_problem(61, samples=6, features=3)
        x = np.random.default_rng(4).standard_normal(3)
        grads = problem.sample_gradients(x)
        full = grads.mean(axis=0)
        for s in range(1, 7):
            draws = [
                float(np.sum((grads[list(batch)].mean(axis=0) - full) ** 2))
                for batch in itertools.combinations(range(6), s)
            ]
            assert expected_sq_error(problem, x, s) == pytest.approx(
                float(np.mean(draws)), abs=1e-10
            )

    def test_batch_size_bounds(self):
        problem = tiny_problem()
        with pytest.raises(ValueError):
            expected_sq_error(problem, np.zeros(2), 0)
        with pytest.raises(ValueError):
            expected_sq_error(problem, np.zeros(2), 3)
