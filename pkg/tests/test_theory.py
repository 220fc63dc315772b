import numpy as np
import pytest

from divens.diversity import (
    AdpConfig,
    JsdConfig,
    PredictionSet,
    ensemble_diversity,
    nonmax_matrix,
    optimize_prediction_space,
    partition_solution,
    prediction_objective,
    run_theory_suite,
    smoothing_residual,
    solve_alpha,
    solve_ensemble_confidence,
)
from divens.diversity.theory import _partition_measures
from divens.rng import derive_rng


def test_worked_smoothing_example() -> None:
    assert solve_alpha(5, 1000, 0.9) == pytest.approx(0.61, abs=0.01)


def test_alpha_vanishes_as_confidence_approaches_one() -> None:
    values = [solve_alpha(3, 10, f) for f in (0.9, 0.99, 0.999, 0.999999)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 0.25


def test_confidence_solve_round_trips() -> None:
    confidence = solve_ensemble_confidence(3, 10, 2.0)
    assert confidence == pytest.approx(0.588, abs=1e-3)
    assert solve_alpha(3, 10, confidence) == pytest.approx(2.0, abs=1e-6)
    assert abs(smoothing_residual(3, 10, 2.0, confidence)) < 1e-9


def test_alpha_needs_confidence_above_chance() -> None:
    with pytest.raises(ValueError, match="1/L"):
        solve_alpha(3, 10, 0.1)
    with pytest.raises(ValueError):
        solve_alpha(3, 10, 1.0)


def test_partition_solution_entries() -> None:
    preds = partition_solution(3, 10, 0.7)
    rest = np.delete(preds.probs, preds.y, axis=1)
    np.testing.assert_allclose(rest[rest > 0], 0.1, atol=1e-15)
    assert np.count_nonzero(rest) == 9
    np.testing.assert_allclose(preds.probs.sum(axis=1), 1.0, atol=1e-15)
    assert ensemble_diversity(nonmax_matrix(preds)) == pytest.approx(1.0, abs=1e-10)


def test_partition_solution_averages_to_smoothed_labels() -> None:
    preds = partition_solution(3, 10, 0.7, partition=[[1, 4, 7], [2, 5, 8], [3, 6, 9]])
    assert preds.y == 0
    average = preds.ensemble_prediction
    assert average[0] == pytest.approx(0.7)
    np.testing.assert_allclose(average[1:], 0.3 / 9, atol=1e-15)


def test_partition_solution_rejects_bad_partitions() -> None:
    with pytest.raises(ValueError, match="divide"):
        partition_solution(4, 10, 0.7)
    with pytest.raises(ValueError):
        partition_solution(3, 10, 0.7, partition=[[1, 2, 3], [3, 4, 5], [6, 7, 8]])
    with pytest.raises(ValueError):
        partition_solution(3, 10, 0.7, partition=[[1, 2], [3, 4, 5, 6], [7, 8, 9]])


def test_partition_solution_beats_sampled_prediction_sets() -> None:
    cfg = AdpConfig(alpha=2.0, beta=0.5)
    optimum = prediction_objective(
        partition_solution(3, 10, solve_ensemble_confidence(3, 10, cfg.alpha)), cfg
    )
    rng = derive_rng(0, "test-feasible")
    for _ in range(1000):
        sample = PredictionSet(probs=rng.dirichlet(np.ones(10), size=3), y=0)
        assert prediction_objective(sample, cfg) >= optimum


def test_short_run_trace_layout() -> None:
    trace = optimize_prediction_space(2, 4, 1, AdpConfig(), steps=50, record_every=10, seed=3)
    assert list(trace.steps) == [0, 10, 20, 30, 40, 50]
    assert trace.iterates.shape == (6, 2, 4)
    np.testing.assert_allclose(trace.iterates.sum(axis=2), 1.0, atol=1e-12)
    assert trace.objective[-1] < trace.objective[0]
    assert trace.final.y == 1


def test_solver_is_deterministic() -> None:
    first = optimize_prediction_space(3, 10, 0, AdpConfig(), steps=30, seed=11)
    second = optimize_prediction_space(3, 10, 0, AdpConfig(), steps=30, seed=11)
    np.testing.assert_array_equal(first.iterates, second.iterates)


def test_solver_argument_checks() -> None:
    with pytest.raises(ValueError):
        optimize_prediction_space(2, 4, 0, AdpConfig(), steps=0)
    with pytest.raises(ValueError):
        optimize_prediction_space(2, 4, 4, AdpConfig(), steps=5)
    with pytest.raises(ValueError):
        optimize_prediction_space(2, 4, 0, AdpConfig(), steps=5, init="corner")


@pytest.mark.slow
def test_volume_only_problem_collapses_to_one_hot() -> None:
    for seed in range(5):
        trace = optimize_prediction_space(2, 4, 0, AdpConfig(alpha=0.0, beta=0.5), seed=seed)
        assert np.all(trace.final.probs[:, 0] > 0.99), seed


@pytest.mark.slow
def test_entropy_only_problem_matches_smoothing_factor() -> None:
    trace = optimize_prediction_space(3, 10, 0, AdpConfig(alpha=2.0, beta=0.0))
    confidence = trace.final.probs[:, 0]
    assert np.ptp(confidence) < 1e-2
    assert abs(float(np.mean(confidence)) - solve_ensemble_confidence(3, 10, 2.0)) < 1e-2


@pytest.mark.slow
def test_jsd_regularizer_reaches_the_boundary() -> None:
    for seed in range(5):
        trace = optimize_prediction_space(2, 3, 0, JsdConfig(weight=2.0), seed=seed)
        assert np.min(trace.final.probs) < 1e-4, seed


def test_partition_measures_of_the_exact_optimum() -> None:
    dots, volume, entries = _partition_measures(partition_solution(3, 10, 0.7))
    assert dots == pytest.approx(0.0, abs=1e-12)
    assert volume == pytest.approx(1.0, abs=1e-9)
    assert entries == pytest.approx(0.0, abs=1e-12)


@pytest.mark.slow
def test_random_starts_reach_the_orthogonal_partition() -> None:
    for seed in range(5):
        trace = optimize_prediction_space(3, 10, 0, AdpConfig(alpha=2.0, beta=0.5), seed=seed, init="dirichlet")
        dots, volume, entries = _partition_measures(trace.final)
        assert dots < 0.05 and volume > 0.9 and entries < 0.02, seed


@pytest.mark.slow
def test_theory_suite_passes() -> None:
    checks = run_theory_suite(seed=0)
    assert len(checks) == 8
    failed = [c.to_dict() for c in checks if not c.passed]
    assert failed == []
