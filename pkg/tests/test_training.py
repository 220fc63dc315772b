from dataclasses import replace

import numpy as np
import pytest

from divens.dataio import Dataset, synth_blobs
from divens.diversity import AdpConfig
from divens.errors import ShapeError, TrainingDivergedError
from divens.models import Ensemble, MlpConfig
from divens.rng import derive_rng
from divens.training import AdamState, AdvTConfig, TrainConfig, adam_step, adp_train, advt_augment


def _build_blobs(seed: int = 0, n_per_class: int = 20) -> Dataset:
    return synth_blobs(seed, num_classes=10, dim=8, n_per_class=n_per_class, spread=0.1)


def _build_ensemble(data: Dataset, size: int = 3, seed: int = 0, hidden=(16,)) -> Ensemble:
    config = MlpConfig(input_dim=data.input_dim, hidden_layers=hidden, num_classes=data.num_classes)
    return Ensemble.initialize(config, size, seed)


def _build_separable(n: int = 200) -> Dataset:
    rng = derive_rng(0, "test-separable")
    points = []
    while len(points) < n:
        p = rng.uniform(size=2)
        if abs(p[0] - p[1]) > 0.1:
            points.append(p)
    features = np.array(points)
    return Dataset(features=features, labels=(features[:, 0] > features[:, 1]).astype(int), num_classes=2)


def test_adam_with_zero_gradient_keeps_parameters() -> None:
    params = (np.array([1.0, -2.0]), np.ones((2, 2)))
    new, state = adam_step(params, (np.zeros(2), np.zeros((2, 2))), AdamState.zeros(params), 0.01)
    np.testing.assert_array_equal(new[0], params[0])
    np.testing.assert_array_equal(new[1], params[1])
    assert state.t == 1


def test_adam_first_step_moves_by_the_learning_rate() -> None:
    params = (np.array([0.5]),)
    new, _ = adam_step(params, (np.array([1.0]),), AdamState.zeros(params), 0.001)
    assert params[0][0] - new[0][0] == pytest.approx(0.001, rel=1e-6)


def test_adam_update_tends_to_signed_learning_rate() -> None:
    params = (np.array([0.0, 0.0]),)
    grads = (np.array([3.0, -0.2]),)
    state = AdamState.zeros(params)
    for _ in range(2000):
        previous = params[0]
        params, state = adam_step(params, grads, state, 0.01)
    np.testing.assert_allclose(params[0] - previous, [-0.01, 0.01], rtol=1e-4)


def test_adam_shape_mismatch() -> None:
    params = (np.zeros(3),)
    with pytest.raises(ShapeError):
        adam_step(params, (np.zeros(2),), AdamState.zeros(params), 0.01)
    with pytest.raises(ShapeError):
        adam_step(params, (np.zeros(3), np.zeros(3)), AdamState.zeros(params), 0.01)


def test_config_validation() -> None:
    with pytest.raises(ValueError, match="learning_rate"):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError, match="batch_size"):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError, match="eps_range"):
        AdvTConfig(eps_range=(0.2, 0.1))
    with pytest.raises(ValueError, match="attack"):
        AdvTConfig(attack="cw")
    assert TrainConfig(learning_rate=[0.1, 0.2]).rate(1) == 0.2


def test_training_is_deterministic() -> None:
    data = _build_blobs()
    cfg = TrainConfig(epochs=2, batch_size=32, seed=4, learning_rate=0.01)
    first, report = adp_train(_build_ensemble(data), data, cfg)
    second, again = adp_train(_build_ensemble(data), data, cfg)
    for a, b in zip(first.members, second.members):
        for pa, pb in zip(a.params.arrays, b.params.arrays):
            np.testing.assert_array_equal(pa, pb)
    assert report.to_dict() == again.to_dict()


def test_report_has_one_record_per_epoch() -> None:
    data = _build_blobs()
    _, report = adp_train(_build_ensemble(data), data, TrainConfig(epochs=3, batch_size=50))
    assert [r.epoch for r in report.epochs] == [1, 2, 3]
    assert len(report.indicator_history) == 3
    assert report.final_active == (0, 1, 2)
    record = report.epochs[-1]
    assert len(record.member_accuracy) == 3 and len(record.validation_loss) == 3
    assert np.isfinite(record.median_log_diversity)


def test_baseline_matches_independent_training() -> None:
    data = _build_blobs()
    ens = _build_ensemble(data)
    cfg = TrainConfig(epochs=2, batch_size=32, learning_rate=0.01, adp=AdpConfig(alpha=0.0, beta=0.0))
    joint, _ = adp_train(ens, data, cfg)
    for k in range(ens.size):
        alone, _ = adp_train(ens.subset([k]), data, cfg)
        for pa, pb in zip(joint.members[k].params.arrays, alone.members[0].params.arrays):
            np.testing.assert_array_equal(pa, pb)


def test_members_freeze_and_training_stops() -> None:
    data = _build_blobs()
    # the first epoch always improves on an infinite best loss
    cfg = TrainConfig(epochs=5, batch_size=50, freeze_patience=1, freeze_tolerance=1e6)
    _, report = adp_train(_build_ensemble(data), data, cfg)
    assert len(report.epochs) == 2
    assert report.indicator_history == [(0, 1, 2), ()]
    assert report.final_active == ()
    assert report.frozen_at == {0: 2, 1: 2, 2: 2}


def test_single_member_learns_a_separable_problem() -> None:
    data = _build_separable()
    ens = _build_ensemble(data, size=1, hidden=())
    cfg = TrainConfig(
        epochs=50, batch_size=16, learning_rate=0.05, validation_fraction=0.0,
        adp=AdpConfig(alpha=0.0, beta=0.0),
    )
    _, report = adp_train(ens, data, cfg)
    assert report.epochs[-1].ensemble_accuracy >= 0.99


def test_training_rejects_bad_inputs() -> None:
    data = _build_blobs()
    ens = _build_ensemble(data)
    with pytest.raises(ValueError, match="empty"):
        adp_train(ens, data.take(np.arange(0)), TrainConfig())
    with pytest.raises(ValueError, match="learning rate"):
        adp_train(ens, data, TrainConfig(learning_rate=[0.1, 0.1]))


def test_non_finite_objective_names_the_batch() -> None:
    data = _build_blobs()
    ens = _build_ensemble(data, size=1)
    member = ens.members[0]
    weights = list(member.params.weights)
    weights[0] = np.full_like(weights[0], np.nan)
    broken = Ensemble(members=(member.with_params(replace(member.params, weights=tuple(weights))),))
    with pytest.raises(TrainingDivergedError) as info:
        adp_train(broken, data, TrainConfig(epochs=1, adp=AdpConfig(alpha=0.0, beta=0.0)))
    assert info.value.batch_index == 0
    assert info.value.context["epoch"] == 1


def test_advt_doubles_the_batch() -> None:
    data = _build_blobs()
    ens = _build_ensemble(data)
    x, y = data.features[:12], data.labels[:12]
    cfg = AdvTConfig(attack="pgd", eps_range=(0.01, 0.05), steps=3)
    batch = advt_augment(ens, x, y, cfg, derive_rng(0, "test-advt"), np.arange(12))
    assert len(batch) == 24
    np.testing.assert_array_equal(batch.features[:12], x)
    np.testing.assert_array_equal(batch.labels, np.concatenate([y, y]))
    assert np.all((batch.eps >= 0.01) & (batch.eps <= 0.05))
    delta = np.max(np.abs(batch.features[12:] - x), axis=1)
    assert np.all(delta <= batch.eps + 1e-9)
    assert batch.fallbacks == 0


def test_advt_with_a_fixed_budget() -> None:
    data = _build_blobs()
    ens = _build_ensemble(data)
    cfg = AdvTConfig(attack="fgsm", eps_range=(0.03, 0.03))
    batch = advt_augment(ens, data.features[:5], data.labels[:5], cfg, derive_rng(1, "test-advt"))
    np.testing.assert_array_equal(batch.eps, np.full(5, 0.03))


def test_training_with_adversarial_examples_runs() -> None:
    data = _build_blobs(n_per_class=8)
    cfg = TrainConfig(epochs=1, batch_size=40, advt=AdvTConfig(attack="fgsm"))
    _, report = adp_train(_build_ensemble(data), data, cfg)
    assert report.epochs[0].advt_fallbacks == 0


@pytest.mark.slow
def test_adp_training_raises_diversity_over_baseline() -> None:
    wins = 0
    for seed in range(5):
        data = synth_blobs(seed, num_classes=10, dim=20, n_per_class=60, spread=0.1)
        ens = _build_ensemble(data, seed=seed, hidden=(32,))
        base = TrainConfig(epochs=8, batch_size=64, seed=seed, adp=AdpConfig(alpha=0.0, beta=0.0))
        _, baseline = adp_train(ens, data, base)
        _, adp = adp_train(ens, data, replace(base, adp=AdpConfig(alpha=2.0, beta=0.5)))
        if adp.epochs[-1].median_log_diversity > baseline.epochs[-1].median_log_diversity:
            wins += 1
    assert wins >= 3


def test_first_epoch_objective_drops_below_the_initial_batch() -> None:
    data = _build_blobs()
    cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=0.01, validation_fraction=0.0)
    _, report = adp_train(_build_ensemble(data), data, cfg)
    assert report.epochs[0].objective < report.initial_objective


def test_advt_with_zero_budget_returns_the_batch_twice() -> None:
    data = _build_blobs()
    ens = _build_ensemble(data)
    x, y = data.features[:6], data.labels[:6]
    cfg = AdvTConfig(attack="fgsm", eps_range=(0.0, 0.0))
    batch = advt_augment(ens, x, y, cfg, derive_rng(2, "test-advt"))
    np.testing.assert_array_equal(batch.features, np.concatenate([x, x]))
    assert batch.fallbacks == 0
