import math
from dataclasses import replace

import numpy as np
import pytest

from divens.attacks import (
    ATTACK_METHODS,
    AttackConfig,
    adversarial_loss,
    bim,
    clip_ball,
    cw,
    cw_margin,
    ead,
    fgsm,
    jsma,
    mim,
    pgd,
    pgd_start,
    run_attack,
    saliency_map,
    soft_threshold,
    tanh_image,
    victim_predict,
)
from divens.attacks.optimization import _margin_loss
from divens.models import Ensemble, Mlp, MlpConfig, ModelParams
from divens.numgrad import Graph
from divens.rng import derive_rng


def _build_ensemble(size: int = 3, seed: int = 0) -> Ensemble:
    config = MlpConfig(input_dim=6, hidden_layers=(10,), num_classes=5)
    return Ensemble.initialize(config, size, seed)


def _build_batch(n: int = 8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = derive_rng(seed, "test-batch")
    return rng.uniform(size=(n, 6)), rng.integers(5, size=n)


def test_clip_ball_respects_box_and_budget() -> None:
    x = np.array([[0.0, 0.5, 0.98]])
    out = clip_ball(x, np.array([[-1.0, 0.9, 2.0]]), 0.05)
    np.testing.assert_allclose(out, [[0.0, 0.55, 1.0]])
    per_example = clip_ball(
        np.full((2, 2), 0.5), np.ones((2, 2)), np.array([0.1, 0.2])
    )
    np.testing.assert_allclose(per_example, [[0.6, 0.6], [0.7, 0.7]])


def test_fgsm_is_single_step_bim() -> None:
    ens = _build_ensemble()
    x, y = _build_batch()
    cfg = AttackConfig(method="bim", eps=0.1, steps=1)
    np.testing.assert_array_equal(
        fgsm(ens, x, y, replace(cfg, method="fgsm")).adversarials, bim(ens, x, y, cfg).adversarials
    )


def test_pgd_without_random_start_is_bim() -> None:
    ens = _build_ensemble()
    x, y = _build_batch()
    cfg = AttackConfig(method="pgd", eps=0.08, steps=5, random_init=False)
    np.testing.assert_array_equal(
        pgd(ens, x, y, cfg).adversarials, bim(ens, x, y, replace(cfg, method="bim")).adversarials
    )


def test_mim_without_decay_follows_the_gradient_sign() -> None:
    ens = _build_ensemble()
    x, y = _build_batch()
    cfg = AttackConfig(method="mim", eps=0.08, steps=4, momentum_decay=0.0)
    np.testing.assert_array_equal(
        mim(ens, x, y, cfg).adversarials, bim(ens, x, y, replace(cfg, method="bim")).adversarials
    )


@pytest.mark.parametrize("method", ["fgsm", "bim", "pgd", "mim"])
def test_ball_attacks_stay_in_the_ball(method: str) -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=10)
    batch = run_attack(ens, x, y, AttackConfig(method=method, eps=0.05, steps=5))
    assert np.all(batch.linf <= 0.05 + 1e-12)
    assert np.all((batch.adversarials >= 0.0) & (batch.adversarials <= 1.0))
    assert batch.method == method and batch.victim == "ensemble"


def test_zero_budget_leaves_inputs_unchanged() -> None:
    ens = _build_ensemble()
    x, y = _build_batch()
    batch = pgd(ens, x, y, AttackConfig(method="pgd", eps=0.0))
    np.testing.assert_array_equal(batch.adversarials, x)
    np.testing.assert_array_equal(batch.success, victim_predict(ens, x) != y)


def test_pgd_increases_the_ensemble_loss() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=20)
    batch = pgd(ens, x, y, AttackConfig(method="pgd", eps=0.1, steps=10))
    clean, _ = adversarial_loss(ens, x, y)
    attacked, _ = adversarial_loss(ens, batch.adversarials, y)
    assert attacked > clean


def test_pgd_start_is_keyed_by_example_index() -> None:
    x, _ = _build_batch(n=4)
    start = pgd_start(x, 0.1, seed=7, indices=np.arange(4))
    reordered = pgd_start(x[::-1], 0.1, seed=7, indices=np.arange(4)[::-1])
    np.testing.assert_array_equal(reordered, start[::-1])
    assert np.all(np.abs(start - x) <= 0.1 + 1e-12)
    assert not np.array_equal(start, pgd_start(x, 0.1, seed=8, indices=np.arange(4)))


def test_attacks_are_deterministic() -> None:
    ens = _build_ensemble()
    x, y = _build_batch()
    cfg = AttackConfig(method="pgd", eps=0.1, steps=3, seed=5)
    np.testing.assert_array_equal(
        run_attack(ens, x, y, cfg).adversarials, run_attack(ens, x, y, cfg).adversarials
    )


def test_drawn_targets_differ_from_labels() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=30)
    batch = fgsm(ens, x, y, AttackConfig(method="fgsm", targeted=True, seed=2))
    assert batch.targets is not None
    assert np.all(batch.targets != y)
    assert np.all((batch.targets >= 0) & (batch.targets < 5))
    again = fgsm(ens, x[5:], y[5:], AttackConfig(method="fgsm", targeted=True, seed=2), indices=np.arange(5, 30))
    np.testing.assert_array_equal(again.targets, batch.targets[5:])


def test_fixed_target_equal_to_label_is_rejected() -> None:
    ens = _build_ensemble()
    x = _build_batch(n=2)[0]
    cfg = AttackConfig(method="fgsm", targeted=True, target_label=1)
    with pytest.raises(ValueError, match="differ"):
        fgsm(ens, x, np.array([0, 1]), cfg)


def test_saliency_map_masks_wrong_directions() -> None:
    out = saliency_map([0.5, -0.1, 0.3, 0.2], [-0.4, -0.2, 0.1, -0.0])
    np.testing.assert_allclose(out, [0.2, 0.0, 0.0, 0.0])


def test_jsma_respects_its_feature_budget() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=10)
    cfg = AttackConfig(method="jsma", jsma_gamma=0.34, jsma_theta=0.2)
    batch = jsma(ens, x, y, cfg)
    assert np.all(batch.l0 <= math.ceil(0.34 * 6))
    moved = batch.delta[batch.delta != 0.0]
    assert np.all(moved > 0.0) and np.all(moved <= 0.2 + 1e-12)
    np.testing.assert_array_equal(batch.success, victim_predict(ens, batch.adversarials) != y)


def test_jsma_skips_examples_already_misclassified() -> None:
    ens = _build_ensemble()
    x, _ = _build_batch(n=10)
    pred = victim_predict(ens, x)
    wrong = (pred + 1) % 5
    batch = jsma(ens, x, wrong, AttackConfig(method="jsma"))
    np.testing.assert_array_equal(batch.adversarials, x)
    assert np.all(batch.success)


def test_cw_margin_values() -> None:
    assert cw_margin([2.0, 5.0], 0) == 3.0
    assert cw_margin([5.0, 2.0], 0, kappa=1.0) == -1.0
    assert cw_margin([5.0, 2.0], 0) == 0.0
    assert cw_margin([5.0, 2.0], 0, targeted=False) == 3.0
    assert cw_margin([2.0, 5.0], 0, kappa=1.0, targeted=False) == -1.0


@pytest.mark.parametrize("targeted", [False, True])
def test_cw_margin_matches_the_attack_objective(targeted: bool) -> None:
    z = derive_rng(4, "test-logits").normal(size=(6, 5))
    labels = np.array([0, 1, 2, 3, 4, 0])
    graph = Graph()
    batch = _margin_loss(graph.constant(z), labels, 0.5, targeted).data
    expected = [cw_margin(row, label, kappa=0.5, targeted=targeted) for row, label in zip(z, labels)]
    np.testing.assert_allclose(batch, expected, rtol=0, atol=1e-15)


def test_soft_threshold_and_tanh_image() -> None:
    np.testing.assert_allclose(soft_threshold(np.array([0.3, -0.05, -0.4]), 0.1), [0.2, 0.0, -0.3])
    np.testing.assert_allclose(tanh_image(np.array([0.0, -50.0, 50.0])), [0.5, 0.0, 1.0])


def test_elastic_net_without_l1_reproduces_cw() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=4)
    cfg = AttackConfig(method="cw", opt_steps=20, opt_lr=0.05, cw_c=5.0)
    first = cw(ens, x, y, cfg)
    second = ead(ens, x, y, replace(cfg, method="ead", ead_beta=0.0))
    np.testing.assert_array_equal(first.adversarials, second.adversarials)
    np.testing.assert_array_equal(first.objective_trace, second.objective_trace)


def test_optimisation_attacks_stay_in_the_box() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=4)
    for method in ("cw", "ead"):
        batch = run_attack(ens, x, y, AttackConfig(method=method, opt_steps=15, cw_c=10.0))
        assert np.all((batch.adversarials >= 0.0) & (batch.adversarials <= 1.0))
        assert batch.objective_trace is not None and len(batch.objective_trace) == 16


def test_member_victim_decides_success() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=12)
    batch = run_attack(ens, x, y, AttackConfig(method="pgd", eps=0.1, victim=1))
    assert batch.victim == "member1"
    np.testing.assert_array_equal(batch.success, victim_predict(ens, batch.adversarials, 1) != y)


def test_registry_covers_every_method() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=3)
    for method in ATTACK_METHODS:
        cfg = AttackConfig(method=method, steps=2, opt_steps=3)
        assert len(run_attack(ens, x, y, cfg)) == 3


def test_registry_rejects_bad_requests() -> None:
    ens = _build_ensemble()
    x, y = _build_batch(n=3)
    with pytest.raises(ValueError, match="budget"):
        run_attack(ens, x, y, AttackConfig(method="jsma"), eps=0.1)
    with pytest.raises(ValueError, match="victim"):
        run_attack(ens, x, y, AttackConfig(victim=3))
    with pytest.raises(ValueError):
        run_attack(ens, x + 2.0, y, AttackConfig())


def test_attack_config_validation() -> None:
    with pytest.raises(ValueError, match="method"):
        AttackConfig(method="deepfool")
    with pytest.raises(ValueError, match="eps"):
        AttackConfig(eps=-0.1)
    with pytest.raises(ValueError, match="target_label"):
        AttackConfig(target_label=2)
    with pytest.raises(ValueError, match="jsma_gamma"):
        AttackConfig(jsma_gamma=0.0)
    assert AttackConfig(eps=0.1, steps=4).alpha == pytest.approx(0.025)


@pytest.mark.parametrize("method", ["fgsm", "bim", "pgd", "mim"])
def test_ball_invariants_on_many_examples(method: str) -> None:
    ens = _build_ensemble(seed=1)
    rng = derive_rng(1, "test-many")
    x = rng.uniform(size=(1000, 6))
    x[:100] = np.round(x[:100])
    y = rng.integers(5, size=1000)
    batch = run_attack(ens, x, y, AttackConfig(method=method, eps=0.07, steps=5, seed=3))
    assert np.all(batch.linf <= 0.07 + 1e-12)
    assert np.all((batch.adversarials >= 0.0) & (batch.adversarials <= 1.0))


def test_single_step_mim_is_fgsm_for_any_decay() -> None:
    ens = _build_ensemble()
    x, y = _build_batch()
    expected = fgsm(ens, x, y, AttackConfig(method="fgsm", eps=0.1)).adversarials
    for decay in (0.0, 0.5, 1.0, 3.0):
        cfg = AttackConfig(method="mim", eps=0.1, steps=1, momentum_decay=decay)
        np.testing.assert_array_equal(mim(ens, x, y, cfg).adversarials, expected)


@pytest.mark.parametrize(
    "kwargs",
    [{}, {"victim": 2}, {"loss": "member_sum"}, {"targeted": True, "target": np.array([1, 2, 3, 4])}],
)
def test_adversarial_loss_gradient_matches_finite_differences(kwargs) -> None:
    ens = _build_ensemble(seed=2)
    x, _ = _build_batch(n=4, seed=2)
    y = np.array([0, 1, 2, 3])
    _, grad = adversarial_loss(ens, x, y, **kwargs)
    h = 1e-5
    worst = 0.0
    for index in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[index] += h
        minus[index] -= h
        fd = (adversarial_loss(ens, plus, y, **kwargs)[0] - adversarial_loss(ens, minus, y, **kwargs)[0]) / (2 * h)
        worst = max(worst, abs(grad[index] - fd) / (abs(fd) + 1e-8))
    assert worst < 1e-4


def test_jsma_passes_over_saturated_features() -> None:
    # feature 0 has the largest saliency toward class 1 but already sits at 1.0
    config = MlpConfig(input_dim=3, hidden_layers=(), num_classes=2)
    weights = np.array([[0.0, 3.0], [0.0, 1.0], [0.0, 0.5]])
    member = Mlp(config=config, params=ModelParams(weights=(weights,), biases=(np.array([10.0, 0.0]),)))
    ens = Ensemble(members=(member,))
    x = np.array([[1.0, 0.2, 0.2]])
    batch = jsma(ens, x, np.array([0]), AttackConfig(method="jsma", jsma_gamma=0.5, jsma_theta=0.2))
    np.testing.assert_allclose(batch.delta, [[0.0, 0.2, 0.2]])
    assert batch.l0[0] == 2
