import gzip
import json
import struct

import numpy as np
import pytest

from divens.dataio import (
    Checkpoint,
    DatasetSpec,
    ExperimentConfig,
    load_checkpoint,
    load_desk_dataset,
    load_idx,
    read_idx_images,
    read_idx_labels,
    report_digest,
    save_checkpoint,
    synth_blobs,
)
from divens.diversity import AdpConfig
from divens.errors import (
    CheckpointError,
    CheckpointJSONError,
    CheckpointShapeError,
    CheckpointVersionError,
    IdxFormatError,
    UsageError,
)
from divens.models import Ensemble, MlpConfig
from divens.training import TrainConfig, adp_train


def _idx_images(pixels: np.ndarray) -> bytes:
    count, rows, cols = pixels.shape
    return struct.pack(">4I", 0x00000803, count, rows, cols) + pixels.astype(np.uint8).tobytes()


def _idx_labels(labels) -> bytes:
    return struct.pack(">2I", 0x00000801, len(labels)) + bytes(labels)


def _build_idx_pair(tmp_path, n: int = 3, compress: bool = False):
    pixels = np.arange(n * 4, dtype=np.uint8).reshape(n, 2, 2) * 20
    images = _idx_images(pixels)
    labels = _idx_labels(list(range(n)))
    if compress:
        images, labels = gzip.compress(images), gzip.compress(labels)
    image_path = tmp_path / "images.idx"
    label_path = tmp_path / "labels.idx"
    image_path.write_bytes(images)
    label_path.write_bytes(labels)
    return image_path, label_path, pixels


def _build_ensemble(seed: int = 0) -> Ensemble:
    config = MlpConfig(input_dim=4, hidden_layers=(5,), num_classes=3, temperature=2.0)
    return Ensemble.initialize(config, 2, seed)


@pytest.mark.parametrize("compress", [False, True])
def test_idx_pair_loads_scaled_pixels(tmp_path, compress: bool) -> None:
    image_path, label_path, pixels = _build_idx_pair(tmp_path, compress=compress)
    data = load_idx(image_path, label_path, num_classes=3)
    assert data.features.shape == (3, 4)
    np.testing.assert_allclose(data.features, pixels.reshape(3, 4) / 255.0)
    np.testing.assert_array_equal(data.labels, [0, 1, 2])


def test_idx_bad_magic(tmp_path) -> None:
    path = tmp_path / "labels.idx"
    path.write_bytes(struct.pack(">2I", 0x00000803, 1) + b"\x00")
    with pytest.raises(IdxFormatError, match="magic") as info:
        read_idx_labels(path)
    assert info.value.context["found"] == 0x00000803


def test_idx_truncated_payload_reports_offset(tmp_path) -> None:
    path = tmp_path / "images.idx"
    path.write_bytes(_idx_images(np.zeros((2, 2, 2)))[:-3])
    with pytest.raises(IdxFormatError, match="truncated") as info:
        read_idx_images(path)
    assert info.value.context["offset"] == 21


def test_idx_truncated_header(tmp_path) -> None:
    path = tmp_path / "labels.idx"
    path.write_bytes(b"\x00\x00")
    with pytest.raises(IdxFormatError, match="header"):
        read_idx_labels(path)


def test_idx_count_mismatch(tmp_path) -> None:
    image_path, _, _ = _build_idx_pair(tmp_path)
    label_path = tmp_path / "short.idx"
    label_path.write_bytes(_idx_labels([0, 1]))
    with pytest.raises(IdxFormatError, match="does not match"):
        load_idx(image_path, label_path)


def test_synthetic_blobs_are_seeded() -> None:
    first = synth_blobs(3, num_classes=4, dim=5, n_per_class=10)
    second = synth_blobs(3, num_classes=4, dim=5, n_per_class=10)
    np.testing.assert_array_equal(first.features, second.features)
    np.testing.assert_array_equal(first.labels, second.labels)
    assert first.features.min() >= 0.0 and first.features.max() <= 1.0
    assert np.bincount(first.labels).tolist() == [10, 10, 10, 10]
    assert not np.array_equal(first.features, synth_blobs(4, num_classes=4, dim=5, n_per_class=10).features)


def test_desk_dataset_falls_back_to_blobs(tmp_path) -> None:
    spec = DatasetSpec(kind="auto", mnist_dir=str(tmp_path), num_classes=4, dim=5, n_per_class=10)
    train, test = load_desk_dataset(spec, seed=1)
    assert (train.split, test.split) == ("train", "test")
    assert len(train) + len(test) == 40
    assert len(test) == 8
    with pytest.raises(UsageError, match="MNIST"):
        load_desk_dataset(DatasetSpec(kind="mnist", mnist_dir=str(tmp_path)), seed=1)


def test_checkpoint_round_trip_is_bit_exact(tmp_path) -> None:
    ens = _build_ensemble()
    adp = AdpConfig(alpha=1.5, beta=0.25)
    path = save_checkpoint(tmp_path / "ckpt" / "model.json", ens, adp, seed=9)
    ckpt = load_checkpoint(path)
    assert isinstance(ckpt, Checkpoint)
    assert ckpt.seed == 9 and ckpt.adp == adp and ckpt.report_digest is None
    for original, loaded in zip(ens.members, ckpt.ensemble.members):
        assert loaded.config == original.config
        for a, b in zip(original.params.arrays, loaded.params.arrays):
            np.testing.assert_array_equal(a, b)


def test_checkpoint_records_the_report_digest(tmp_path) -> None:
    data = synth_blobs(0, num_classes=3, dim=4, n_per_class=10)
    config = MlpConfig(input_dim=4, hidden_layers=(5,), num_classes=3)
    ens, report = adp_train(Ensemble.initialize(config, 2, 0), data, TrainConfig(epochs=1))
    path = save_checkpoint(tmp_path / "model.json", ens, AdpConfig(), seed=0, report=report)
    assert load_checkpoint(path).report_digest == report_digest(report)
    keys = list(json.loads(path.read_text()))
    assert keys == ["format_version", "adp", "members", "seed", "report_digest"]


def test_checkpoint_version_mismatch(tmp_path) -> None:
    path = save_checkpoint(tmp_path / "model.json", _build_ensemble(), AdpConfig(), seed=0)
    doc = json.loads(path.read_text())
    doc["format_version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointVersionError) as info:
        load_checkpoint(path)
    assert info.value.context["found"] == 2


def test_checkpoint_malformed_json(tmp_path) -> None:
    path = tmp_path / "model.json"
    path.write_text('{"format_version": 1,')
    with pytest.raises(CheckpointJSONError):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.json")


def test_checkpoint_shape_mismatch_names_the_layer(tmp_path) -> None:
    path = save_checkpoint(tmp_path / "model.json", _build_ensemble(), AdpConfig(), seed=0)
    doc = json.loads(path.read_text())
    doc["members"][1]["weights"][1] = [[0.0] * 3] * 4
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointShapeError) as info:
        load_checkpoint(path)
    assert info.value.context["member"] == 1
    assert info.value.context["layer"] == 1


def test_checkpoint_refuses_non_finite_parameters(tmp_path) -> None:
    ens = _build_ensemble()
    ens.members[0].params.biases[0][0] = np.nan
    with pytest.raises(CheckpointError, match="non-finite"):
        save_checkpoint(tmp_path / "model.json", ens, AdpConfig(), seed=0)


def test_config_defaults_and_sections() -> None:
    config = ExperimentConfig.from_dict(
        {"seed": 5, "ensemble_size": 2, "train": {"epochs": 3, "adp": {"alpha": 0.0, "beta": 0.0}}}
    )
    assert config.train.seed == 5 and config.train.epochs == 3
    assert config.train.adp.is_baseline
    assert [a.method for a in config.attacks] == ["fgsm", "pgd"]
    assert ExperimentConfig.from_dict({}) == ExperimentConfig()


def test_config_rejects_unknown_keys() -> None:
    with pytest.raises(ValueError, match="unknown keys.*'train'.*lr"):
        ExperimentConfig.from_dict({"train": {"lr": 0.1}})
    with pytest.raises(ValueError, match="unknown keys"):
        ExperimentConfig.from_dict({"attacks": [{"method": "pgd", "radius": 0.1}]})
    with pytest.raises(ValueError, match="top level"):
        ExperimentConfig.from_dict({"train": {"seed": 3}})


def test_config_file_errors(tmp_path) -> None:
    with pytest.raises(UsageError):
        ExperimentConfig.from_json(tmp_path / "absent.json")
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(UsageError, match="not valid JSON"):
        ExperimentConfig.from_json(path)


def test_config_dict_round_trip() -> None:
    config = ExperimentConfig.from_dict(
        {
            "seed": 4,
            "ensemble_size": 5,
            "dataset": {"kind": "blobs", "dim": 8},
            "model": {"hidden_layers": [16], "temperature": 2.0},
            "train": {"learning_rate": [0.01, 0.02, 0.03, 0.04, 0.05], "advt": {"attack": "fgsm"}},
            "attacks": [{"method": "cw", "cw_c": 3.0}],
            "evaluation": {"detect_method": "bim", "transfer_limit": None},
        }
    )
    doc = config.to_dict()
    assert list(doc) == ["seed", "ensemble_size", "dataset", "model", "train", "attacks", "evaluation", "output_dir"]
    assert ExperimentConfig.from_dict(json.loads(json.dumps(doc))) == config
    assert ExperimentConfig.from_dict(ExperimentConfig().to_dict()) == ExperimentConfig()


def test_config_rejects_unknown_evaluation_methods() -> None:
    with pytest.raises(ValueError, match="detect_method"):
        ExperimentConfig.from_dict({"evaluation": {"detect_method": "deepfool"}})
