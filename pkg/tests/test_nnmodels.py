import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from falldet.dataio import split, synth_samples
from falldet.nnmodels import (
    Checkpoint,
    Network,
    TrainConfig,
    TrainingDiverged,
    baseline_train_config,
    build,
    build_baseline_cnn,
    build_cam_cnn,
    build_dual_cam_cnn,
    build_fusion,
    build_sensor_mlp,
    predict,
    train,
)
from falldet.tensorcore import grad_check


def kinds(layers):
    return [(s.kind, s.units or s.filters or s.pool or s.rate or None, s.kernel) for s in layers]


# ---- structure ----------------------------------------------------------------

def test_sensor_mlp_layers():
    spec = build_sensor_mlp()
    assert spec.branches[0].in_shape == (28,)
    assert kinds(spec.head) == [
        ("Dense", 2000, None), ("ReLU", None, None), ("BatchNorm", None, None),
        ("Dense", 600, None), ("ReLU", None, None), ("BatchNorm", None, None),
        ("Dropout", 0.2, None), ("Dense", 12, None), ("Softmax", None, None),
    ]


def test_sensor_mlp_parameter_count_matches_layer_arithmetic():
    net = Network(build_sensor_mlp())
    expected = 28 * 2000 + 2000 + 2 * 2000 + 2000 * 600 + 600 + 2 * 600 + 600 * 12 + 12
    assert net.parameter_count() == expected == 1_271_012


def test_cam_cnn_layers_and_flatten_width():
    spec = build_cam_cnn()
    (branch,) = spec.branches
    assert kinds(branch.layers) == [
        ("Conv2D", 16, 3), ("ReLU", None, None), ("BatchNorm", None, None), ("MaxPool2D", 2, None), ("Flatten", None, None),
    ]
    assert branch.out_shape() == (16 * 15 * 15,) == (3600,)
    assert kinds(spec.head) == [
        ("Dense", 200, None), ("ReLU", None, None), ("Dropout", 0.2, None), ("Dense", 12, None), ("Softmax", None, None),
    ]


def test_dual_cam_cnn_branches_and_concat():
    spec = build_dual_cam_cnn()
    assert [b.input for b in spec.branches] == ["cam1", "cam2"]
    for b in spec.branches:
        assert kinds(b.layers) == [
            ("Conv2D", 15, 3), ("ReLU", None, None), ("MaxPool2D", 2, None), ("BatchNorm", None, None), ("Flatten", None, None),
        ]
        assert b.out_shape() == (3375,)
    assert spec.concat_width() == 6750
    assert [s.units for s in spec.head if s.kind == "Dense"] == [400, 200, 12]
    assert [s.rate for s in spec.head if s.kind == "Dropout"] == [0.2]


def test_fusion_branches_and_head():
    spec = build_fusion()
    roles = {b.input: b for b in spec.branches}
    assert set(roles) == {"cam1", "cam2", "sensor"}
    sensor = roles["sensor"]
    assert sensor.in_shape == (1, 28)
    assert kinds(sensor.layers) == [
        ("Conv1D", 10, 3), ("ReLU", None, None), ("MaxPool1D", 2, None), ("BatchNorm", None, None), ("Flatten", None, None),
    ]
    assert sensor.out_shape() == (130,)
    assert roles["cam1"].layers == build_dual_cam_cnn().branches[0].layers
    assert spec.concat_width() == 3375 + 3375 + 130 == 6880
    assert [s.units for s in spec.head if s.kind == "Dense"] == [600, 1200, 12]
    assert spec.head[-3].kind == "Dropout" and spec.head[-3].rate == 0.2


def test_baseline_cnn_shapes():
    from falldet.tensorcore import output_shape

    spec = build_baseline_cnn()
    shape, trail = (1, 32, 32), []
    for layer in spec.branches[0].layers:
        shape = output_shape(layer, shape)
        if layer.kind in ("Conv2D", "MaxPool2D", "Flatten"):
            trail.append(shape)
    assert trail == [(8, 30, 30), (8, 15, 15), (16, 13, 13), (16, 6, 6), (32, 4, 4), (32, 2, 2), (128,)]
    assert [s.kind for s in spec.head] == ["Dense", "Softmax"]


def test_baseline_training_preset():
    cfg = baseline_train_config()
    assert (cfg.optimizer, cfg.lr, cfg.l2, cfg.max_epochs, cfg.batch_size) == ("sgd", 0.001, 0.004, 5, 100)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(patience=-1)


def test_build_rejects_unknown_name():
    with pytest.raises(ValueError):
        build("transformer")


# ---- forward shapes -----------------------------------------------------------

INPUTS = {
    "sensor-mlp": lambda n, r: {"sensor": r.standard_normal((n, 28))},
    "cam-cnn": lambda n, r: {"cam1": r.random((n, 32, 32))},
    "baseline-cnn": lambda n, r: {"cam1": r.random((n, 32, 32))},
    "dual-cam-cnn": lambda n, r: {"cam1": r.random((n, 32, 32)), "cam2": r.random((n, 32, 32))},
    "fusion": lambda n, r: {"cam1": r.random((n, 32, 32)), "cam2": r.random((n, 32, 32)), "sensor": r.standard_normal((n, 28))},
}


@pytest.mark.parametrize("name", sorted(INPUTS))
def test_forward_gives_probability_rows(name, rng):
    net = Network(build(name), seed=0)
    proba = net.predict_proba(INPUTS[name](4, rng))
    assert proba.shape == (4, 12)
    np.testing.assert_allclose(proba.sum(axis=1), 1, atol=1e-6)


def test_missing_input_role_is_rejected(rng):
    net = Network(build("fusion"), seed=0)
    with pytest.raises((KeyError, ValueError)):
        net.predict_proba({"cam1": rng.random((2, 32, 32))})


def test_dual_cam_swapping_cameras_changes_output(rng):
    net = Network(build("dual-cam-cnn"), seed=0)
    a, b = rng.random((3, 32, 32)), rng.random((3, 32, 32))
    p1 = net.predict_proba({"cam1": a, "cam2": b})
    p2 = net.predict_proba({"cam1": b, "cam2": a})
    assert not np.allclose(p1, p2)


@settings(max_examples=10)
@given(st.permutations(list(range(6))))
def test_inference_commutes_with_batch_permutation(perm):
    rng = np.random.default_rng(0)
    net = Network(build("fusion", size=8), seed=1)
    x = {"cam1": rng.random((6, 8, 8)), "cam2": rng.random((6, 8, 8)), "sensor": rng.standard_normal((6, 28))}
    base = net.predict_proba(x)
    shuffled = net.predict_proba({k: v[perm] for k, v in x.items()})
    np.testing.assert_array_equal(shuffled, base[perm])


# ---- gradients ----------------------------------------------------------------

def test_reduced_cam_cnn_gradients_match_finite_differences(rng):
    net = Network(build("cam-cnn", size=8), seed=3, dtype=np.float64)
    x = {"cam1": rng.random((4, 8, 8))}
    res = grad_check(net, x, np.array([0, 3, 5, 11]), max_entries=6)
    assert res.max_rel_error < 1e-4, res


# ---- training -----------------------------------------------------------------

@pytest.fixture(scope="module")
def small_split():
    return split(synth_samples(10, 7), seed=42)


def test_learning_rate_zero_leaves_weights_unchanged(small_split):
    net = Network(build("sensor-mlp"), seed=0)
    before = [w.copy() for _, w, _ in net.named_parameters()]
    train(net, small_split, TrainConfig(lr=0.0, max_epochs=2, batch_size=32))
    for b, (_, w, _) in zip(before, net.named_parameters()):
        np.testing.assert_array_equal(w, b)


def test_training_loss_mostly_decreases(synth_small):
    net = Network(build("sensor-mlp"), seed=0)
    _, history = train(net, synth_small, TrainConfig(max_epochs=6, batch_size=64))
    losses = [h.loss for h in history]
    assert len(losses) == 6
    assert sum(b <= a for a, b in zip(losses, losses[1:])) >= 4


def test_training_is_deterministic(small_split):
    runs = []
    for _ in range(2):
        net = Network(build("cam-cnn"), seed=5)
        ckpt, history = train(net, small_split, TrainConfig(max_epochs=2, batch_size=16, seed=9))
        runs.append((ckpt, history))
    assert runs[0][1] == runs[1][1]
    for (_, a), (_, b) in zip(runs[0][0].arrays, runs[1][0].arrays):
        assert a.tobytes() == b.tobytes()


def test_best_validation_epoch_is_restored(small_split):
    net = Network(build("sensor-mlp"), seed=0)
    ckpt, history = train(net, small_split, TrainConfig(max_epochs=4, batch_size=32))
    best = max(history, key=lambda h: h.val_f1)
    assert ckpt.meta["best_epoch"] == best.epoch


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(small_split):
    net = Network(build("sensor-mlp"), seed=0)
    with pytest.raises((TrainingDiverged, FloatingPointError)):
        train(net, small_split, TrainConfig(optimizer="sgd", lr=1e30, max_epochs=3, batch_size=32))


def test_target_accuracy_stops_early(synth_small):
    net = Network(build("sensor-mlp"), seed=0)
    _, history = train(net, synth_small, TrainConfig(max_epochs=60, target_train_accuracy=0.99))
    assert history[-1].train_accuracy >= 0.99
    assert len(history) < 60


# ---- checkpoints --------------------------------------------------------------

def test_checkpoint_round_trip_is_bit_identical(tmp_path, small_split):
    net = Network(build("fusion"), seed=2)
    ckpt, _ = train(net, small_split, TrainConfig(max_epochs=1, batch_size=32))
    before = predict(ckpt, small_split.test)
    path = ckpt.save(tmp_path / "m.json")
    loaded = Checkpoint.load(path)
    after = predict(loaded, small_split.test)
    np.testing.assert_array_equal(before[0], after[0])
    assert before[1].tobytes() == after[1].tobytes()
    assert (tmp_path / "m.weights.bin").stat().st_size == 4 * sum(a.size for _, a in ckpt.arrays)


def test_checkpoint_blob_size_mismatch_is_rejected(tmp_path):
    ckpt = Checkpoint.from_network(Network(build("sensor-mlp"), seed=0))
    path = ckpt.save(tmp_path / "m.json")
    blob = tmp_path / "m.weights.bin"
    blob.write_bytes(blob.read_bytes()[:-4])
    with pytest.raises(ValueError):
        Checkpoint.load(path)
