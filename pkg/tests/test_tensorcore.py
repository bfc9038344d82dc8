import math
import zlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from falldet.tensorcore import (
    SGD,
    Adam,
    BatchNorm,
    CacheError,
    Conv1D,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    LayerSpec,
    MaxPool1D,
    MaxPool2D,
    NonFiniteGradient,
    ReLU,
    Sequential,
    ShapeError,
    Softmax,
    check_layer,
    grad_check,
    make_layer,
    output_shape,
    softmax,
    softmax_cross_entropy,
)
from falldet.tensorcore.layers import ConcatLayer


def built(spec, in_shape, seed=0, dtype=np.float64):
    layer = make_layer(spec, "t")
    layer.build(in_shape, np.random.default_rng(seed), dtype)
    return layer


# ---- layer specs --------------------------------------------------------------

def test_spec_rejects_missing_parameters():
    with pytest.raises(ValueError):
        LayerSpec("Dense")
    with pytest.raises(ValueError):
        LayerSpec("Conv2D", filters=4)


@pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
def test_dropout_rate_must_lie_in_unit_interval(rate):
    with pytest.raises(ValueError):
        Dropout(rate)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        LayerSpec("Attention")


def test_spec_dict_round_trip():
    for spec in (Dense(7), Conv2D(3, 2), MaxPool1D(2), BatchNorm(), Dropout(0.3), Flatten()):
        assert LayerSpec.from_dict(spec.to_dict()) == spec


# ---- forward examples ---------------------------------------------------------

def test_conv2d_valid_output_shape():
    layer = built(Conv2D(16, 3), (1, 32, 32))
    out = layer.forward(np.zeros((2, 1, 32, 32)))
    assert out.shape == (2, 16, 30, 30)


def test_relu_values():
    layer = built(ReLU(), (3,))
    np.testing.assert_array_equal(layer.forward(np.array([[-1.0, 0.0, 2.5]])), [[0.0, 0.0, 2.5]])


def test_maxpool_picks_window_maximum():
    layer = built(MaxPool2D(2), (1, 2, 2))
    out = layer.forward(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    np.testing.assert_array_equal(out, [[[[4.0]]]])


def test_maxpool_drops_ragged_edge():
    layer = built(MaxPool2D(2), (1, 5, 5))
    assert layer.forward(np.zeros((1, 1, 5, 5))).shape == (1, 1, 2, 2)


def test_dropout_is_identity_at_inference(rng):
    layer = built(Dropout(0.2), (10,))
    x = rng.standard_normal((4, 10))
    assert layer.forward(x, train=False) is x


def test_batchnorm_train_mode_normalises_two_samples():
    layer = built(BatchNorm(), (1,))
    out = layer.forward(np.array([[1.0], [3.0]]), train=True)
    scale = 1 / math.sqrt(1 + 1e-5)
    np.testing.assert_allclose(out.ravel(), [-scale, scale], rtol=1e-12)


def test_batchnorm_running_stats_update_only_in_train_mode():
    layer = built(BatchNorm(), (2,))
    x = np.array([[1.0, 5.0], [3.0, 9.0]])
    layer.forward(x, train=False)
    np.testing.assert_array_equal(layer.buffers["running_mean"], [0, 0])
    layer.forward(x, train=True)
    np.testing.assert_allclose(layer.buffers["running_mean"], [0.2, 0.7])
    np.testing.assert_allclose(layer.buffers["running_var"], [0.9 + 0.1 * 1.0, 0.9 + 0.1 * 4.0])


def test_batchnorm_rejects_single_sample_in_train_mode():
    layer = built(BatchNorm(), (3,))
    with pytest.raises(ShapeError):
        layer.forward(np.ones((1, 3)), train=True)
    layer.forward(np.ones((1, 3)), train=False)


def test_shape_mismatch_names_layer_and_shapes():
    layer = built(Dense(4), (3,))
    with pytest.raises(ShapeError, match=r"t .*\(3,\).*\(5,\)"):
        layer.forward(np.ones((2, 5)))


def test_flatten_keeps_row_major_order(rng):
    layer = built(Flatten(), (2, 3, 4))
    x = rng.standard_normal((2, 2, 3, 4))
    np.testing.assert_array_equal(layer.forward(x), x.reshape(2, -1))


# ---- backward examples --------------------------------------------------------

def test_dense_backward_of_zero_upstream_is_zero(rng):
    layer = built(Dense(3), (4,))
    layer.forward(rng.standard_normal((5, 4)), train=True)
    dx = layer.backward(np.zeros((5, 3)))
    assert not dx.any()
    assert not layer.grads["W"].any() and not layer.grads["b"].any()


def test_relu_backward_gates_upstream():
    layer = built(ReLU(), (2,))
    layer.forward(np.array([[-1.0, 2.0]]), train=True)
    np.testing.assert_array_equal(layer.backward(np.array([[5.0, 5.0]])), [[0.0, 5.0]])


def test_backward_without_forward_raises():
    layer = built(Dense(3), (4,))
    with pytest.raises(CacheError):
        layer.backward(np.zeros((1, 3)))


def test_backward_cache_is_single_use(rng):
    layer = built(ReLU(), (3,))
    layer.forward(rng.standard_normal((2, 3)), train=True)
    layer.backward(np.ones((2, 3)))
    with pytest.raises(CacheError):
        layer.backward(np.ones((2, 3)))


def test_dropout_backward_reuses_forward_mask(rng):
    layer = built(Dropout(0.5), (50,))
    x = np.ones((3, 50))
    out = layer.forward(x, train=True)
    np.testing.assert_array_equal(layer.backward(np.ones_like(x)), out)


# ---- shape algebra property ---------------------------------------------------

def symbolic_shape(kind, params, shape):
    """Independent restatement of valid-padding arithmetic."""
    if kind == "Conv2D":
        return (params, shape[1] - 2, shape[2] - 2)
    if kind == "Conv1D":
        return (params, shape[1] - 2)
    if kind == "MaxPool2D":
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if kind == "MaxPool1D":
        return (shape[0], shape[1] // 2)
    if kind == "Flatten":
        return (math.prod(shape),)
    return shape


@given(
    kind=st.sampled_from(["Conv2D", "Conv1D", "MaxPool2D", "MaxPool1D", "Flatten", "ReLU", "BatchNorm"]),
    c=st.integers(1, 3), h=st.integers(3, 9), w=st.integers(3, 9), filters=st.integers(1, 4),
)
def test_output_shape_matches_forward_and_symbolic_calculator(kind, c, h, w, filters):
    in_shape = (c, h) if kind.endswith("1D") else (c, h, w)
    spec = {
        "Conv2D": Conv2D(filters, 3), "Conv1D": Conv1D(filters, 3), "MaxPool2D": MaxPool2D(2),
        "MaxPool1D": MaxPool1D(2), "Flatten": Flatten(), "ReLU": ReLU(), "BatchNorm": BatchNorm(),
    }[kind]
    predicted = output_shape(spec, in_shape)
    assert predicted == symbolic_shape(kind, filters, in_shape)
    layer = built(spec, in_shape)
    out = layer.forward(np.random.default_rng(0).standard_normal((2, *in_shape)), train=True)
    assert out.shape[1:] == predicted


# ---- per-layer gradient checks on random shapes -------------------------------

def random_case(kind, rng):
    n = int(rng.integers(2, 4))
    if kind == "Dense":
        return Dense(int(rng.integers(1, 5))), (int(rng.integers(1, 6)),), n
    if kind == "Conv2D":
        return Conv2D(int(rng.integers(1, 3)), int(rng.integers(1, 4))), (int(rng.integers(1, 3)), int(rng.integers(3, 6)), int(rng.integers(3, 6))), n
    if kind == "Conv1D":
        return Conv1D(int(rng.integers(1, 4)), int(rng.integers(1, 4))), (int(rng.integers(1, 3)), int(rng.integers(3, 9))), n
    if kind == "MaxPool2D":
        return MaxPool2D(int(rng.integers(1, 3))), (int(rng.integers(1, 3)), int(rng.integers(2, 6)), int(rng.integers(2, 6))), n
    if kind == "MaxPool1D":
        return MaxPool1D(int(rng.integers(1, 4))), (int(rng.integers(1, 3)), int(rng.integers(3, 9))), n
    if kind == "BatchNorm":
        shape = [(int(rng.integers(1, 5)),), (int(rng.integers(1, 3)), int(rng.integers(2, 5))),
                 (int(rng.integers(1, 3)), 3, 3)][int(rng.integers(0, 3))]
        return BatchNorm(), shape, n
    if kind == "Dropout":
        return Dropout(float(rng.uniform(0.1, 0.6))), (int(rng.integers(1, 8)),), n
    if kind == "Flatten":
        return Flatten(), (int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))), n
    if kind == "ReLU":
        return ReLU(), (int(rng.integers(1, 8)),), n
    if kind == "Softmax":
        return Softmax(), (int(rng.integers(2, 6)),), n
    raise AssertionError(kind)


GRAD_KINDS = ["Dense", "Conv2D", "Conv1D", "MaxPool2D", "MaxPool1D", "BatchNorm", "Dropout", "Flatten", "ReLU", "Softmax"]


@pytest.mark.parametrize("kind", GRAD_KINDS)
def test_layer_gradients_match_finite_differences_on_20_random_shapes(kind):
    rng = np.random.default_rng(zlib.crc32(kind.encode()))
    for trial in range(20):
        spec, in_shape, n = random_case(kind, rng)
        layer = built(spec, in_shape, seed=trial)
        if kind == "BatchNorm":
            layer.params["gamma"][:] = rng.uniform(0.5, 1.5, layer.params["gamma"].shape)
            layer.params["beta"][:] = rng.standard_normal(layer.params["beta"].shape)
        if kind in ("Dense", "Conv2D", "Conv1D"):
            for b in (k for k in layer.params if k == "b"):
                layer.params[b][:] = rng.standard_normal(layer.params[b].shape) * 0.1
        x = rng.standard_normal((n, *in_shape))
        res = check_layer(layer, x, seed=trial)
        assert res.max_rel_error < 1e-4, (trial, spec, in_shape, res)
        assert res.n_checked > 0


def test_concat_gradients_match_finite_differences(rng):
    for trial in range(20):
        widths = [int(w) for w in rng.integers(1, 6, size=int(rng.integers(2, 4)))]
        layer = ConcatLayer(LayerSpec("Concat"), "cat")
        layer.build_multi([(w,) for w in widths])
        xs = [rng.standard_normal((3, w)) for w in widths]
        assert check_layer(layer, xs, seed=trial).max_rel_error < 1e-4


def test_single_dense_model_grad_check_below_1e_6(rng):
    model = Sequential([Dense(5), Softmax()], (3,), seed=1, dtype=np.float64)
    res = grad_check(model, rng.standard_normal((4, 3)), np.array([0, 1, 4, 2]))
    assert res.max_rel_error < 1e-6


def test_frozen_dropout_model_grad_check_below_1e_6(rng):
    model = Sequential([Dense(6), Dropout(0.3), Dense(4), Softmax()], (3,), seed=2, dtype=np.float64)
    res = grad_check(model, rng.standard_normal((5, 3)), np.array([0, 1, 2, 3, 0]))
    assert res.max_rel_error < 1e-6


def test_grad_check_requires_float64():
    model = Sequential([Dense(3), Softmax()], (2,), dtype=np.float32)
    with pytest.raises(ValueError):
        grad_check(model, np.ones((2, 2)), np.array([0, 1]))


def test_grad_check_leaves_batchnorm_buffers_untouched(rng):
    model = Sequential([Dense(4), BatchNorm(), Dense(3), Softmax()], (3,), seed=0, dtype=np.float64)
    before = model.layers[1].buffers["running_mean"].copy()
    grad_check(model, rng.standard_normal((4, 3)), np.array([0, 1, 2, 0]))
    np.testing.assert_array_equal(model.layers[1].buffers["running_mean"], before)


# ---- softmax and cross-entropy ------------------------------------------------

def test_uniform_logits_give_log12_loss():
    loss, _ = softmax_cross_entropy(np.zeros((3, 12)), np.array([0, 5, 11]))
    assert loss == pytest.approx(math.log(12), abs=1e-12)


def test_saturated_logit_gives_zero_loss():
    logits = np.zeros((1, 12))
    logits[0, 4] = 1000.0
    loss, _ = softmax_cross_entropy(logits, np.array([4]))
    assert loss == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_gradient_matches_finite_differences(rng):
    logits = rng.standard_normal((3, 12))
    labels = np.array([1, 7, 11])
    _, grad = softmax_cross_entropy(logits, labels)
    h = 1e-6
    num = np.zeros_like(logits)
    for idx in np.ndindex(*logits.shape):
        up, down = logits.copy(), logits.copy()
        up[idx] += h
        down[idx] -= h
        num[idx] = (softmax_cross_entropy(up, labels)[0] - softmax_cross_entropy(down, labels)[0]) / (2 * h)
    rel = np.abs(grad - num) / np.maximum(np.maximum(np.abs(grad), np.abs(num)), 1e-8)
    assert rel.max() < 1e-4


def test_cross_entropy_rejects_bad_inputs():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.array([[np.nan] * 12]), np.array([0]))
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((1, 12)), np.array([12]))
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((1, 12)), np.array([-1]))


@given(st.lists(st.floats(-50, 50), min_size=12, max_size=12), st.integers(0, 11))
def test_softmax_rows_sum_to_one_and_loss_nonnegative(row, label):
    z = np.array([row])
    assert softmax(z).sum() == pytest.approx(1.0, abs=1e-6)
    loss, _ = softmax_cross_entropy(z, np.array([label]))
    assert loss >= 0


# ---- optimizers ---------------------------------------------------------------

class OneWeight:
    def __init__(self, w, g):
        self.w = np.array([w], dtype=np.float64)
        self.g = np.array([g], dtype=np.float64)

    def named_parameters(self):
        yield "w", self.w, self.g


def test_sgd_single_step():
    m = OneWeight(1.0, 2.0)
    SGD(lr=0.1).step(m)
    assert m.w[0] == pytest.approx(0.8)
    assert m.g[0] == 0


def test_sgd_l2_adds_weight_decay():
    m = OneWeight(1.0, 0.0)
    SGD(lr=0.1, l2=0.5).step(m)
    assert m.w[0] == pytest.approx(0.95)


def test_zero_gradient_is_a_fixed_point():
    for opt in (SGD(lr=0.5), Adam(lr=0.5)):
        m = OneWeight(3.0, 0.0)
        opt.step(m)
        assert m.w[0] == 3.0


@pytest.mark.parametrize("g", [1e-3, 1.0, 1e3])
def test_adam_first_step_has_magnitude_lr(g):
    m = OneWeight(0.0, g)
    opt = Adam(lr=0.01)
    opt.step(m)
    # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    assert m.w[0] == pytest.approx(-0.01 * g / (g + 1e-7), rel=1e-12)
    assert opt.step_count == 1


def test_adam_step_counter_increments():
    opt = Adam()
    m = OneWeight(1.0, 1.0)
    for t in range(1, 4):
        m.g[:] = 1.0
        opt.step(m)
        assert opt.step_count == t
    assert opt.m["w"].shape == m.w.shape


def test_non_finite_gradient_raises_with_name():
    m = OneWeight(1.0, np.inf)
    with pytest.raises(NonFiniteGradient, match="w"):
        SGD().step(m)


# ---- dropout statistics and determinism ---------------------------------------

def test_dropout_expectation_within_two_percent():
    layer = built(Dropout(0.2), (1000,), seed=3)
    x = np.full((1, 1000), 2.0)
    total = np.zeros_like(x)
    for _ in range(200):
        total += layer.forward(x, train=True)
    mean = total / 200
    assert abs(mean.mean() - 2.0) / 2.0 < 0.02


def _train_steps(seed, steps=5):
    rng = np.random.default_rng(seed)
    model = Sequential([Dense(8), ReLU(), BatchNorm(), Dropout(0.2), Dense(3), Softmax()], (4,), seed=seed)
    x = rng.standard_normal((16, 4)).astype(np.float32)
    y = rng.integers(0, 3, 16)
    opt = Adam(lr=0.01)
    for _ in range(steps):
        _, d = softmax_cross_entropy(model.logits(x, train=True), y)
        model.backward(d)
        opt.step(model)
    return [w.copy() for _, w, _ in model.named_parameters()]


def test_training_is_bit_identical_for_equal_seeds():
    a, b = _train_steps(5), _train_steps(5)
    for wa, wb in zip(a, b):
        assert wa.tobytes() == wb.tobytes()
    c = _train_steps(6)
    assert any(wa.tobytes() != wc.tobytes() for wa, wc in zip(a, c))
