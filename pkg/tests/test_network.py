"""Network forward/loss/backprop against hand values and finite differences."""

import math

import numpy as np
import pytest

from medagent.dataset import encode, parse_csv
from medagent.network import (
    ACTIVATIONS,
    HyperparameterSetting,
    InvalidSetting,
    NetworkWeights,
    NonFiniteLoss,
    TrainConfig,
    TrainingError,
    _loss_and_gradients,
    backprop_gradients,
    forward,
    init_weights,
    loss,
    predict_batch,
    train,
)
from medagent.rng import SplitMix64, mix, random_uniform

BASE = dict(hidden_layer_count=1, hidden_units=4, hidden_activation="relu",
            learning_rate=0.01, lr_decay=0.0, epochs=5, batch_size=8,
            optimizer="sgd", momentum=0.0, dropout_rate=0.0, l2_lambda=0.0,
            weight_init="he_uniform", early_stop_patience=0)


def setting(**overrides) -> HyperparameterSetting:
    return HyperparameterSetting(**{**BASE, **overrides})


def random_setting(rng: SplitMix64, **overrides) -> HyperparameterSetting:
    s = dict(BASE)
    s["hidden_layer_count"] = 1 + rng.next_below(2)
    s["hidden_units"] = 2 + rng.next_below(4)
    s["hidden_activation"] = ACTIVATIONS[rng.next_below(3)]
    s["l2_lambda"] = (0.0, 0.05)[rng.next_below(2)]
    s["weight_init"] = ("xavier_uniform", "he_uniform")[rng.next_below(2)]
    s.update(overrides)
    return HyperparameterSetting(**s)


def random_batch(seed, n, width):
    x = random_uniform(mix(seed, 1), n * width, -1.0, 1.0).reshape(n, width)
    rng = SplitMix64(mix(seed, 2))
    y = np.array([float(rng.next_below(2)) for _ in range(n)])
    return x, y


def finite_difference_grads(w: NetworkWeights, s, x, y, h=1e-5):
    def value_at(layer_idx, which, flat_idx, v):
        layers = []
        for li, (wm, bv) in enumerate(w.layers):
            wm, bv = wm.copy(), bv.copy()
            if li == layer_idx:
                (wm if which == 0 else bv).flat[flat_idx] = v
            layers.append((wm, bv))
        val, _ = _loss_and_gradients(NetworkWeights(layers=tuple(layers)), s, x, y)
        return val

    grads = []
    for li, (wm, bv) in enumerate(w.layers):
        pair = []
        for which, arr in enumerate((wm, bv)):
            g = np.zeros_like(arr)
            for j in range(arr.size):
                v0 = arr.flat[j]
                g.flat[j] = (value_at(li, which, j, v0 + h)
                             - value_at(li, which, j, v0 - h)) / (2 * h)
            pair.append(g)
        grads.append(tuple(pair))
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def test_forward_hand_example():
    w = NetworkWeights(layers=(
        (np.array([[2.0]]), np.array([-1.0])),
        (np.array([[3.0]]), np.array([-1.0])),
    ))
    p = forward(w, setting(hidden_units=1), [1.0])
    assert abs(p - 1.0 / (1.0 + math.exp(-2.0))) < 1e-15


def test_forward_zero_weights_is_half():
    w = NetworkWeights(layers=(
        (np.zeros((3, 4)), np.zeros(4)),
        (np.zeros((4, 1)), np.zeros(1)),
    ))
    assert forward(w, setting(hidden_units=4), [1.0, 0.0, 1.0]) == 0.5


def test_forward_dimension_mismatch():
    from medagent.network import DimensionMismatch

    cfg = TrainConfig(setting=setting(), seed=1, input_width=4)
    w = init_weights(cfg)
    with pytest.raises(DimensionMismatch):
        forward(w, setting(), [1.0, 2.0])


def test_loss_hand_values():
    w0 = NetworkWeights(layers=((np.zeros((1, 1)), np.zeros(1)),))
    assert abs(loss(0.5, 1, w0, 0.0) - math.log(2)) < 1e-15
    assert loss(1.0, 1, w0, 0.0) <= 1e-11
    w2 = NetworkWeights(layers=((np.array([[2.0]]), np.zeros(1)),))
    assert abs(loss(0.5, 1, w2, 0.1) - (math.log(2) + 0.05 * 4.0)) < 1e-15


def test_init_weights_bounds_and_zero_biases():
    cfg = TrainConfig(setting=setting(hidden_units=4, weight_init="xavier_uniform"),
                      seed=3, input_width=4)
    w = init_weights(cfg)
    bound = math.sqrt(6.0 / 8.0)
    assert np.abs(w.layers[0][0]).max() <= bound
    for _, b in w.layers:
        assert np.all(b == 0.0)
    # he bound uses fan_in only
    w_he = init_weights(TrainConfig(setting=setting(hidden_units=6), seed=3,
                                    input_width=24))
    assert np.abs(w_he.layers[0][0]).max() <= math.sqrt(6.0 / 24.0)


def test_init_weights_deterministic():
    cfg = TrainConfig(setting=setting(), seed=77, input_width=5)
    a, b = init_weights(cfg), init_weights(cfg)
    for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
        assert np.array_equal(wa, wb) and np.array_equal(ba, bb)


def test_weights_are_write_protected():
    w = init_weights(TrainConfig(setting=setting(), seed=1, input_width=3))
    with pytest.raises(ValueError):
        w.layers[0][0][0, 0] = 9.9


def test_setting_validation():
    bad = [
        dict(hidden_layer_count=0), dict(hidden_units=-1),
        dict(hidden_activation="softmax"), dict(learning_rate=-0.1),
        dict(learning_rate=math.nan), dict(lr_decay=-1.0),
        dict(epochs=0), dict(batch_size=0), dict(optimizer="rmsprop"),
        dict(momentum=1.0), dict(momentum=-0.2), dict(dropout_rate=1.0),
        dict(l2_lambda=-0.5), dict(weight_init="normal"),
        dict(early_stop_patience=-1), dict(epochs=True),
    ]
    for overrides in bad:
        with pytest.raises(InvalidSetting):
            setting(**overrides)
    # zero learning rate is legal (a no-op trainer)
    assert setting(learning_rate=0.0).learning_rate == 0.0
    assert len(HyperparameterSetting.__dataclass_fields__) == 13


def test_backprop_matches_finite_differences():
    for trial in range(6):
        rng = SplitMix64(mix(606, trial))
        s = random_setting(rng)
        width = 2 + rng.next_below(3)
        w = init_weights(TrainConfig(setting=s, seed=mix(trial, 1), input_width=width))
        x, y = random_batch(mix(trial, 2), 4 + rng.next_below(4), width)
        analytic = backprop_gradients(w, s, x, y)
        numeric = finite_difference_grads(w, s, x, y)
        assert max_relative_error(analytic, numeric) < 1e-4


def test_gradient_is_zero_at_a_perfect_minimum():
    # single saturating example: p ~ y with huge margin, no l2
    w = NetworkWeights(layers=(
        (np.array([[40.0]]), np.array([0.0])),
        (np.array([[40.0]]), np.array([-20.0])),
    ))
    s = setting(hidden_units=1)
    grads = backprop_gradients(w, s, np.array([[1.0]]), np.array([1.0]))
    total = sum(float(np.abs(g).sum()) for gw, gb in grads for g in (gw, gb))
    assert total <= 1e-9


def test_l2_gradient_component_is_linear_in_lambda():
    rng = SplitMix64(4242)
    s0 = random_setting(rng, l2_lambda=0.0)
    s1 = HyperparameterSetting(**{**s0.to_dict(), "l2_lambda": 0.02})
    s2 = HyperparameterSetting(**{**s0.to_dict(), "l2_lambda": 0.04})
    w = init_weights(TrainConfig(setting=s0, seed=8, input_width=3))
    x, y = random_batch(55, 6, 3)
    g0 = backprop_gradients(w, s0, x, y)
    g1 = backprop_gradients(w, s1, x, y)
    g2 = backprop_gradients(w, s2, x, y)
    for (w0, _), (w1, _), (w2, _) in zip(g0, g1, g2):
        assert np.allclose(w2 - w0, 2.0 * (w1 - w0), atol=1e-12)


def xor_matrix(n=200, seed=99):
    rng = SplitMix64(seed)
    lines = ["a,b,y"]
    for _ in range(n):
        x1, x2 = rng.next_below(2), rng.next_below(2)
        lines.append(f"v{x1},w{x2},{'t' if x1 ^ x2 else 'f'}")
    return encode(parse_csv("\n".join(lines) + "\n", "y"))


def test_train_learns_xor():
    m = xor_matrix()
    s = setting(hidden_units=8, optimizer="adam", epochs=200, batch_size=32)
    w = train(m, TrainConfig(setting=s, seed=5, input_width=m.encoder.width))
    acc = ((predict_batch(w, s, m.features) >= 0.5).astype(float) == m.labels).mean()
    assert acc == 1.0


def test_train_zero_learning_rate_keeps_init():
    m = xor_matrix(60)
    s = setting(learning_rate=0.0, epochs=3)
    cfg = TrainConfig(setting=s, seed=31, input_width=m.encoder.width)
    trained = train(m, cfg)
    fresh = init_weights(cfg)
    for (a, ab), (b, bb) in zip(trained.layers, fresh.layers):
        assert np.array_equal(a, b) and np.array_equal(ab, bb)


def test_train_bit_identical_across_runs():
    m = xor_matrix(80)
    for opt, mom, drop in (("sgd", 0.0, 0.0), ("sgd_momentum", 0.9, 0.25),
                           ("adam", 0.0, 0.4)):
        s = setting(optimizer=opt, momentum=mom, dropout_rate=drop,
                    epochs=12, l2_lambda=0.001, lr_decay=0.05)
        cfg = TrainConfig(setting=s, seed=13, input_width=m.encoder.width)
        a, b = train(m, cfg), train(m, cfg)
        for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
            assert np.array_equal(wa, wb) and np.array_equal(ba, bb)


def test_dropout_zero_means_training_flag_is_irrelevant():
    s = setting(dropout_rate=0.0)
    w = init_weights(TrainConfig(setting=s, seed=2, input_width=3))
    x = [1.0, 0.0, 1.0]
    assert forward(w, s, x, training=False) == forward(w, s, x, training=True)


def test_dropout_forward_needs_rng_and_uses_it():
    s = setting(dropout_rate=0.5)
    w = init_weights(TrainConfig(setting=s, seed=2, input_width=3))
    x = [1.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        forward(w, s, x, training=True)
    a = forward(w, s, x, training=True, rng=SplitMix64(10))
    b = forward(w, s, x, training=True, rng=SplitMix64(10))
    assert a == b
    outs = {forward(w, s, x, training=True, rng=SplitMix64(k)) for k in range(12)}
    assert len(outs) > 1


def test_early_stopping_requires_holdout_and_restores_best():
    m = xor_matrix(120, seed=3)
    holdout = xor_matrix(40, seed=4)
    s = setting(optimizer="adam", epochs=60, early_stop_patience=3)
    cfg = TrainConfig(setting=s, seed=7, input_width=m.encoder.width)
    with pytest.raises(TrainingError):
        train(m, cfg)  # no holdout given
    w = train(m, cfg, holdout=holdout)
    assert w.all_finite()
    # patience exhausted on noise labels: training still terminates cleanly
    noise = xor_matrix(60, seed=8)
    noisy = setting(epochs=50, early_stop_patience=2, learning_rate=0.5)
    w2 = train(noise, TrainConfig(setting=noisy, seed=9,
                                  input_width=noise.encoder.width), holdout=holdout)
    assert w2.all_finite()


def test_non_finite_loss_is_reported_with_position():
    m = xor_matrix(40, seed=21)
    s = setting(learning_rate=1e30, l2_lambda=1.0, epochs=50,
                batch_size=64, hidden_activation="tanh")
    with pytest.raises(NonFiniteLoss) as e:
        train(m, TrainConfig(setting=s, seed=3, input_width=m.encoder.width))
    assert e.value.epoch >= 0
    assert e.value.batch >= 0


def test_train_rejects_empty_matrix():
    m = xor_matrix(40)
    empty = m.take([])
    with pytest.raises(TrainingError):
        train(empty, TrainConfig(setting=setting(), seed=1,
                                 input_width=m.encoder.width))
