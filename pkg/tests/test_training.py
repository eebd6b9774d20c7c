from fractions import Fraction

import numpy as np
import pytest

from risfb.errors import DecodeError, DimensionError, FormatVersionError, TrainingError
from risfb.nn import (
    AdamState,
    TrainConfig,
    adam_step,
    build_ae1,
    build_ae2,
    evaluate,
    load_model,
    mse_loss,
    save_model,
    train,
)
from risfb.nn.layers import Tanh
from risfb.nn.model import Sequential
from risfb.numerics import make_rng


def test_adam_hand_trace():
    p = np.array([1.0])
    state = AdamState()
    adam_step([p], [np.array([0.5])], state, lr=0.1)
    # first step: m_hat = g, v_hat = g^2
    assert p[0] == pytest.approx(1 - 0.1 * 0.5 / (0.5 + 1e-8), abs=1e-15)
    adam_step([p], [np.array([0.5])], state, lr=0.1)
    assert p[0] == pytest.approx(1 - 2 * 0.1 * 0.5 / (0.5 + 1e-8), abs=1e-15)


def test_adam_zero_gradient_is_noop():
    p = np.array([1.0, -2.0])
    adam_step([p], [np.zeros(2)], AdamState(), lr=0.1)
    assert p.tolist() == [1.0, -2.0]


def test_adam_first_step_magnitude_is_lr():
    rng = make_rng(0)
    p = rng.standard_normal(20)
    g = rng.standard_normal(20)
    before = p.copy()
    adam_step([p], [g], AdamState(), lr=1e-3)
    assert np.allclose(np.abs(p - before), 1e-3, rtol=1e-6)


def test_mse_examples():
    loss, grad = mse_loss([1.0, 2.0], [0.0, 0.0])
    assert loss == 2.5
    assert grad.tolist() == [1.0, 2.0]
    assert mse_loss(np.ones((3, 2)), np.ones((3, 2)))[0] == 0.0
    with pytest.raises(DimensionError):
        mse_loss(np.ones(3), np.ones(2))


def test_ae1_shapes_and_ratio():
    ae = build_ae1(256, 32, 512)
    assert ae.code_size == 512
    assert Fraction(ae.code_size, 2 * 256 * 32) == Fraction(1, 32)
    small = build_ae1(16, 4, 32)
    x = make_rng(0).uniform(-1, 1, (3, 2, 16, 4))
    code = small.encode(x)
    assert code.shape == (3, 32)
    assert np.all((code > 0) & (code < 1))
    assert small.decode(code).shape == x.shape


def test_ae2_shapes_and_ratio():
    ae = build_ae2(256, 64)
    assert Fraction(ae.code_size, 2 * 256) == Fraction(1, 8)
    x = make_rng(1).uniform(-1, 1, (5, 512))
    out = ae.forward(x)
    assert out.shape == x.shape
    assert np.all(np.abs(out) < 1)


def test_rezero_blocks_start_as_identity():
    ae = build_ae2(8, 4, seed=3)
    code = make_rng(2).uniform(0, 1, (4, 4))
    stem = Sequential(ae.decoder.layers[:3])
    assert np.allclose(ae.decode(code), Tanh().forward(stem.forward(code)), atol=1e-15)


def test_ae1_overfits_single_sample():
    ae = build_ae1(16, 4, 128, seed=0)
    x = make_rng(1).uniform(-0.9, 0.9, (1, 2, 16, 4))
    train(ae, x, x, TrainConfig(epochs=200, batch_size=1))
    assert mse_loss(ae.forward(x, training=True), x)[0] < 1e-6


def _toy_data(seed=0, n=96):
    rng = make_rng(seed)
    basis = rng.standard_normal((4, 16))
    x = np.tanh(0.5 * rng.standard_normal((n, 4)) @ basis)
    return x[:80], x[80:]


def test_best_validation_non_increasing_and_restored():
    xt, xv = _toy_data()
    ae = build_ae2(8, 4, seed=1)
    res = train(ae, xt, xv, TrainConfig(epochs=15, batch_size=16))
    best = [h["best_val_loss"] for h in res.history]
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert evaluate(ae, xv) == pytest.approx(res.best_val_loss, rel=1e-12)
    assert res.history[-1]["val_loss"] >= res.best_val_loss


def test_lr_drops_after_plateau():
    xt, xv = _toy_data()
    ae = build_ae2(8, 4, seed=1)
    # an absurd improvement threshold makes every epoch a plateau epoch
    res = train(ae, xt, xv, TrainConfig(epochs=6, batch_size=16, patience=3, min_rel_improvement=0.99))
    assert [h["lr"] for h in res.history] == [1e-3, 1e-3, 1e-4, 1e-4, 1e-4, 1e-4]


def test_training_deterministic():
    xt, xv = _toy_data()
    a, b = build_ae2(8, 4, seed=2), build_ae2(8, 4, seed=2)
    train(a, xt, xv, TrainConfig(epochs=3, batch_size=16, seed=5))
    train(b, xt, xv, TrainConfig(epochs=3, batch_size=16, seed=5))
    for (_, la, ka), (_, lb, kb) in zip(a.named("params"), b.named("params")):
        assert np.array_equal(la.params[ka], lb.params[kb])


def test_nan_input_raises_training_error():
    xt, xv = _toy_data()
    xt = xt.copy()
    xt[0, 0] = np.nan
    with pytest.raises(TrainingError) as info:
        train(build_ae2(8, 4), xt, xv, TrainConfig(epochs=2, batch_size=80))
    assert info.value.epoch == 0


def test_weight_file_roundtrip(tmp_path):
    ae = build_ae1(8, 4, 16, seed=4)
    x = make_rng(0).uniform(-1, 1, (6, 2, 8, 4))
    train(ae, x, x, TrainConfig(epochs=1, batch_size=3))
    path = save_model(ae, tmp_path / "ae1.rcnn", extras={"scale": 2.5})
    back, extras = load_model(path)
    assert extras["scale"].tolist() == [2.5]
    assert back.arch == ae.arch
    assert np.array_equal(back.forward(x), ae.forward(x))
    save_model(back, tmp_path / "again.rcnn", extras={"scale": 2.5})
    assert (tmp_path / "again.rcnn").read_bytes() == path.read_bytes()


def test_weight_file_rejects_corruption(tmp_path):
    path = save_model(build_ae2(4, 2), tmp_path / "m.rcnn")
    raw = path.read_bytes()
    (tmp_path / "bad.rcnn").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(DecodeError):
        load_model(tmp_path / "bad.rcnn")
    (tmp_path / "ver.rcnn").write_bytes(raw[:4] + b"\x07" + raw[5:])
    with pytest.raises(FormatVersionError):
        load_model(tmp_path / "ver.rcnn")
    (tmp_path / "short.rcnn").write_bytes(raw[:-8])
    with pytest.raises(DecodeError):
        load_model(tmp_path / "short.rcnn")
