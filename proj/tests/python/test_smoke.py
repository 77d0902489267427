"""Python-surface smoke tests for the bioseg extension module."""

import math

import numpy as np
import pytest

import bioseg


def tiny_config():
    cfg = bioseg.ModelConfig()
    cfg.init_filters = 4
    cfg.blocks_down = [1, 1]
    cfg.blocks_up = [1]
    cfg.patch_size = 16
    return cfg


def test_phantom_is_deterministic_and_well_formed():
    img1, mask1 = bioseg.gen_phantom("source", size=64, seed=5)
    img2, mask2 = bioseg.gen_phantom("source", size=64, seed=5)
    assert img1.shape == (64, 64)
    assert img1.dtype == np.float32
    assert mask1.dtype == np.uint8
    np.testing.assert_array_equal(img1, img2)
    np.testing.assert_array_equal(mask1, mask2)
    assert 0.0 <= img1.min() and img1.max() <= 1.0
    assert 0 < mask1.sum() < mask1.size


def test_model_forward_shape_and_range():
    model = bioseg.SegResNet(tiny_config(), seed=1)
    x = np.random.default_rng(0).random((2, 1, 16, 16), dtype=np.float32)
    y = model.forward(x, train=True)  # batch statistics keep activations in range
    assert y.shape == (2, 1, 16, 16)
    assert np.all((y > 0.0) & (y < 1.0))
    y_infer = model.forward(x)
    assert np.all((y_infer >= 0.0) & (y_infer <= 1.0))
    np.testing.assert_array_equal(y_infer, model.forward(x))


def test_model_save_load_roundtrip(tmp_path):
    model = bioseg.SegResNet(tiny_config(), seed=2)
    path = str(tmp_path / "model.srw1")
    model.save(path)
    loaded = bioseg.load_model(path)
    x = np.random.default_rng(1).random((1, 1, 16, 16), dtype=np.float32)
    np.testing.assert_array_equal(model.forward(x), loaded.forward(x))


def test_segment_runs_tiled_inference():
    img, _ = bioseg.gen_phantom("target", size=64, seed=7)
    model = bioseg.SegResNet(tiny_config(), seed=3)
    mask = model.segment(img)
    assert mask.shape == (64, 64)
    assert mask.dtype == np.uint8

    with pytest.raises(ValueError):
        model.segment(img[:60, :])  # not a patch multiple


def test_metric_identities():
    rng = np.random.default_rng(2)
    a = (rng.random((12, 12)) < 0.4).astype(np.uint8)
    b = (rng.random((12, 12)) < 0.4).astype(np.uint8)
    d = bioseg.dice_score(a, b)
    i = bioseg.iou_score(a, b)
    assert abs(d - 2 * i / (1 + i)) < 1e-12
    assert bioseg.dice_score(a, a) == 1.0
    assert bioseg.boundary_iou(a, a, 2) == 1.0


def test_loss_values():
    pred = np.full((1, 1, 8, 8), 0.5, dtype=np.float32)
    target = (np.random.default_rng(3).random((1, 1, 8, 8)) < 0.5).astype(np.float32)
    assert abs(bioseg.bce_loss(pred, target) - math.log(2.0)) < 1e-6
    combined = bioseg.combined_loss(pred, target)
    recomposed = bioseg.dice_loss(pred, target) + 0.1 * bioseg.bce_loss(pred, target)
    assert abs(combined - recomposed) < 1e-12


def test_stream_accumulation_recovers_phantom(tmp_path):
    img, mask = bioseg.gen_phantom("target", size=32, seed=9)
    stream = bioseg.gen_stream(img, mask, n_frames=8, fps=19.6, motion="static", noise=0.0, seed=4)
    assert stream.n_frames == 8
    acc = bioseg.accumulate(stream, 0, 8)
    assert np.max(np.abs(acc - img)) <= 1.0 / 65535.0

    path = str(tmp_path / "s.cvs1")
    bioseg.write_stream(stream, path)
    back = bioseg.read_stream(path)
    assert back.n_frames == 8
    np.testing.assert_array_equal(back.frame(3), stream.frame(3))


def test_largest_component():
    mask = np.zeros((6, 6), dtype=np.uint8)
    mask[0, 0:3] = 1
    mask[5, 5] = 1
    kept = bioseg.largest_component(mask)
    assert kept.sum() == 3
    assert kept[5, 5] == 0


def test_gradchecks_pass():
    for name, err, tol, passed in bioseg.run_gradchecks(11):
        assert passed, f"{name}: {err} vs {tol}"
