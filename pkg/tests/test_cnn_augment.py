import numpy as np
import pytest

from mammocad.cnn.augment import augment_image, augment_with_params, build_augmented_set
from mammocad.core import resize_bilinear


def test_augment_deterministic_per_seed():
    rng_img = np.random.default_rng(0)
    img = rng_img.random((48, 48))
    a = augment_image(img, np.random.default_rng(42), 32)
    b = augment_image(img, np.random.default_rng(42), 32)
    np.testing.assert_array_equal(a, b)
    c = augment_image(img, np.random.default_rng(43), 32)
    assert not np.array_equal(a, c)


def test_augment_output_size():
    rng = np.random.default_rng(1)
    img = rng.random((80, 50))
    for _ in range(5):
        out = augment_image(img, rng, 32)
        assert out.shape == (32, 32)


def test_neutral_params_reduce_to_resize_and_center_crop():
    rng = np.random.default_rng(2)
    img = rng.random((40, 60))
    target = 24
    resized = resize_bilinear(img, round(60 * 24 / 40), 24)
    r = (resized.shape[0] - target) // 2
    c = (resized.shape[1] - target) // 2
    expected = resized[r:r + target, c:c + target]
    out = augment_with_params(img, angle_deg=0.0, mirror=False, scale=1.0,
                              crop_rc=(r, c), shift_rc=(0, 0),
                              target_size=target, fill=0.0)
    np.testing.assert_allclose(out, expected)


def test_rotation_fills_corners_with_given_value():
    img = np.ones((33, 33))
    out = augment_with_params(img, angle_deg=45.0, mirror=False, scale=1.0,
                              crop_rc=(0, 0), shift_rc=(0, 0),
                              target_size=33, fill=0.25)
    assert abs(out[0, 0] - 0.25) < 1e-9   # corner comes from the fill
    assert abs(out[16, 16] - 1.0) < 1e-9  # centre untouched


def test_mirror_parameter():
    img = np.tile(np.linspace(0, 1, 16), (16, 1))
    out = augment_with_params(img, 0.0, True, 1.0, (0, 0), (0, 0), 16, 0.0)
    np.testing.assert_allclose(out, img[:, ::-1], atol=1e-12)


def test_bad_crop_rejected():
    img = np.zeros((20, 20))
    with pytest.raises(ValueError):
        augment_with_params(img, 0.0, False, 1.0, (50, 0), (0, 0), 16, 0.0)


def test_build_set_sixteen_fold():
    rng = np.random.default_rng(3)
    items = [(rng.random((40, 40)), i % 2) for i in range(5)]
    out = build_augmented_set(items, np.random.default_rng(0), 32)
    assert len(out) == 16 * len(items)
    assert all(im.shape == (32, 32) for im, _ in out)


def test_build_set_inherits_labels():
    rng = np.random.default_rng(4)
    items = [(rng.random((36, 36)), 0), (rng.random((36, 36)), 1)]
    out = build_augmented_set(items, np.random.default_rng(1), 24)
    assert [lab for _, lab in out] == [0] * 16 + [1] * 16


def test_build_set_seeds_differ_content_not_count():
    rng = np.random.default_rng(5)
    items = [(rng.random((36, 36)), 1)]
    a = build_augmented_set(items, np.random.default_rng(10), 24)
    b = build_augmented_set(items, np.random.default_rng(11), 24)
    assert len(a) == len(b) == 16
    assert any(not np.array_equal(x[0], y[0]) for x, y in zip(a, b))


def test_build_set_rejects_empty():
    with pytest.raises(ValueError):
        build_augmented_set([], np.random.default_rng(0), 32)
