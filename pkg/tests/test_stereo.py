import numpy as np
import pytest

from rangemove.errors import ContractViolation
from rangemove.moves import run
from rangemove.stereo import (PRESETS, ImagePair, StereoParams, bt_cost_volume, bt_unary, build_stereo_model,
                              disparity_image, load_pair, preset, read_image, read_pnm, shifted_ramp_pair,
                              unary_table, write_pgm)


def test_constant_images_cost_nothing():
    pair = ImagePair(np.full((4, 9), 80), np.full((4, 9), 80))
    cost, valid = bt_cost_volume(pair, range(5))
    assert np.all(cost[valid] == 0)


def test_identical_images_zero_at_zero_disparity():
    img = np.random.default_rng(0).integers(0, 256, (6, 10))
    cost, _ = bt_cost_volume(ImagePair(img, img), [0])
    assert np.all(cost == 0)


def test_shifted_ramp_costs():
    pair = shifted_ramp_pair(20, 6, 3)
    ds = np.arange(8)
    cost, valid = bt_cost_volume(pair, ds)
    # interior pixels see an exact match at d = 3; every other disparity is off
    # by 3 intensity levels per step, less the half-sample slack of 1.5
    for d in ds:
        region = cost[:, 8:19, d]
        assert np.allclose(region, 0.0 if d == 3 else 3 * abs(3 - d) - 1.5)
    assert not valid[0, 2, 3] and valid[0, 3, 3]


def test_boundary_rule_uses_worst_in_frame_cost():
    pair = shifted_ramp_pair(20, 2, 3)
    ds = np.arange(6)
    u = unary_table(pair, StereoParams(labels=6, trunc=2, weight=1.0)).reshape(2, 20, 6)
    cost, valid = bt_cost_volume(pair, ds)
    x = 2  # disparities 3..5 fall outside the right image
    assert np.all(u[:, x, 3:] == cost[:, x, :3].max(axis=1, keepdims=True))
    assert bt_unary(pair, (x, 1), 4, ds) == u[1, x, 4]
    with pytest.raises(ContractViolation):
        bt_unary(pair, (x, 1), 9, ds)


def test_bt_symmetry_under_swap():
    rng = np.random.default_rng(1)
    left = rng.integers(0, 256, (3, 12))
    right = np.roll(left, -2, axis=1) + rng.integers(-5, 6, (3, 12))
    fwd, back = ImagePair(left, right), ImagePair(right, left)
    for x in range(4, 12):
        for d in range(0, 4):
            a = bt_unary(fwd, (x, 1), d, np.arange(0, 4))
            b = bt_unary(back, (x - d, 1), -d, -np.arange(0, 4))
            assert a == pytest.approx(b)


def test_small_model_structure():
    pair = ImagePair([[10, 10], [10, 40]], [[10, 10], [10, 40]])
    m = build_stereo_model(pair, StereoParams(labels=2, trunc=1, weight=30.0, weight_low=10.0))
    assert m.node_count == 4 and len(m.edges) == 4
    # edges (0,1), (0,2), (1,3), (2,3); the last two cross the bright pixel
    np.testing.assert_array_equal(m.weights, [30, 30, 10, 10])


def test_teddy_rule_step_edge():
    left = np.zeros((4, 8))
    left[:, 4:] = 20
    pair = ImagePair(left, left)
    m = build_stereo_model(pair, preset("teddy", labels=4))
    e = m.edges
    cross = (e[:, 0] % 8 == 3) & (e[:, 1] % 8 == 4)
    assert np.all(m.weights[cross] == 10)
    assert np.all(m.weights[~cross] == 30)


def test_model_dimensions():
    pair = shifted_ramp_pair(16, 5, 2)
    m = build_stereo_model(pair, StereoParams(labels=6, trunc=2, weight=3.0))
    assert m.unary.shape == (80, 6)
    assert len(m.edges) == 2 * 16 * 5 - 16 - 5
    with pytest.raises(ContractViolation):
        build_stereo_model(pair, StereoParams(labels=17, trunc=2, weight=3.0))
    with pytest.raises(ContractViolation):
        ImagePair(np.zeros((2, 3)), np.zeros((3, 2)))


def test_presets():
    assert (PRESETS["map"].weight, PRESETS["map"].labels, PRESETS["map"].trunc) == (4, 30, 6)
    assert (PRESETS["venus"].weight, PRESETS["venus"].labels, PRESETS["venus"].trunc) == (50, 20, 3)
    assert (PRESETS["sawtooth"].weight, PRESETS["sawtooth"].labels, PRESETS["sawtooth"].trunc) == (20, 20, 3)
    t = PRESETS["teddy"]
    assert (t.weight, t.weight_low, t.grad_threshold, t.labels, t.trunc) == (30, 10, 10, 60, 8)
    assert (PRESETS["cones"].weight, PRESETS["cones"].labels, PRESETS["cones"].trunc) == (10, 60, 8)
    assert preset("venus", trunc=4).trunc == 4
    with pytest.raises(ContractViolation):
        preset("tsukuba")


def test_ramp_recovered():
    pair = shifted_ramp_pair(32, 12, 3)
    m = build_stereo_model(pair, StereoParams(labels=8, trunc=3, weight=4.0))
    x = run(m, "gswap").labeling.reshape(12, 32)
    assert np.all(x[:, 7:] == 3)


def test_pgm_round_trip_and_disparity_scaling(tmp_path):
    img = np.arange(60, dtype=np.uint8).reshape(6, 10) * 4
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_pnm(tmp_path / "a.pgm"), img)
    d = disparity_image(np.array([0, 1, 2, 19]), 2, 2, 20)
    np.testing.assert_array_equal(d.ravel(), [0, 13, 26, 247])


def test_ppm_to_luma_and_comments(tmp_path):
    rgb = np.zeros((2, 3, 3), dtype=np.uint8)
    rgb[..., 0] = 100
    rgb[..., 1] = 200
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6\n# comment\n3 2\n255\n" + rgb.tobytes())
    np.testing.assert_allclose(read_image(p), 0.299 * 100 + 0.587 * 200)
    with pytest.raises(ContractViolation):
        (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
        read_pnm(tmp_path / "bad.pgm")


def test_png_via_pillow(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    img = (np.arange(24).reshape(4, 6) * 10).astype(np.uint8)
    Image.fromarray(img).save(tmp_path / "l.png")
    Image.fromarray(img).save(tmp_path / "r.png")
    pair = load_pair(tmp_path / "l.png", tmp_path / "r.png")
    np.testing.assert_allclose(pair.left, img, atol=0.51)
