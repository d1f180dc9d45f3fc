import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointsel.geometry import CameraIntrinsics
from pointsel.scene import (
    DepthFrame,
    MaskFormatError,
    ObjectMask,
    compute_centroid,
    mask_foreground_coords,
    mask_outline,
    rle_decode,
    rle_encode,
    sample_depth_robust,
)

# cx/cy on half-pixel centers so a 10x10 block of integer pixel coordinates
# can be exactly symmetric about the principal point.
INTR = CameraIntrinsics(fx=600, fy=600, cx=319.5, cy=239.5, width=640, height=480, depth_scale=0.001)


def square_mask(u0, v0, size, width=640, height=480):
    bitmap = np.zeros((height, width), dtype=bool)
    bitmap[v0 : v0 + size, u0 : u0 + size] = True
    return rle_encode(bitmap)


def filtered_mean_oracle(mask, depth, intr, mad_factor=2.0):
    """Independent centroid: explicit deproject + MAD filter + mean."""
    us, vs = mask_foreground_coords(mask)
    zs = depth.data[vs, us].astype(float) * depth.depth_scale
    keep = zs > 0
    us, vs, zs = us[keep], vs[keep], zs[keep]
    med = np.median(zs)
    mad = np.median(np.abs(zs - med))
    band = mad_factor * mad + depth.depth_scale  # one-raw-unit floor is additive
    keep = np.abs(zs - med) <= band
    us, vs, zs = us[keep], vs[keep], zs[keep]
    x = (us - intr.cx) * zs / intr.fx
    y = (vs - intr.cy) * zs / intr.fy
    return np.array([x.mean(), y.mean(), zs.mean()]), len(zs)


class TestSampleDepthRobust:
    def test_uniform(self):
        depth = DepthFrame.constant(20, 20, 1000, 0.001)
        assert sample_depth_robust(10, 10, depth) == pytest.approx(1.0)

    def test_center_invalid_uses_neighbor_median(self):
        data = np.zeros((5, 5), dtype=np.uint16)
        data[2, 1], data[2, 2], data[2, 3] = 998, 0, 1002
        data[1, 2] = 1000
        depth = DepthFrame(5, 5, data, 0.001)
        # valid values 998, 1000, 1002 -> median 1000
        assert sample_depth_robust(2, 2, depth, window=5) == pytest.approx(1.0)

    def test_all_invalid_returns_none(self):
        depth = DepthFrame.constant(10, 10, 0, 0.001)
        assert sample_depth_robust(5, 5, depth) is None

    def test_even_window_rejected(self):
        depth = DepthFrame.constant(10, 10, 1000, 0.001)
        with pytest.raises(ValueError):
            sample_depth_robust(5, 5, depth, window=4)

    def test_window_clipped_at_border(self):
        depth = DepthFrame.constant(10, 10, 500, 0.002)
        assert sample_depth_robust(0, 0, depth) == pytest.approx(1.0)


class TestComputeCentroid:
    def test_symmetric_square_on_plane(self):
        # 10x10 block symmetric about (cx, cy) = (319.5, 239.5)
        mask = square_mask(315, 235, 10)
        depth = DepthFrame.constant(640, 480, 800, 0.001)
        result = compute_centroid(mask, depth, INTR)
        assert result is not None
        c, count = result
        assert count == 100
        assert abs(c.x) <= 1e-6
        assert abs(c.y) <= 1e-6
        assert abs(c.z - 0.8) <= 1e-6

    def test_mad_rejects_depth_spike(self):
        mask = square_mask(315, 235, 10)
        data = np.full((480, 640), 800, dtype=np.uint16)
        data[237, 317] = 8000  # single 10x spike inside the mask
        depth = DepthFrame(640, 480, data, 0.001)
        result = compute_centroid(mask, depth, INTR)
        assert result is not None
        c, count = result
        assert count == 99
        assert abs(c.x) <= 1e-3
        assert abs(c.y) <= 1e-3
        assert abs(c.z - 0.8) <= 1e-3
        oracle, n = filtered_mean_oracle(mask, depth, INTR)
        assert n == 99
        assert np.allclose([c.x, c.y, c.z], oracle, atol=1e-12)

    def test_fully_invalid_depth_returns_none(self):
        mask = square_mask(315, 235, 10)
        depth = DepthFrame.constant(640, 480, 0, 0.001)
        assert compute_centroid(mask, depth, INTR) is None

    def test_dimension_mismatch(self):
        mask = square_mask(2, 2, 3, width=10, height=10)
        depth = DepthFrame.constant(640, 480, 800, 0.001)
        with pytest.raises(ValueError):
            compute_centroid(mask, depth, INTR)

    def test_matches_oracle_on_random_scenes(self):
        rng = np.random.default_rng(11)
        depthdata = rng.integers(700, 900, (480, 640)).astype(np.uint16)
        depth = DepthFrame(640, 480, depthdata, 0.001)
        for _ in range(20):
            u0 = int(rng.integers(0, 600))
            v0 = int(rng.integers(0, 440))
            mask = square_mask(u0, v0, int(rng.integers(3, 30)))
            result = compute_centroid(mask, depth, INTR)
            oracle, n = filtered_mean_oracle(mask, depth, INTR)
            assert result is not None
            c, count = result
            assert count == n
            assert np.allclose([c.x, c.y, c.z], oracle, atol=1e-9)

    def test_translation_equivariance(self):
        depth = DepthFrame.constant(640, 480, 800, 0.001)
        (c0, _) = compute_centroid(square_mask(315, 235, 10), depth, INTR)
        du, dv = 40, -30
        (c1, _) = compute_centroid(square_mask(315 + du, 235 + dv, 10), depth, INTR)
        z = 0.8
        assert c1.x - c0.x == pytest.approx(du * z / INTR.fx, abs=1e-6)
        assert c1.y - c0.y == pytest.approx(dv * z / INTR.fy, abs=1e-6)
        assert c1.z == pytest.approx(c0.z, abs=1e-6)

    def test_centroid_inside_hull_and_count_bounded(self):
        rng = np.random.default_rng(3)
        depthdata = rng.integers(750, 850, (480, 640)).astype(np.uint16)
        depth = DepthFrame(640, 480, depthdata, 0.001)
        mask = square_mask(100, 100, 20)
        (c, count) = compute_centroid(mask, depth, INTR)
        us, vs = mask_foreground_coords(mask)
        assert count <= us.size
        zs = depthdata[vs, us] * 0.001
        xs = (us - INTR.cx) * zs / INTR.fx
        ys = (vs - INTR.cy) * zs / INTR.fy
        # axis-aligned bounding box contains the hull, hence the centroid
        assert xs.min() <= c.x <= xs.max()
        assert ys.min() <= c.y <= ys.max()
        assert zs.min() <= c.z <= zs.max()


class TestRle:
    def test_all_background(self):
        bitmap = np.zeros((4, 4), dtype=bool)
        assert rle_encode(bitmap).runs == (16,)

    def test_all_foreground(self):
        bitmap = np.ones((4, 4), dtype=bool)
        assert rle_encode(bitmap).runs == (0, 16)

    def test_bad_run_sum_rejected(self):
        with pytest.raises(MaskFormatError):
            ObjectMask(4, 4, (3, 4))
        with pytest.raises(MaskFormatError):
            ObjectMask(4, 4, (-1, 17))

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(1, 12),
        st.integers(1, 12),
        st.integers(0, 2**32 - 1),
    )
    def test_round_trip_random_bitmaps(self, w, h, seed):
        bitmap = np.random.default_rng(seed).random((h, w)) < 0.5
        assert (rle_decode(rle_encode(bitmap)) == bitmap).all()

    def test_many_random_round_trips(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            w, h = int(rng.integers(1, 16)), int(rng.integers(1, 16))
            bitmap = rng.random((h, w)) < rng.random()
            assert (rle_decode(rle_encode(bitmap)) == bitmap).all()


class TestMaskOutline:
    def test_outline_points_lie_on_boundary(self):
        mask = square_mask(100, 100, 20)
        outline = mask_outline(mask, step=1)
        bitmap = rle_decode(mask)
        assert len(outline) > 0
        for u, v in outline:
            assert bitmap[v, u]
            neighborhood = bitmap[max(v - 1, 0) : v + 2, max(u - 1, 0) : u + 2]
            assert neighborhood.size < 9 or not neighborhood.all()

    def test_empty_mask_has_empty_outline(self):
        assert mask_outline(ObjectMask(8, 8, (64,))) == []
