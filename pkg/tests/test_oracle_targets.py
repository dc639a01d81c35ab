import numpy as np
import pytest

from oraclemarch.errors import InvalidKernel, OutOfRange
from oraclemarch.oracle_targets import (
    ClassTarget,
    DepthBins,
    DepthMap,
    build_targets,
    depth_smooth,
    discretize_depth,
    discretize_depths,
    neighborhood_filter,
    one_hot_field,
)
from oraclemarch.sampling import DepthRange, log_warp_depth


def brute_neighborhood(values: np.ndarray, k: int) -> np.ndarray:
    """Direct per-pixel transcription of the radial max filter (the class
    vector is the only vectorized axis)."""
    h = k // 2
    height, width, c = values.shape
    out = np.zeros_like(values)
    denom = np.sqrt(2.0) * h if h else 1.0
    for y in range(height):
        for x in range(width):
            best = np.zeros(c, dtype=values.dtype)
            for i in range(-h, h + 1):
                for j in range(-h, h + 1):
                    yy, xx = y + i, x + j
                    if not (0 <= yy < height and 0 <= xx < width):
                        continue
                    pen = values.dtype.type(np.sqrt(i * i + j * j) / denom) if h else 0
                    np.maximum(best, values[yy, xx] - pen, out=best)
            out[y, x] = best
    return out


def brute_depth_smooth(values: np.ndarray, z: int) -> np.ndarray:
    """Direct per-pixel triangle convolution along depth, zero padded."""
    h = z // 2
    height, width, c = values.shape
    out = np.zeros_like(values)
    for y in range(height):
        for x in range(width):
            acc = np.zeros(c, dtype=np.float64)
            for i in range(-h, h + 1):
                w = (h + 1 - abs(i)) / (h + 1)
                lo, hi = max(0, i), min(c, c + i)
                acc[max(0, -i) : max(0, -i) + hi - lo] += (
                    values[y, x, lo:hi].astype(np.float64) * w
                )
            out[y, x] = np.minimum(acc, 1.0).astype(values.dtype)
    return out


@pytest.fixture
def bins():
    return DepthBins(16, DepthRange(0.0, 20.0))


class TestDiscretize:
    def test_endpoints(self, bins):
        assert np.argmax(discretize_depth(0.0, bins)) == 0
        assert np.argmax(discretize_depth(20.0, bins)) == 15
        assert discretize_depth(13.0, bins).sum() == 1.0

    def test_out_of_range(self, bins):
        with pytest.raises(OutOfRange):
            discretize_depth(21.0, bins)

    def test_matches_linear_scan(self, bins, rng):
        d = rng.uniform(0.0, 20.0, size=1000)
        idx = discretize_depths(d, bins)
        edges = bins.edges
        w = np.asarray(log_warp_depth(d, bins.depth_range))
        for depth_w, got in zip(w, idx):
            lin = next(
                z for z in range(bins.c)
                if edges[z] <= depth_w < edges[z + 1] or z == bins.c - 1
            )
            assert lin == got

    def test_bin_centers_round_trip(self, bins):
        centers = bins.centers_world
        assert np.all(np.diff(centers) > 0)
        assert np.array_equal(discretize_depths(centers, bins), np.arange(bins.c))


class TestNeighborhoodFilter:
    def test_golden_contributions_k5(self):
        # distances 0,1,2,3 from a single hot pixel
        values = np.zeros((7, 7, 1), dtype=np.float32)
        values[3, 3, 0] = 1.0
        out = neighborhood_filter(ClassTarget(values), 5).values
        assert out[3, 3, 0] == pytest.approx(1.0, abs=5e-3)
        assert out[3, 4, 0] == pytest.approx(0.6464466, abs=5e-3)
        assert out[3, 5, 0] == pytest.approx(0.2928932, abs=5e-3)
        assert out[3, 6, 0] == pytest.approx(0.0, abs=5e-3)

    def test_identity_when_k1(self, rng):
        values = rng.random((5, 6, 4)).astype(np.float32)
        out = neighborhood_filter(ClassTarget(values), 1).values
        assert np.array_equal(out, values)

    def test_invalid_kernel(self):
        with pytest.raises(InvalidKernel):
            neighborhood_filter(ClassTarget(np.zeros((2, 2, 2), dtype=np.float32)), 4)
        with pytest.raises(InvalidKernel):
            depth_smooth(ClassTarget(np.zeros((2, 2, 2), dtype=np.float32)), 0)

    def test_matches_brute_force_exactly(self, rng):
        for k in (3, 5, 9):
            values = (rng.random((16, 16, 8)) * (rng.random((16, 16, 8)) > 0.6)).astype(
                np.float32
            )
            got = neighborhood_filter(ClassTarget(values), k).values
            assert np.array_equal(got, brute_neighborhood(values, k))

    def test_monotone_in_k(self, rng):
        values = (rng.random((12, 12, 6)) > 0.8).astype(np.float32)
        k3 = neighborhood_filter(ClassTarget(values), 3).values
        k5 = neighborhood_filter(ClassTarget(values), 5).values
        assert np.all(k5 >= k3 - 1e-7)


class TestDepthSmooth:
    def test_triangle_weights_on_one_hot(self):
        values = np.zeros((1, 1, 9), dtype=np.float32)
        values[0, 0, 4] = 1.0
        out = depth_smooth(ClassTarget(values), 5).values[0, 0]
        assert np.allclose(out[2:7], [1 / 3, 2 / 3, 1.0, 2 / 3, 1 / 3], atol=1e-6)
        assert np.allclose(out[:2], 0.0) and np.allclose(out[7:], 0.0)

    def test_saturation(self):
        values = np.ones((3, 3, 8), dtype=np.float32)
        out = depth_smooth(ClassTarget(values), 5).values
        assert np.allclose(out, 1.0)

    def test_matches_brute_force_exactly(self, rng):
        values = rng.random((16, 16, 8)).astype(np.float32)
        got = depth_smooth(ClassTarget(values), 5).values
        assert np.array_equal(got, brute_depth_smooth(values, 5))

    def test_identity_when_z1(self, rng):
        values = rng.random((4, 4, 5)).astype(np.float32)
        assert np.array_equal(depth_smooth(ClassTarget(values), 1).values, values)


class TestBuildTargets:
    def test_k1_z1_is_pure_one_hot(self, bins, rng):
        depth = rng.uniform(0.5, 19.5, size=(6, 6)).astype(np.float32)
        dm = DepthMap(depth=depth, valid=np.ones((6, 6), bool))
        out = build_targets(dm, bins, 1, 1).values
        assert np.array_equal(out, one_hot_field(dm, bins).values)
        assert np.all(out.sum(axis=2) == 1.0)

    def test_constant_depth_translation_invariant(self, bins):
        dm = DepthMap(depth=np.full((8, 8), 7.0, np.float32), valid=np.ones((8, 8), bool))
        out = build_targets(dm, bins, 5, 5).values
        assert np.allclose(out, out[0, 0][None, None, :])

    def test_background_goes_to_last_bin(self, bins):
        dm = DepthMap(depth=np.zeros((4, 4), np.float32), valid=np.zeros((4, 4), bool))
        out = build_targets(dm, bins, 1, 1).values
        assert np.all(out[:, :, -1] == 1.0)
        assert np.all(out[:, :, :-1] == 0.0)

    def test_two_plane_edge_carries_both_bins(self, bins):
        # left half at depth 3, right half at depth 15: pixels within 2 px of
        # the edge see both surfaces after the k=5 filter
        depth = np.full((8, 8), 3.0, np.float32)
        depth[:, 4:] = 15.0
        dm = DepthMap(depth=depth, valid=np.ones((8, 8), bool))
        out = build_targets(dm, bins, 5, 1).values
        near_bin = int(discretize_depths(np.float64(3.0), bins))
        far_bin = int(discretize_depths(np.float64(15.0), bins))
        edge_px = out[4, 3]
        assert edge_px[near_bin] == 1.0
        assert edge_px[far_bin] == pytest.approx(0.6464466, abs=5e-3)
        # reference via the filter equation by hand: nearest far-column pixel
        # is 1 px away -> 1 - 1/(2 sqrt(2))
        assert out[4, 2, far_bin] == pytest.approx(1 - 2 / (2 * np.sqrt(2)), abs=5e-3)

    def test_surface_bin_never_weakened(self, bins, rng):
        depth = rng.uniform(0.5, 19.5, size=(10, 10)).astype(np.float32)
        dm = DepthMap(depth=depth, valid=np.ones((10, 10), bool))
        after_k = neighborhood_filter(ClassTarget(one_hot_field(dm, bins).values), 5)
        final = depth_smooth(after_k, 5).values
        idx = discretize_depths(depth.astype(np.float64), bins)
        ys, xs = np.mgrid[0:10, 0:10]
        surface_after_k = after_k.values[ys, xs, idx]
        surface_final = final[ys, xs, idx]
        assert np.all(surface_final >= np.minimum(surface_after_k, 1.0) - 1e-6)

    def test_range_invariant(self, bins, rng):
        depth = rng.uniform(0.0, 20.0, size=(12, 12)).astype(np.float32)
        valid = rng.random((12, 12)) > 0.2
        dm = DepthMap(depth=np.where(valid, depth, 0.0), valid=valid)
        out = build_targets(dm, bins, 5, 5).values
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


class TestTargetCache:
    def test_round_trip(self, bins, rng, tmp_path):
        depth = rng.uniform(0.5, 19.5, size=(6, 7)).astype(np.float32)
        dm = DepthMap(depth=depth, valid=np.ones((6, 7), bool))
        target = build_targets(dm, bins, 5, 3)
        from oraclemarch.oracle_targets import read_target_cache, write_target_cache

        path = tmp_path / "t.f32"
        write_target_cache(path, target, 5, 3)
        back = read_target_cache(path, expect_k=5, expect_z=3)
        assert np.array_equal(back.values, target.values)

    def test_mismatched_filters_rejected(self, bins, rng, tmp_path):
        from oraclemarch.errors import CorruptFile
        from oraclemarch.oracle_targets import read_target_cache, write_target_cache

        dm = DepthMap(depth=np.full((4, 4), 5.0, np.float32), valid=np.ones((4, 4), bool))
        path = tmp_path / "t.f32"
        write_target_cache(path, build_targets(dm, bins, 3, 3), 3, 3)
        with pytest.raises(CorruptFile):
            read_target_cache(path, expect_k=5, expect_z=3)
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(CorruptFile):
            read_target_cache(path)

    def test_training_uses_cache(self, tiny_dataset, tmp_path):
        import dataclasses

        from oraclemarch.train import OracleTrainConfig, train_oracle

        cfg = OracleTrainConfig(
            iterations=40, batch_rays=64, val_every=40, bins=16, inputs=16, k=3, z=3,
            target_cache_dir=str(tmp_path),
        )
        first = train_oracle(tiny_dataset, cfg)
        cached = sorted(p.name for p in tmp_path.iterdir())
        assert len(cached) == 9  # train + val images
        second = train_oracle(tiny_dataset, cfg)
        for a, b in zip(first.oracle_params.weights, second.oracle_params.weights):
            assert np.array_equal(a, b)
