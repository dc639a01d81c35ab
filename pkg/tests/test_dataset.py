import json

import numpy as np
import pytest

from oraclemarch.dataset import Dataset, generate_dataset, load_dataset, split_counts
from oraclemarch.errors import CorruptFile, EmptySplit
from oraclemarch.scenes import get_preset


class TestSplits:
    def test_counts(self):
        assert split_counts(10, (0.7, 0.1, 0.2)) == (7, 1, 2)
        assert split_counts(300, (0.7, 0.1, 0.2)) == (210, 30, 60)

    def test_ratios_must_sum_to_one(self):
        with pytest.raises(ValueError):
            split_counts(10, (0.5, 0.1, 0.2))


class TestGeneration:
    def test_manifest_and_splits(self, tiny_dataset):
        ds = tiny_dataset
        assert len(ds.manifest["splits"]["train"]) == 8
        assert len(ds.manifest["splits"]["val"]) == 1
        assert len(ds.manifest["splits"]["test"]) == 3
        assert ds.resolution == (32, 32)
        assert (ds.root / "manifest.json").exists()

    def test_same_seed_identical_bytes(self, tmp_path):
        preset = get_preset("sphere-room")
        a = generate_dataset(preset, tmp_path / "a", n_images=4, resolution=(16, 16), seed=5)
        b = generate_dataset(preset, tmp_path / "b", n_images=4, resolution=(16, 16), seed=5)
        assert (a.root / "manifest.json").read_text() == (b.root / "manifest.json").read_text()
        for rec in a.manifest["images"]:
            for key in ("rgb", "depth"):
                ba = (a.root / rec[key]).read_bytes()
                bb = (b.root / rec[key]).read_bytes()
                assert ba == bb
        c = generate_dataset(preset, tmp_path / "c", n_images=4, resolution=(16, 16), seed=6)
        assert (a.root / "0000.rgb.f32").read_bytes() != (c.root / "0000.rgb.f32").read_bytes()

    def test_depths_in_range_or_background(self, tiny_dataset):
        ds = tiny_dataset
        rng = ds.depth_range
        for rec in ds.manifest["images"]:
            depth = ds.load_depth(rec["id"])
            finite = np.isfinite(depth)
            assert np.all(depth[finite] >= rng.d_min)
            assert np.all(depth[finite] <= rng.d_max)
            assert np.all(np.isinf(depth[~finite]))

    def test_rgb_in_unit_range(self, tiny_dataset):
        rgb = tiny_dataset.load_rgb("0000")
        assert rgb.dtype == np.float32
        assert np.all(rgb >= 0.0) and np.all(rgb <= 1.0)

    def test_depth_is_unified(self, tiny_dataset):
        # stored depth equals camera-hit distance plus the unification backoff
        ds = tiny_dataset
        bundle = ds.ray_bundle("train")
        from oraclemarch.scenes import get_preset, trace_rays

        scene = get_preset("sphere-room").scene
        i = 0
        _, t_cam, hit = trace_rays(bundle["origins"][i], bundle["dirs"][i], scene)
        expected = t_cam + bundle["backoff"][i]
        stored = bundle["depth"][i]
        finite = np.isfinite(stored)
        assert np.allclose(stored[finite], expected[finite], atol=1e-4)


class TestLoading:
    def test_round_trip(self, tiny_dataset):
        ds = load_dataset(tiny_dataset.root)
        assert ds.manifest == tiny_dataset.manifest
        assert np.array_equal(ds.load_rgb("0001"), tiny_dataset.load_rgb("0001"))

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CorruptFile):
            load_dataset(tmp_path)

    def test_truncated_buffer(self, tmp_path):
        preset = get_preset("sphere-room")
        ds = generate_dataset(preset, tmp_path / "d", n_images=3, resolution=(8, 8), seed=1)
        path = ds.root / "0000.rgb.f32"
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CorruptFile):
            ds.load_rgb("0000")

    def test_empty_split(self, tmp_path):
        preset = get_preset("sphere-room")
        ds = generate_dataset(
            preset, tmp_path / "e", n_images=2, resolution=(8, 8), seed=1, ratios=(1.0, 0.0, 0.0)
        )
        with pytest.raises(EmptySplit):
            ds.split_ids("test")

    def test_ray_bundle_shapes(self, tiny_dataset):
        b = tiny_dataset.ray_bundle("val")
        n = len(tiny_dataset.manifest["splits"]["val"])
        hw = 32 * 32
        assert b["origins"].shape == (n, hw, 3)
        assert b["rgb"].shape == (n, hw, 3)
        assert b["depth"].shape == (n, hw)
        norms = np.linalg.norm(b["dirs"][0], axis=1)
        assert np.allclose(norms, 1.0, atol=1e-9)
        # unified origins sit on the circumscribed sphere
        from oraclemarch.geom import circumscribed_sphere

        center, radius = circumscribed_sphere(tiny_dataset.cell)
        dist = np.linalg.norm(b["unified"][0] - center, axis=1)
        assert np.allclose(dist, radius, atol=1e-9)
