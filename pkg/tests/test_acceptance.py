"""Acceptance suite: one test per criterion, each printing a pass line.

The quality criteria (A6-A8) train real pipelines at desk scale on a 2-core
CPU budget; they are the slow part of the suite (~25 min together). Run just
the fast criteria with:  pytest tests/test_acceptance.py -m "not slow".
"""
import dataclasses
import subprocess
import sys
import time

import numpy as np
import pytest

from oraclemarch import net
from oraclemarch.dataset import generate_dataset, load_dataset
from oraclemarch.geom import ViewCell, circumscribed_sphere, unify_rays
from oraclemarch.kernels import composite_backward, composite_forward
from oraclemarch.metrics import evaluate, pipeline_flops_per_pixel, psnr
from oraclemarch.oracle_targets import ClassTarget, neighborhood_filter, depth_smooth
from oraclemarch.render import PipelineConfig, opacity_loss_batch
from oraclemarch.sampling import (
    DepthRange,
    log_unwarp_depth,
    log_warp_depth,
    sample_from_pdf,
)
from oraclemarch.scenes import get_preset
from oraclemarch.train import (
    OracleTrainConfig,
    ShadingTrainConfig,
    train_oracle,
    train_shading,
)
from tests.test_oracle_targets import brute_depth_smooth, brute_neighborhood

RESULTS: list[str] = []


def report(name: str, ok: bool, detail: str):
    line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """sphere-room at desk scale: 60 images, 64x64, fixed seed."""
    out = tmp_path_factory.mktemp("desk_sphere")
    return generate_dataset(
        get_preset("sphere-room"), out, n_images=60, resolution=(64, 64), seed=0
    )


@pytest.fixture(scope="session")
def corridor_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk_corridor")
    return generate_dataset(
        get_preset("corridor"), out, n_images=60, resolution=(64, 64), seed=0
    )


def test_a1_gradient_oracle():
    """Analytic gradients of total_loss(composite(forward(...))) match
    64-bit central finite differences for 20 random small networks."""
    start = time.time()
    rng = np.random.default_rng(20)
    worst = 0.0
    for trial in range(20):
        r, x = 2, 2
        in_dim = int(rng.integers(3, 12))
        skip_dim = int(rng.integers(2, 8))
        hl = int(rng.integers(1, 5))
        width = int(rng.integers(4, 33))
        use_skip = bool(rng.integers(0, 2))
        cfg = net.MLPConfig(
            in_dim=in_dim, out_dim=4, hidden_layers=hl, hidden_width=width,
            skip_layer=hl if use_skip else None, skip_dim=skip_dim if use_skip else 0,
            output_activation="sigmoid",
        )
        params = net.init_params(cfg, seed=trial, dtype=np.float64)
        feats = rng.standard_normal((r * x, in_dim))
        skip = rng.standard_normal((r * x, skip_dim)) if use_skip else None
        target = rng.random((r, 3))
        bg = rng.random(3)
        la, lb = 1.0, 10.0

        def loss():
            out, _ = net.forward(params, cfg, feats, skip=skip, want_cache=False)
            rgb = np.ascontiguousarray(out[:, :3].reshape(r, x, 3))
            alpha = np.ascontiguousarray(out[:, 3].reshape(r, x))
            pred, _ = composite_forward(rgb, alpha, bg)
            op, _ = opacity_loss_batch(alpha)
            return float(la * np.mean((pred - target) ** 2) + lb * np.mean(op))

        out, cache = net.forward(params, cfg, feats, skip=skip)
        rgb = np.ascontiguousarray(out[:, :3].reshape(r, x, 3))
        alpha = np.ascontiguousarray(out[:, 3].reshape(r, x))
        pred, _ = composite_forward(rgb, alpha, bg)
        g_pred = la * 2.0 / pred.size * (pred - target)
        g_rgb, g_alpha = composite_backward(rgb, alpha, bg, g_pred, np.zeros(r))
        _, g_op = opacity_loss_batch(alpha)
        g_alpha = g_alpha + lb / r * g_op
        g_out = np.concatenate(
            [g_rgb.reshape(r * x, 3), g_alpha.reshape(r * x, 1)], axis=1
        )
        gw, gb, _, _ = net.backward(params, cfg, cache, g_out=g_out)

        h = 1e-5
        for arrs, grads in ((params.weights, gw), (params.biases, gb)):
            for a, g in zip(arrs, grads):
                fd = np.zeros_like(a)
                flat, fdf = a.reshape(-1), fd.reshape(-1)
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + h
                    fp = loss()
                    flat[i] = orig - h
                    fm = loss()
                    flat[i] = orig
                    fdf[i] = (fp - fm) / (2 * h)
                rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
                worst = max(worst, rel)
        assert worst <= 1e-6, f"trial {trial}: relative error {worst:.2e}"
    elapsed = time.time() - start
    report("A1 gradient-oracle", worst <= 1e-6 and elapsed < 30,
           f"max tensor rel err {worst:.2e}, {elapsed:.1f}s")


def test_a2_filter_golden_values():
    start = time.time()
    values = np.zeros((9, 9, 1), dtype=np.float32)
    values[4, 4, 0] = 1.0
    out = neighborhood_filter(ClassTarget(values), 5).values
    golden = {0: 1.0, 1: 0.6464466, 2: 0.2928932, 3: 0.0}
    ok = all(abs(out[4, 4 + d, 0] - v) <= 5e-3 for d, v in golden.items())
    rng = np.random.default_rng(2)
    exact = True
    for _ in range(50):
        t = (rng.random((16, 16, 8)) * (rng.random((16, 16, 8)) > 0.5)).astype(np.float32)
        exact &= np.array_equal(
            neighborhood_filter(ClassTarget(t), 5).values, brute_neighborhood(t, 5)
        )
        exact &= np.array_equal(depth_smooth(ClassTarget(t), 5).values, brute_depth_smooth(t, 5))
    elapsed = time.time() - start
    report("A2 filter-golden", ok and exact and elapsed < 10,
           f"contributions 1/.646/.293/0 ok={ok}, 50x brute-force exact={exact}, {elapsed:.1f}s")


def test_a3_inverse_cdf():
    start = time.time()
    rng = np.random.default_rng(3)
    c = 32
    edges = np.linspace(0.0, 1.0, c + 1)
    depth_range = DepthRange(0.0, 1.0)
    worst = 0.0
    for _ in range(100):
        pdf = rng.random(c) * (rng.random(c) > 0.3)
        if pdf.sum() <= 1e-6:
            pdf[0] = 1.0
        for x in (2, 4, 8, 16):
            t = sample_from_pdf(pdf, edges, x, depth_range)
            warped = np.asarray(log_warp_depth(np.atleast_1d(t), depth_range))
            counts = np.histogram(warped, bins=edges)[0]
            expected = x * pdf / pdf.sum()
            worst = max(worst, float(np.abs(counts - expected).max()))
    uniform_ref = sample_from_pdf(np.ones(c), edges, 8, depth_range)
    degenerate = sample_from_pdf(np.zeros(c), edges, 8, depth_range)
    fallback_ok = np.allclose(uniform_ref, degenerate, atol=1e-12)
    elapsed = time.time() - start
    report("A3 inverse-cdf", worst <= 1.0 + 1e-9 and fallback_ok and elapsed < 5,
           f"max |count - x*mass| = {worst:.3f}, degenerate fallback ok={fallback_ok}, "
           f"{elapsed:.1f}s")


def test_a4_unification_and_warp():
    start = time.time()
    rng = np.random.default_rng(4)
    cell = ViewCell(center=(0.5, -0.25, 1.0), size=(1.4, 0.9, 1.1), forward=(0, 0, 1))
    center, radius = circumscribed_sphere(cell)
    worst_pair = 0.0
    n_pairs = 0
    while n_pairs < 1000:
        o = cell.center + rng.uniform(-0.5, 0.5, 3) * cell.size
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        o2 = o + rng.uniform(0.0, 0.4) * d
        if np.linalg.norm(o2 - center) >= radius:
            continue
        u1, _ = unify_rays(o[None], d[None], center, radius)
        u2, _ = unify_rays(o2[None], d[None], center, radius)
        worst_pair = max(worst_pair, float(np.abs(u1 - u2).max()))
        n_pairs += 1
    depth_range = DepthRange(0.25, 80.0)
    d = rng.uniform(depth_range.d_min, depth_range.d_max, size=4096)
    back = np.asarray(log_unwarp_depth(log_warp_depth(d, depth_range), depth_range))
    worst_rt = float(np.abs(back - d).max())
    elapsed = time.time() - start
    ok = worst_pair <= 1e-6 and worst_rt <= 1e-9 * depth_range.extent and elapsed < 5
    report("A4 unification+warp", ok,
           f"1000 coincident pairs max {worst_pair:.2e}, round trip max {worst_rt:.2e}, "
           f"{elapsed:.1f}s")


def test_a5_flop_ratio():
    start = time.time()
    from oraclemarch.checkpoint import Checkpoint
    from oraclemarch.sampling import EncodingConfig

    enc = EncodingConfig()
    shading_cfg = net.MLPConfig(
        in_dim=enc.pos_dim, out_dim=4, hidden_layers=7, hidden_width=256,
        skip_layer=7, skip_dim=enc.dir_dim, output_activation="sigmoid",
    )
    oracle_cfg = net.MLPConfig(
        in_dim=6 + 3 * 128, out_dim=128, hidden_layers=7, hidden_width=256,
        output_activation="sigmoid",
    )
    cell = ViewCell(center=(0, 0, 0), size=(1, 1, 1), forward=(0, 0, 1))
    guided = Checkpoint(
        cell=cell, depth_range=DepthRange(0.0, 10.0), encoding=enc,
        pipeline=PipelineConfig(samples=4, bins=128, oracle_inputs=128),
        oracle_cfg=oracle_cfg, oracle_params=net.init_params(oracle_cfg, 0),
        shading_cfg=shading_cfg, shading_params=net.init_params(shading_cfg, 0),
    )
    dense_eval = net.flop_count(shading_cfg)
    dense_total = 256 * dense_eval  # 64 + 64 + 128 evaluations
    guided_total = pipeline_flops_per_pixel(guided, samples=4)
    ratio = dense_total / guided_total
    elapsed = time.time() - start
    report("A5 flop-ratio", 41.0 <= ratio <= 56.0 and elapsed < 1,
           f"dense {dense_total/1e6:.2f} MFLOP vs guided {guided_total/1e6:.2f} MFLOP, "
           f"ratio {ratio:.1f}x, {elapsed:.1f}s")


ORACLE_ITERS = 6000
SHADING_ITERS = 6000


@pytest.fixture(scope="session")
def k5_oracle(desk_dataset):
    return train_oracle(
        desk_dataset,
        OracleTrainConfig(iterations=ORACLE_ITERS, batch_rays=1024, k=5, z=5, seed=0),
    )


@pytest.mark.slow
def test_a6_end_to_end_quality(desk_dataset, k5_oracle):
    """Guided sampling beats the blind baseline; ground-truth-local sampling
    at 2 samples matches dense uniform sampling at 64."""
    start = time.time()
    guided4 = train_shading(
        desk_dataset,
        k5_oracle,
        ShadingTrainConfig(iterations=2500, batch_rays=1024, samples=4, mode="logwarp", seed=0),
    )
    uniform4 = train_shading(
        desk_dataset,
        None,
        ShadingTrainConfig(iterations=2500, batch_rays=1024, samples=4, mode="uniform", seed=0),
    )
    p_guided = evaluate(guided4, desk_dataset, split="test")["mean_psnr"]
    p_uniform = evaluate(uniform4, desk_dataset, split="test")["mean_psnr"]

    pair = dict(batch_rays=1024, seed=0)  # equal iterations for the local pair
    local2 = train_shading(
        desk_dataset,
        None,
        ShadingTrainConfig(iterations=900, samples=2, mode="local-gt", local_base="uniform", **pair),
    )
    uniform64 = train_shading(
        desk_dataset,
        None,
        ShadingTrainConfig(iterations=900, samples=64, mode="uniform", **pair),
    )
    p_local2 = evaluate(local2, desk_dataset, split="test")["mean_psnr"]
    p_uniform64 = evaluate(uniform64, desk_dataset, split="test")["mean_psnr"]
    elapsed = time.time() - start
    ok_a = p_guided >= p_uniform + 1.0
    ok_b = p_local2 >= p_uniform64 - 1.5
    report(
        "A6 end-to-end-quality",
        ok_a and ok_b and elapsed < 1200,
        f"(a) guided-4 {p_guided:.2f} vs uniform-4 {p_uniform:.2f} dB "
        f"(+{p_guided - p_uniform:.2f}, need >= 1); "
        f"(b) local-2 {p_local2:.2f} vs uniform-64 {p_uniform64:.2f} dB "
        f"({p_local2 - p_uniform64:+.2f}, need >= -1.5); {elapsed:.0f}s",
    )


@pytest.mark.slow
def test_a7_sampling_strategy_ordering(corridor_dataset):
    """On a deep scene, log-spaced samples beat uniform and warped encoding
    does not hurt, mirroring the published ordering."""
    start = time.time()
    scores = {}
    for mode in ("uniform", "log", "logwarp"):
        ck = train_shading(
            corridor_dataset,
            None,
            ShadingTrainConfig(iterations=4000, batch_rays=1024, samples=4, mode=mode, seed=0),
        )
        scores[mode] = evaluate(ck, corridor_dataset, split="test")["mean_psnr"]
    elapsed = time.time() - start
    ok = scores["logwarp"] >= scores["log"] >= scores["uniform"] - 0.2
    report(
        "A7 sampling-ordering",
        ok and elapsed < 1800,
        f"logwarp {scores['logwarp']:.2f} >= log {scores['log']:.2f} "
        f">= uniform-0.2 {scores['uniform'] - 0.2:.2f} dB; {elapsed:.0f}s",
    )


@pytest.mark.slow
def test_a8_oracle_variant_ordering(desk_dataset, k5_oracle):
    """Classified depth beats single-depth regression, image-space filtering
    beats none, and ray unification never hurts (directional only)."""
    start = time.time()
    shading = ShadingTrainConfig(
        iterations=SHADING_ITERS, batch_rays=1024, samples=2, mode="logwarp", seed=0
    )

    def full(oracle_cfg, oracle_ckpt=None):
        ck = oracle_ckpt or train_oracle(desk_dataset, oracle_cfg)
        full_ckpt = train_shading(desk_dataset, ck, shading)
        return evaluate(full_ckpt, desk_dataset, split="test")["mean_psnr"]

    base = dict(iterations=ORACLE_ITERS, batch_rays=1024, seed=0)
    p_k5 = full(None, oracle_ckpt=k5_oracle)
    p_k1 = full(OracleTrainConfig(k=1, z=1, **base))
    p_sdu = full(OracleTrainConfig(single_depth=True, unify=True, **base))
    p_sd = full(OracleTrainConfig(single_depth=True, unify=False, **base))
    elapsed = time.time() - start
    ok = p_k5 > p_k1 > p_sdu >= p_sd
    report(
        "A8 oracle-ordering",
        ok and elapsed < 2400,
        f"classified k5 {p_k5:.2f} > k1 {p_k1:.2f} > sd-unified {p_sdu:.2f} "
        f">= sd {p_sd:.2f} dB; {elapsed:.0f}s",
    )


@pytest.mark.slow
def test_a9_strict_determinism(tmp_path):
    """Strict-mode reruns of data generation plus both training phases
    produce bit-identical checkpoints."""
    start = time.time()
    outputs = []
    for tag in ("a", "b"):
        root = tmp_path / tag
        cli = [sys.executable, "-m", "oraclemarch.cli", "--strict"]
        data = root / "data"
        oracle = root / "oracle.ormc"
        full = root / "full.ormc"
        for args in (
            ["gen-data", "--scene", "sphere-room", "--images", "10",
             "--resolution", "24x24", "--seed", "11", "--out", str(data)],
            ["train-oracle", "--data", str(data), "--iters", "150", "--batch", "256",
             "--val-every", "75", "--bins", "32", "--i", "32", "--out", str(oracle)],
            ["train-shading", "--data", str(data), "--oracle", str(oracle),
             "--iters", "150", "--batch", "256", "--val-every", "75",
             "--samples", "2", "--out", str(full)],
        ):
            r = subprocess.run([*cli, *args], capture_output=True, text=True)
            assert r.returncode == 0, r.stderr
        outputs.append(
            (
                (data / "manifest.json").read_bytes(),
                (data / "0000.rgb.f32").read_bytes(),
                oracle.read_bytes(),
                full.read_bytes(),
            )
        )
    same = all(a == b for a, b in zip(outputs[0], outputs[1]))
    elapsed = time.time() - start
    report("A9 determinism", same, f"manifest/buffers/oracle/full bit-identical={same}, "
           f"{elapsed:.0f}s")


def test_zz_summary():
    print("\n" + "=" * 72)
    for line in RESULTS:
        print(line)
    print("=" * 72)
