import numpy as np
import pytest

from oraclemarch import net
from oraclemarch.errors import MissingCache, ShapeMismatch


def finite_difference(loss_fn, params, h=1e-5):
    """Central differences over every parameter tensor."""
    gw, gb = [], []
    for arrs, grads in ((params.weights, gw), (params.biases, gb)):
        for a in arrs:
            g = np.zeros_like(a)
            flat = a.reshape(-1)
            gf = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = loss_fn()
                flat[i] = orig - h
                fm = loss_fn()
                flat[i] = orig
                gf[i] = (fp - fm) / (2 * h)
            grads.append(g)
    return gw, gb


class TestInit:
    def test_deterministic(self):
        cfg = net.MLPConfig(in_dim=5, out_dim=3, hidden_layers=2, hidden_width=8)
        p1 = net.init_params(cfg, seed=11)
        p2 = net.init_params(cfg, seed=11)
        for a, b in zip(p1.weights, p2.weights):
            assert np.array_equal(a, b)
        p3 = net.init_params(cfg, seed=12)
        assert not np.array_equal(p1.weights[0], p3.weights[0])

    def test_xavier_bound(self):
        cfg = net.MLPConfig(in_dim=256, out_dim=256, hidden_layers=1, hidden_width=256)
        params = net.init_params(cfg, seed=0)
        bound = np.sqrt(6.0 / 512.0)
        assert bound == pytest.approx(0.10825317547305482, abs=1e-12)
        for w in params.weights:
            assert np.abs(w).max() <= bound + 1e-7

    def test_zero_biases(self):
        cfg = net.MLPConfig(in_dim=4, out_dim=2, hidden_layers=3, hidden_width=6)
        params = net.init_params(cfg, seed=0)
        for b in params.biases:
            assert np.all(b == 0.0)


class TestForward:
    def test_zero_params(self):
        cfg = net.MLPConfig(in_dim=4, out_dim=2, hidden_layers=1, hidden_width=4,
                            output_activation="none")
        params = net.init_params(cfg, seed=0)
        for w in params.weights:
            w *= 0.0
        y, _ = net.forward(params, cfg, np.ones((3, 4)))
        assert np.all(y == 0.0)
        cfg_s = net.MLPConfig(in_dim=4, out_dim=2, hidden_layers=1, hidden_width=4,
                              output_activation="sigmoid")
        y, _ = net.forward(params, cfg_s, np.ones((3, 4)))
        assert np.allclose(y, 0.5)

    def test_identity_layer(self):
        cfg = net.MLPConfig(in_dim=3, out_dim=3, hidden_layers=0, hidden_width=1)
        params = net.MLPParams([np.eye(3, dtype=np.float32)], [np.zeros(3, np.float32)])
        x = np.array([[0.1, -0.2, 0.3]], dtype=np.float32)
        y, _ = net.forward(params, cfg, x)
        assert np.allclose(y, x, atol=1e-7)

    def test_matches_reference_matmul(self, rng):
        cfg = net.MLPConfig(in_dim=16, out_dim=4, hidden_layers=4, hidden_width=16,
                            output_activation="none")
        params = net.init_params(cfg, seed=3, dtype=np.float64)
        x = rng.standard_normal((10, 16))
        y, _ = net.forward(params, cfg, x)
        h = x
        for layer in range(cfg.n_layers):
            z = h @ params.weights[layer] + params.biases[layer]
            h = np.maximum(z, 0.0) if layer < cfg.hidden_layers else z
        assert np.allclose(y, h, atol=1e-6)

    def test_shape_mismatch(self):
        cfg = net.MLPConfig(in_dim=4, out_dim=2, hidden_layers=1, hidden_width=4)
        params = net.init_params(cfg, seed=0)
        with pytest.raises(ShapeMismatch):
            net.forward(params, cfg, np.ones((3, 5)))

    def test_skip_input_required(self):
        cfg = net.MLPConfig(in_dim=4, out_dim=2, hidden_layers=1, hidden_width=4,
                            skip_layer=1, skip_dim=3)
        params = net.init_params(cfg, seed=0)
        with pytest.raises(ShapeMismatch):
            net.forward(params, cfg, np.ones((3, 4)))


class TestBackward:
    def test_hand_derived_linear(self):
        # loss = sum(outputs) of one linear layer: dW = sum over batch of
        # outer(x, ones), db = batch size
        cfg = net.MLPConfig(in_dim=3, out_dim=2, hidden_layers=0, hidden_width=1,
                            output_activation="none")
        params = net.init_params(cfg, seed=0, dtype=np.float64)
        x = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        y, cache = net.forward(params, cfg, x)
        gw, gb, gx, _ = net.backward(params, cfg, cache, g_out=np.ones_like(y))
        assert np.allclose(gw[0], x.sum(axis=0)[:, None] @ np.ones((1, 2)))
        assert np.allclose(gb[0], [2.0, 2.0])
        assert np.allclose(gx, np.ones((2, 2)) @ params.weights[0].T)

    def test_missing_cache(self):
        cfg = net.MLPConfig(in_dim=3, out_dim=2, hidden_layers=0, hidden_width=1)
        params = net.init_params(cfg, seed=0)
        with pytest.raises(MissingCache):
            net.backward(params, cfg, None, g_out=np.ones((1, 2)))

    def test_relu_subgradient_zero_at_zero(self):
        cfg = net.MLPConfig(in_dim=1, out_dim=1, hidden_layers=1, hidden_width=1,
                            output_activation="none")
        params = net.MLPParams(
            [np.array([[1.0]]), np.array([[1.0]])],
            [np.zeros(1), np.zeros(1)],
        )
        y, cache = net.forward(params, cfg, np.array([[0.0]]))
        gw, gb, gx, _ = net.backward(params, cfg, cache, g_out=np.ones((1, 1)))
        # pre-activation exactly 0: treated as inactive
        assert gx[0, 0] == 0.0

    @pytest.mark.parametrize("dtype,rtol", [(np.float64, 1e-6), (np.float32, 1e-3)])
    def test_matches_finite_differences(self, rng, dtype, rtol):
        # the FD reference always runs in float64 (at the same parameter
        # point), so the tolerance measures the precision of the analytic
        # gradients themselves, not FD noise
        cfg = net.MLPConfig(in_dim=6, out_dim=3, hidden_layers=2, hidden_width=10,
                            skip_layer=2, skip_dim=4, output_activation="sigmoid")
        params = net.init_params(cfg, seed=5, dtype=dtype)
        x = rng.standard_normal((4, 6)).astype(dtype)
        skip = rng.standard_normal((4, 4)).astype(dtype)
        target = rng.random((4, 3)).astype(dtype)

        params64 = params.astype(np.float64)

        def loss():
            y, _ = net.forward(params64, cfg, x.astype(np.float64),
                               skip=skip.astype(np.float64), want_cache=False)
            return float(np.sum((y - target) ** 2))

        y, cache = net.forward(params, cfg, x, skip=skip)
        g_out = (2.0 * (y.astype(np.float64) - target)).astype(dtype)
        gw, gb, _, _ = net.backward(params, cfg, cache, g_out=g_out)
        fw, fb = finite_difference(loss, params64, h=1e-5)
        for a, b in zip(gw + gb, fw + fb):
            rel = np.linalg.norm(a.astype(np.float64) - b) / max(np.linalg.norm(b), 1e-12)
            assert rel <= rtol


class TestAdam:
    def test_zero_gradient_no_change(self):
        cfg = net.MLPConfig(in_dim=3, out_dim=2, hidden_layers=1, hidden_width=4)
        params = net.init_params(cfg, seed=0)
        before = params.copy()
        state = net.AdamState.init(params)
        net.adam_step(params, [np.zeros_like(w) for w in params.weights],
                      [np.zeros_like(b) for b in params.biases], state)
        for a, b in zip(params.weights, before.weights):
            assert np.array_equal(a, b)

    def test_first_step_magnitude_is_lr(self):
        cfg = net.MLPConfig(in_dim=2, out_dim=2, hidden_layers=0, hidden_width=1)
        params = net.init_params(cfg, seed=0, dtype=np.float64)
        before = params.weights[0].copy()
        state = net.AdamState.init(params, lr=1e-3)
        g = np.full_like(params.weights[0], 0.37)
        net.adam_step(params, [g], [np.zeros_like(params.biases[0])], state)
        step = before - params.weights[0]
        assert np.allclose(np.abs(step), 1e-3, rtol=1e-6)

    def test_quadratic_bowl_descends(self):
        cfg = net.MLPConfig(in_dim=1, out_dim=1, hidden_layers=0, hidden_width=1)
        params = net.MLPParams([np.array([[5.0]])], [np.zeros(1)])
        state = net.AdamState.init(params, lr=0.01)
        losses = []
        for _ in range(100):
            w = params.weights[0][0, 0]
            losses.append(w * w)
            net.adam_step(params, [np.array([[2 * w]])], [np.zeros(1)], state)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_shape_mismatch(self):
        cfg = net.MLPConfig(in_dim=3, out_dim=2, hidden_layers=0, hidden_width=1)
        params = net.init_params(cfg, seed=0)
        state = net.AdamState.init(params)
        with pytest.raises(ShapeMismatch):
            net.adam_step(params, [np.zeros((2, 2))], [np.zeros(2)], state)


class TestFlopCount:
    def test_single_layer(self):
        cfg = net.MLPConfig(in_dim=63, out_dim=256, hidden_layers=0, hidden_width=1)
        assert net.flop_count(cfg) == 2 * 63 * 256

    def test_seven_inner_core(self):
        cfg = net.MLPConfig(in_dim=256, out_dim=256, hidden_layers=6, hidden_width=256)
        assert net.flop_count(cfg) == 2 * 7 * 256 * 256 == 917504

    def test_skip_widening_counted(self):
        cfg = net.MLPConfig(in_dim=8, out_dim=4, hidden_layers=2, hidden_width=16,
                            skip_layer=2, skip_dim=5)
        expected = 2 * (8 * 16 + 16 * 16 + (16 + 5) * 4)
        assert net.flop_count(cfg) == expected

    def test_exact_sum_formula(self):
        cfg = net.MLPConfig(in_dim=10, out_dim=3, hidden_layers=3, hidden_width=7)
        manual = 2 * (10 * 7 + 7 * 7 + 7 * 7 + 7 * 3)
        assert net.flop_count(cfg) == manual
