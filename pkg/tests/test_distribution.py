import math

import numpy as np
import pytest

from nerdf import nn
from nerdf.distribution import (
    FourierCoeffs,
    RenderConfig,
    basis_eval,
    basis_matrix,
    composite,
    decode_distribution,
    nerdf_render_ray,
    render_head_backward,
    render_head_forward,
    render_image,
    render_rays,
    softplus,
    volume_render,
)
from nerdf.encoding import EncodingConfig
from nerdf.errors import InputError, StructuralError
from nerdf.geometry import CameraPose, Ray, uniform_midpoints
from nerdf.nn import init_mlp, mlp_backward, mlp_forward


class TestBasis:
    def test_t_zero_alternates_one_zero(self):
        for k in (1, 4, 12):
            b = basis_eval(0.0, k, 4.0)
            np.testing.assert_array_equal(b[0::2], 1.0)
            np.testing.assert_array_equal(b[1::2], 0.0)

    def test_k12_has_24_entries(self):
        assert basis_eval(1.3, 12, 4.0).shape == (24,)

    def test_full_period_values(self):
        b = basis_eval(4.0, 12, 4.0)
        assert abs(b[1]) < 1e-12  # sin(2 pi)
        assert abs(b[2] - 1.0) < 1e-12  # cos(2 pi)

    def test_entry_formulas(self):
        t, T, k = 0.73, 4.0, 5
        b = basis_eval(t, k, T)
        for i in range(2 * k):
            if i % 2 == 0:
                assert abs(b[i] - math.cos(i * math.pi * t / T)) < 1e-12
            else:
                assert abs(b[i] - math.sin((i + 1) * math.pi * t / T)) < 1e-12

    def test_gram_orthogonality_on_midpoint_grid(self):
        for k in (4, 12, 24):
            ts = (np.arange(4096) + 0.5) * (4.0 / 4096)
            b = basis_matrix(ts, k, 4.0)
            gram = b.T @ b
            diag = np.diag(gram).copy()
            off = np.abs(gram - np.diag(diag)).max()
            assert diag.min() > 0
            assert off / diag.min() <= 1e-3


class TestDecode:
    def coeffs(self, k=4, t_period=4.0, seed=0):
        rng = np.random.default_rng(seed)
        return FourierCoeffs(rng.normal(size=2 * k) * 0.3, rng.normal(size=(3, 2 * k)) * 0.3, t_period)

    def test_zero_coefficients(self):
        c = FourierCoeffs(np.zeros(8), np.zeros((3, 8)), 4.0)
        sig, rgb = decode_distribution(c, np.linspace(0, 4, 9))
        np.testing.assert_allclose(sig, math.log(2.0), atol=1e-12)
        np.testing.assert_allclose(rgb, 0.5, atol=1e-12)

    def test_dc_term(self):
        c = FourierCoeffs(np.array([1.7, 0, 0, 0]), np.zeros((3, 4)), 4.0)
        sig, _ = decode_distribution(c, np.linspace(0, 4, 7))
        np.testing.assert_allclose(sig, float(softplus(np.float64(1.7))), atol=1e-12)

    def test_band_limited_projection_roundtrip(self):
        # coefficients recovered from a least-squares fit of a target in the
        # basis span reproduce it to near machine precision
        k = 12
        ts = (np.arange(4096) + 0.5) * (4.0 / 4096)
        b = basis_matrix(ts, k, 4.0)
        rng = np.random.default_rng(5)
        w_true = rng.normal(size=2 * k)
        w_true[2 * k - 1] = 0.0
        target = b @ w_true
        w_fit, *_ = np.linalg.lstsq(b, target, rcond=None)
        assert np.abs(b @ w_fit - target).max() <= 1e-6

    def test_outputs_respect_ranges(self):
        sig, rgb = decode_distribution(self.coeffs(), np.linspace(0, 4, 33))
        assert np.all(sig >= 0)
        assert np.all((rgb >= 0) & (rgb <= 1))


class TestVolumeRender:
    def test_empty_ray(self):
        out, weights = volume_render(np.zeros(8), np.full((8, 3), 0.7), np.full(8, 0.5))
        np.testing.assert_array_equal(out, 0.0)
        np.testing.assert_array_equal(weights, 0.0)

    def test_half_opacity_single_sample(self):
        sigma = np.array([math.log(2.0) / 0.5, 0.0])
        rgb = np.array([[1.0, 0.0, 0.0], [0.3, 0.3, 0.3]])
        out, weights = volume_render(sigma, rgb, np.full(2, 0.5))
        np.testing.assert_allclose(out[0], 0.5, atol=1e-9)
        np.testing.assert_allclose(weights[0], 0.5, atol=1e-9)

    def test_weights_nonnegative_and_sum_below_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            sigma = rng.uniform(0, 5, 32)
            rgb = rng.uniform(0, 1, (32, 3))
            _, weights = volume_render(sigma, rgb, np.full(32, 0.1))
            assert np.all(weights >= 0)
            assert weights.sum() <= 1 + 1e-6

    def test_transmittance_non_increasing(self):
        rng = np.random.default_rng(1)
        sigma = rng.uniform(0, 4, (5, 16))
        rgb = rng.uniform(0, 1, (5, 16, 3))
        _, _, cache = composite(sigma, rgb, 0.25)
        assert np.all(np.diff(cache["trans"], axis=1) <= 1e-12)

    def test_length_mismatch_structural(self):
        with pytest.raises(StructuralError):
            volume_render(np.zeros(4), np.zeros((5, 3)), np.full(4, 0.1))

    def test_negative_sigma_rejected(self):
        with pytest.raises(InputError):
            volume_render(np.array([-1.0, 0.0]), np.zeros((2, 3)), np.full(2, 0.1))

    def test_saturated_first_sample_wins(self):
        sigma = np.array([1e4, 3.0, 1.0])
        rgb = np.array([[0.9, 0.1, 0.2], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        out, _ = volume_render(sigma, rgb, np.full(3, 0.1))
        np.testing.assert_allclose(out, rgb[0], atol=1e-3)

    def test_quadrature_convergence_on_decoded_distributions(self):
        # band-limited integrands: 64 uniform samples vs a 4096-sample
        # brute-force reference stay within 1e-2 per channel
        rng = np.random.default_rng(2)
        t_period = 4.0
        for k in (4, 12, 24):
            decay = 1.0 / (1.0 + np.repeat(np.arange(k), 2) + 1)
            for trial in range(5):
                c = FourierCoeffs(
                    rng.normal(size=2 * k) * 0.5 * decay,
                    rng.normal(size=(3, 2 * k)) * 0.5 * decay,
                    t_period,
                )
                results = []
                for s in (64, 4096):
                    ts = uniform_midpoints(0.0, t_period, s)
                    sig, rgb = decode_distribution(c, ts)
                    out, _ = volume_render(sig, rgb, np.full(s, t_period / s))
                    results.append(out)
                assert np.abs(results[0] - results[1]).max() <= 1e-2


class TestRenderHeadGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        k, s, r = 3, 16, 2
        bmat = basis_matrix(uniform_midpoints(0.0, 4.0, s), k, 4.0)
        raw = rng.normal(size=(r, 8 * k)) * 0.4
        w_out = rng.normal(size=(r, 3))
        w_sig = rng.normal(size=(r, s))

        def loss(a):
            out, sig, _, _ = render_head_forward(a, bmat, 0.25)
            return float(np.sum(w_out * out) + np.sum(w_sig * sig))

        _, _, _, cache = render_head_forward(raw, bmat, 0.25)
        grad = render_head_backward(cache, w_out, w_sig)
        h = 1e-6
        for i in range(r):
            for j in range(8 * k):
                rp = raw.copy(); rp[i, j] += h
                rm = raw.copy(); rm[i, j] -= h
                num = (loss(rp) - loss(rm)) / (2 * h)
                assert abs(num - grad[i, j]) / max(abs(num), 1e-3) <= 1e-4


def tiny_setup(k=2, s=8, hidden=(16,), dtype=np.float64, seed=0):
    rng = np.random.default_rng(seed)
    enc = EncodingConfig(pe_frequencies=2, sh_degree=2, n_points=2, scene_radius=5.0)
    params = init_mlp([enc.input_dim, *hidden, 8 * k], rng, dtype=dtype, sigma_dc_bias=-1.0)
    rc = RenderConfig(s_render=s, k=k)
    return enc, params, rc


class TestRenderPaths:
    def pose(self, w=8, h=8):
        return CameraPose(np.array([0.0, 0.0, -4.0]), np.eye(3), float(w), float(h), w / 2, h / 2, w, h)

    def test_single_forwarding_per_pixel(self):
        enc, params, rc = tiny_setup()
        nn.FORWARD_COUNTER.reset()
        img, _ = render_image(params, self.pose(), enc, rc, 2.0, 6.0)
        assert nn.FORWARD_COUNTER.rows == 64  # 8x8 pixels, one evaluation each
        ray = Ray(np.array([0.0, 0.0, -4.0]), np.array([0.0, 0.0, 1.0]), 2.0, 6.0)
        nn.FORWARD_COUNTER.reset()
        nerdf_render_ray(params, ray, enc, rc)
        assert nn.FORWARD_COUNTER.rows == 1

    def test_render_image_deterministic(self):
        enc, params, rc = tiny_setup()
        a, ta = render_image(params, self.pose(), enc, rc, 2.0, 6.0)
        b, tb = render_image(params, self.pose(), enc, rc, 2.0, 6.0)
        np.testing.assert_array_equal(a.rgb, b.rgb)

    def test_zero_weights_closed_form(self):
        enc, params, rc = tiny_setup(hidden=(16,))
        for w in params.weights:
            w[:] = 0.0
        # raw sigma == dc bias == -1 everywhere; color logits 0 => grey 0.5
        ray = Ray(np.array([0.0, 0.0, -4.0]), np.array([0.0, 0.0, 1.0]), 2.0, 6.0)
        rgb, sig, _ = nerdf_render_ray(params, ray, enc, rc)
        sigma_const = float(softplus(np.float64(-1.0)))
        np.testing.assert_allclose(sig, sigma_const, rtol=1e-6)
        expected = 0.5 * (1.0 - math.exp(-sigma_const * 4.0))
        np.testing.assert_allclose(rgb, expected, rtol=1e-5)

    def test_output_dim_mismatch_structural(self):
        enc, params, rc = tiny_setup(k=2)
        with pytest.raises(StructuralError):
            render_rays(params, np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), 2.0, 6.0, enc,
                        RenderConfig(s_render=8, k=3))

    def test_breakdown_components_cover_total(self):
        enc, params, rc = tiny_setup(hidden=(64, 64), k=12, s=64)
        pose = self.pose(32, 32)
        _, tb = render_image(params, pose, enc, rc, 2.0, 6.0)
        assert tb.encode_ms + tb.network_ms + tb.render_ms <= tb.total_ms * 1.05
        assert tb.rays == 32 * 32
        assert tb.fps == pytest.approx(1000.0 / tb.total_ms)

    def test_end_to_end_gradient_vs_finite_differences(self):
        enc, params, rc = tiny_setup(k=2, s=8, hidden=(16, 16), dtype=np.float64)
        rng = np.random.default_rng(4)
        origins = np.tile(np.array([0.0, 0.0, -4.0]), (3, 1))
        dirs = rng.normal(size=(3, 3)) * 0.05 + np.array([0.0, 0.0, 1.0])
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        x_enc = None
        from nerdf.encoding import encode_rays

        x_enc = encode_rays(origins, dirs, 2.0, 6.0, enc, rng=None, dtype=np.float64)
        bmat = basis_matrix(uniform_midpoints(0.0, 4.0, rc.s_render), rc.k, 4.0)
        w_probe = rng.normal(size=(3, 3))

        def loss(p):
            raw, _ = mlp_forward(p, x_enc)
            out, _, _, _ = render_head_forward(raw, bmat, 0.5)
            return float(np.sum(w_probe * out))

        raw, tape = mlp_forward(params, x_enc, record=True)
        _, _, _, cache = render_head_forward(raw, bmat, 0.5)
        d_raw = render_head_backward(cache, w_probe)
        grads, _ = mlp_backward(params, tape, d_raw)

        h = 1e-5
        rng2 = np.random.default_rng(5)
        max_rel = 0.0
        for arrays, gs in ((params.weights, grads.weights), (params.biases, grads.biases)):
            for arr, g in zip(arrays, gs):
                flat, gf = arr.reshape(-1), g.reshape(-1)
                for i in rng2.choice(flat.size, size=min(40, flat.size), replace=False):
                    orig = flat[i]
                    flat[i] = orig + h
                    lp = loss(params)
                    flat[i] = orig - h
                    lm = loss(params)
                    flat[i] = orig
                    num = (lp - lm) / (2 * h)
                    max_rel = max(max_rel, abs(num - gf[i]) / max(abs(num), abs(gf[i]), 1e-3))
        assert max_rel <= 1e-4
