"""Tests for the synthetic ISP data generator."""

import hashlib

import numpy as np
import pytest

from wbstudio.imgio import to_uint8
from wbstudio.metrics import delta_e_2000
from wbstudio.synthdata import (
    RenderParams,
    SceneSample,
    TrainExample,
    augment,
    dihedral,
    illuminant_rgb,
    load_dataset,
    make_dataset,
    make_scene,
    presets,
    render_with_wb,
    sample_patches,
    save_dataset,
    wb_gains,
)

# frozen from the first verified render of this generator
GOLDEN_RENDER_SHA256 = "6fe6de65993f906f1d6d77574226ea6db1cbc15d77929439097308faffa808e7"


def plain_scene(rng, h=16, w=16, kelvin=5000.0, gamma=1.0, coeffs=(0, 0, 0)):
    return SceneSample(
        linear_scene=rng.uniform(0.05, 0.9, (h, w, 3)),
        illum_gains=wb_gains(kelvin),
        render_params=RenderParams(gamma=gamma, curve_coeffs=np.asarray(coeffs, dtype=float)),
        illum_kelvin=kelvin,
    )


class TestGains:
    def test_presets_fixed_temperatures(self):
        wb = presets()
        assert wb["tungsten"].temperature == 2850.0
        assert wb["shade"].temperature == 7500.0

    def test_green_normalized_positive(self):
        for k in (2500, 4000, 6500, 8500):
            g = wb_gains(k)
            assert g[1] == pytest.approx(1.0)
            assert np.all(g > 0)

    def test_red_blue_ratio_monotone_in_temperature(self):
        ks = np.linspace(2500, 8500, 25)
        ratios = [wb_gains(k)[0] / wb_gains(k)[2] for k in ks]
        assert all(a < b for a, b in zip(ratios, ratios[1:]))

    def test_warm_illuminant_is_red_heavy(self):
        warm = illuminant_rgb(2850)
        cool = illuminant_rgb(7500)
        assert warm[0] > warm[2]
        assert cool[2] > cool[0]


class TestRender:
    def test_perfect_correction_returns_scene(self):
        rng = np.random.default_rng(0)
        scene = plain_scene(rng)
        out = render_with_wb(scene, scene.illum_gains)
        assert np.allclose(out, np.clip(scene.linear_scene, 0, 1), atol=1e-6)

    def test_uniform_gain_scale_changes_only_brightness(self):
        rng = np.random.default_rng(1)
        scene = plain_scene(rng, gamma=2.2)
        a = render_with_wb(scene, wb_gains(4500.0))
        b = render_with_wb(scene, wb_gains(4500.0) * 2.0)
        ok = (a > 1e-4) & (a < 0.999) & (b > 1e-4) & (b < 0.999)
        ra = a[..., 0][ok[..., 0] & ok[..., 1]] / a[..., 1][ok[..., 0] & ok[..., 1]]
        rb = b[..., 0][ok[..., 0] & ok[..., 1]] / b[..., 1][ok[..., 0] & ok[..., 1]]
        assert np.allclose(ra, rb, rtol=1e-4)

    def test_golden_checksum(self):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=20240101, spawn_key=(0,)))
        img = render_with_wb(make_scene(rng, 64, 64), wb_gains(4200.0))
        digest = hashlib.sha256(to_uint8(img).tobytes()).hexdigest()
        assert digest == GOLDEN_RENDER_SHA256

    def test_output_in_unit_range(self):
        rng = np.random.default_rng(2)
        scene = make_scene(rng, 32, 32)
        out = render_with_wb(scene, wb_gains(2500.0))
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestMakeDataset:
    def test_counts_and_targets(self):
        examples = make_dataset(seed=5, n_scenes=16, image_size=64)
        assert len(examples) == 16
        for ex in examples:
            assert set(ex.targets) == {"awb", "tungsten", "shade"}
            assert ex.input.shape == (64, 64, 3)
            for t in ex.targets.values():
                assert t.shape == ex.input.shape
                assert t.min() >= 0.0 and t.max() <= 1.0

    def test_seed_determinism(self):
        a = make_dataset(seed=9, n_scenes=3, image_size=32)
        b = make_dataset(seed=9, n_scenes=3, image_size=32)
        for ea, eb in zip(a, b):
            assert np.array_equal(ea.input, eb.input)
            for k in ea.targets:
                assert np.array_equal(ea.targets[k], eb.targets[k])

    def test_correct_input_wb_close_to_awb_target(self):
        # render both paths with the input setting equal to the scene illuminant
        rng = np.random.default_rng(np.random.SeedSequence(entropy=4, spawn_key=(0,)))
        scene = make_scene(rng, 64, 64)
        inp = render_with_wb(scene, scene.illum_gains)
        awb = render_with_wb(scene, scene.illum_gains)
        assert delta_e_2000(inp, awb) < 0.5

    def test_tungsten_warmer_than_shade(self):
        for ex in make_dataset(seed=11, n_scenes=6, image_size=32):
            t = ex.targets["tungsten"]
            s = ex.targets["shade"]
            rt = t[..., 0].mean() / (t[..., 2].mean() + 1e-9)
            rs = s[..., 0].mean() / (s[..., 2].mean() + 1e-9)
            assert rt > rs

    def test_validation(self):
        with pytest.raises(ValueError):
            make_dataset(seed=0, n_scenes=0, image_size=32)
        with pytest.raises(ValueError):
            make_dataset(seed=0, n_scenes=1, image_size=30)


class TestPatches:
    def test_four_aligned_128_patches(self):
        rng = np.random.default_rng(3)
        scale = np.array([0.9, 1.0, 1.1], dtype=np.float32)
        base = rng.random((256, 256, 3), dtype=np.float32)
        ex = TrainExample(input=base, targets={k: np.clip(base * s, 0, 1)
                                               for k, s in zip(("awb", "tungsten", "shade"), scale)},
                          meta={"scene_id": "0000"})
        quads = sample_patches(ex, patch=128, count=4, rng=np.random.default_rng(0))
        assert len(quads) == 4
        for q in quads:
            assert q.input.shape == (128, 128, 3)
            for k, s in zip(("awb", "tungsten", "shade"), scale):
                assert np.allclose(q.targets[k], np.clip(q.input * s, 0, 1), atol=1e-6)

    def test_full_image_patch(self):
        ex = make_dataset(seed=2, n_scenes=1, image_size=32)[0]
        quads = sample_patches(ex, patch=32, count=2, rng=np.random.default_rng(1))
        for q in quads:
            assert np.array_equal(q.input, ex.input)

    def test_offsets_deterministic(self):
        ex = make_dataset(seed=2, n_scenes=1, image_size=64)[0]
        a = sample_patches(ex, patch=32, count=4, rng=np.random.default_rng(7))
        b = sample_patches(ex, patch=32, count=4, rng=np.random.default_rng(7))
        for qa, qb in zip(a, b):
            assert qa.meta["crop"] == qb.meta["crop"]
            assert np.array_equal(qa.input, qb.input)

    def test_patch_too_large(self):
        ex = make_dataset(seed=2, n_scenes=1, image_size=32)[0]
        with pytest.raises(ValueError):
            sample_patches(ex, patch=64, count=1, rng=np.random.default_rng(0))


class TestAugment:
    def _example(self, rng, h=16, w=16):
        return TrainExample(input=rng.random((h, w, 3), dtype=np.float32),
                            targets={k: rng.random((h, w, 3), dtype=np.float32)
                                     for k in ("awb", "tungsten", "shade")},
                            meta={})

    def test_identity_transform(self):
        ex = self._example(np.random.default_rng(4))
        out = augment(ex, np.random.default_rng(0), transform=0)
        assert np.array_equal(out.input, ex.input)

    def test_flip_is_involution(self):
        ex = self._example(np.random.default_rng(5))
        once = augment(ex, np.random.default_rng(0), transform=4)
        twice = augment(once, np.random.default_rng(0), transform=4)
        assert np.array_equal(twice.input, ex.input)
        for k in ex.targets:
            assert np.array_equal(twice.targets[k], ex.targets[k])

    def test_values_preserved(self):
        ex = self._example(np.random.default_rng(6))
        for t in range(8):
            out = augment(ex, np.random.default_rng(0), transform=t)
            assert np.array_equal(np.sort(out.input, axis=None), np.sort(ex.input, axis=None))

    def test_same_transform_for_all_four(self):
        rng = np.random.default_rng(7)
        base = rng.random((8, 8, 3), dtype=np.float32)
        ex = TrainExample(input=base, targets={k: base.copy() for k in ("awb", "tungsten", "shade")},
                          meta={})
        out = augment(ex, np.random.default_rng(3))
        for k in out.targets:
            assert np.array_equal(out.targets[k], out.input)

    def test_non_square_rotation_rejected(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ValueError):
            dihedral(rng.random((8, 16, 3)), 1)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        examples = make_dataset(seed=21, n_scenes=2, image_size=32)
        save_dataset(examples, str(tmp_path), seed=21, image_size=32)
        assert (tmp_path / "manifest.json").exists()
        assert (tmp_path / "scenes" / "0000_input.png").exists()
        loaded = load_dataset(str(tmp_path))
        assert len(loaded) == 2
        for orig, back in zip(examples, loaded):
            assert np.array_equal(to_uint8(orig.input), to_uint8(back.input))
            for k in orig.targets:
                assert np.array_equal(to_uint8(orig.targets[k]), to_uint8(back.targets[k]))
            assert back.meta["illum_kelvin"] == pytest.approx(orig.meta["illum_kelvin"])
