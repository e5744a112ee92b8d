import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarlooks.errors import ValidationError
from sarlooks.pairs import (InputSampler, PatchPair, SplitManifest,
                            dihedral_augment, dihedral_inverse,
                            dihedral_transform, extract_pairs,
                            histogram_match, read_pair_records,
                            write_pair_records)
from sarlooks.rasters import IntensityRaster, RadiometricState


def norm_raster(data, mask=None, polarization="VV"):
    return IntensityRaster(data=data, state=RadiometricState.NORMALIZED_UNIT,
                           clip_bounds=(-25.0, 0.0), nodata_mask=mask,
                           polarization=polarization)


def scene_rasters(height, width, seed=0, mask=None, looks=3):
    rng = np.random.default_rng(seed)
    full = norm_raster(rng.uniform(size=(height, width)), mask=mask)
    look_rasters = [norm_raster(rng.uniform(size=(height, width)), mask=mask)
                    for _ in range(looks)]
    return full, look_rasters


def manifest_for(scene_id="scene-a", split="train"):
    return SplitManifest(assignments={scene_id: split})


class TestExtractPairs:
    def test_exact_tiling_192(self):
        full, looks = scene_rasters(192, 192)
        got = list(extract_pairs(full, looks, manifest_for(), "scene-a"))
        assert len(got) == 4
        assert [p.patch_origin for p in got] == \
            [(0, 0), (0, 96), (96, 0), (96, 96)]
        assert all(p.split == "train" for p in got)

    def test_edge_remainders_dropped_200(self):
        full, looks = scene_rasters(200, 200)
        got = list(extract_pairs(full, looks, manifest_for(), "scene-a"))
        assert len(got) == 4

    def test_masked_tile_skipped(self):
        # oracle: brute-force window scan over the mask
        mask = np.zeros((288, 192), dtype=bool)
        mask[100, 100] = True  # inside tile (0..96, 96..192)? no: (96..192, 96..192)
        full, looks = scene_rasters(288, 192, mask=mask)
        got = list(extract_pairs(full, looks, manifest_for(), "scene-a"))

        expected = []
        for az in range(0, 288 - 95, 96):
            for rg in range(0, 192 - 95, 96):
                if not mask[az:az + 96, rg:rg + 96].any():
                    expected.append((az, rg))
        assert [p.patch_origin for p in got] == expected
        assert (96, 96) not in [p.patch_origin for p in got]
        assert len(got) == 5

    def test_mask_on_any_look_skips_tile(self):
        mask = np.zeros((192, 192), dtype=bool)
        mask[10, 10] = True
        full, _ = scene_rasters(192, 192)
        _, looks = scene_rasters(192, 192, seed=1, mask=mask)
        got = list(extract_pairs(full, looks, manifest_for(), "scene-a"))
        assert [p.patch_origin for p in got] == [(0, 96), (96, 0), (96, 96)]

    def test_grid_mismatch_rejected(self):
        full, _ = scene_rasters(192, 192)
        _, looks = scene_rasters(192, 96, seed=1)
        with pytest.raises(ValidationError):
            list(extract_pairs(full, looks, manifest_for(), "scene-a"))

    def test_missing_scene_rejected(self):
        full, looks = scene_rasters(96, 96)
        with pytest.raises(ValidationError):
            list(extract_pairs(full, looks, manifest_for(), "other-scene"))

    def test_patches_never_overlap(self):
        full, looks = scene_rasters(300, 300)
        got = list(extract_pairs(full, looks, manifest_for(), "scene-a"))
        seen = np.zeros((300, 300), dtype=int)
        for p in got:
            az, rg = p.patch_origin
            seen[az:az + 96, rg:rg + 96] += 1
        assert seen.max() == 1


class TestSplitManifest:
    def test_leakage_free_check(self):
        manifest = SplitManifest(assignments={"a": "train", "b": "test"})
        manifest.assert_leakage_free()
        sets = manifest.scene_sets()
        assert sets["train"] & sets["test"] == set()

    def test_unknown_split_rejected(self):
        with pytest.raises(ValidationError):
            SplitManifest(assignments={"a": "holdout"})

    def test_json_roundtrip(self, tmp_path):
        manifest = SplitManifest(assignments={"a": "train", "b": "validation"},
                                 counts={"train": 10})
        path = tmp_path / "manifest.json"
        manifest.save(path)
        loaded = SplitManifest.load(path)
        assert loaded.assignments == manifest.assignments
        assert loaded.counts == manifest.counts


class TestHistogramMatch:
    def test_identity_within_quantization(self):
        rng = np.random.default_rng(0)
        patch = rng.uniform(0.1, 0.9, size=(96, 96))
        out = histogram_match(patch, patch.copy(), levels=256)
        assert np.abs(out - patch).max() <= 1.0 / 256

    def test_shift_removed_ks_statistic(self):
        # oracle: brute-force two-sample Kolmogorov-Smirnov statistic
        rng = np.random.default_rng(1)
        reference = rng.uniform(0.2, 0.6, size=(96, 96))
        source = np.clip(reference + 0.1, 0.0, 1.0)
        out = histogram_match(source, reference, levels=256)

        def ks(a, b):
            grid = np.linspace(0, 1, 2001)
            fa = np.searchsorted(np.sort(a.ravel()), grid) / a.size
            fb = np.searchsorted(np.sort(b.ravel()), grid) / b.size
            return np.abs(fa - fb).max()

        assert ks(out, reference) <= 2.0 / 256

    def test_monotonicity(self):
        rng = np.random.default_rng(2)
        source = rng.uniform(size=(64, 64))
        reference = rng.beta(2.0, 5.0, size=(64, 64))
        out = histogram_match(source, reference)
        order = np.argsort(source.ravel())
        assert np.all(np.diff(out.ravel()[order]) >= -1e-15)

    def test_output_within_reference_range(self):
        rng = np.random.default_rng(3)
        source = rng.uniform(size=(64, 64))
        reference = rng.uniform(0.3, 0.5, size=(64, 64))
        out = histogram_match(source, reference)
        assert out.min() >= reference.min()
        assert out.max() <= reference.max()

    def test_constant_reference_returns_constant(self):
        rng = np.random.default_rng(4)
        source = rng.uniform(size=(32, 32))
        out = histogram_match(source, np.full((32, 32), 0.375))
        np.testing.assert_array_equal(out, 0.375)

    def test_pixel_order_invariance(self):
        rng = np.random.default_rng(5)
        source = rng.uniform(size=(32, 32))
        reference = rng.uniform(size=(32, 32))
        out = histogram_match(source, reference)
        perm = rng.permutation(source.size)
        shuffled = source.ravel()[perm].reshape(source.shape)
        out_shuffled = histogram_match(shuffled, reference)
        np.testing.assert_allclose(out_shuffled.ravel(),
                                   out.ravel()[perm], atol=1e-15)

    def test_too_few_levels_rejected(self):
        with pytest.raises(ValidationError):
            histogram_match(np.zeros((8, 8)), np.zeros((8, 8)), levels=32)


def make_pair(seed=0, size=96, looks=3):
    rng = np.random.default_rng(seed)
    return PatchPair(
        inputs=[rng.uniform(size=(size, size)) for _ in range(looks)],
        target=rng.uniform(size=(size, size)),
        scene_id="scene-a", polarization="VV",
        patch_origin=(0, 0), split="train",
    )


class TestDihedral:
    def test_identity_element(self):
        pair = make_pair()
        out = dihedral_augment(pair, 0)
        assert out.target.tobytes() == pair.target.tobytes()
        for a, b in zip(out.inputs, pair.inputs):
            assert a.tobytes() == b.tobytes()

    @given(st.integers(min_value=0, max_value=7))
    @settings(max_examples=8, deadline=None)
    def test_inverse_restores_original(self, element):
        patch = np.arange(64, dtype=float).reshape(8, 8)
        forward = dihedral_transform(patch, element)
        back = dihedral_transform(forward, dihedral_inverse(element))
        np.testing.assert_array_equal(back, patch)

    def test_all_elements_distinct_on_generic_patch(self):
        patch = np.arange(16, dtype=float).reshape(4, 4)
        images = {dihedral_transform(patch, e).tobytes() for e in range(8)}
        assert len(images) == 8

    def test_constant_patch_fixed_by_all_elements(self):
        pair = PatchPair(inputs=[np.full((8, 8), 0.5)],
                         target=np.full((8, 8), 0.5),
                         scene_id="s", polarization="VV",
                         patch_origin=(0, 0), split="train")
        for element in range(8):
            out = dihedral_augment(pair, element)
            np.testing.assert_array_equal(out.target, pair.target)

    def test_applied_consistently_to_inputs_and_target(self):
        pair = make_pair(seed=6)
        out = dihedral_augment(pair, 5)
        np.testing.assert_array_equal(out.target,
                                      dihedral_transform(pair.target, 5))
        for a, b in zip(out.inputs, pair.inputs):
            np.testing.assert_array_equal(a, dihedral_transform(b, 5))

    def test_bad_element_rejected(self):
        with pytest.raises(ValidationError):
            dihedral_transform(np.zeros((4, 4)), 8)


class TestInputSampler:
    def test_si_frequencies_uniform(self):
        # Monte-Carlo sanity: 30000 draws, each index within 2% of 1/3
        sampler = InputSampler("SI", 3, seed=42)
        draws = sampler.sequence(30_000)
        counts = np.bincount(draws, minlength=3) / len(draws)
        assert np.all(np.abs(counts - 1 / 3) < 0.02 * 1.0)
        assert set(draws) == {0, 1, 2}

    def test_mf_support_is_permutations(self):
        import itertools
        sampler = InputSampler("MF", 3, seed=1)
        seen = set(sampler.sequence(600))
        assert seen == set(itertools.permutations(range(3)))

    def test_determinism(self):
        a = InputSampler("SI", 3, seed=7).sequence(100)
        b = InputSampler("SI", 3, seed=7).sequence(100)
        assert a == b
        c = InputSampler("MF", 3, seed=7).sequence(50)
        d = InputSampler("MF", 3, seed=7).sequence(50)
        assert c == d

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValidationError):
            InputSampler("both", 3, seed=0)


class TestPackedRecords:
    def test_roundtrip(self, tmp_path):
        pairs = [make_pair(seed=i) for i in range(5)]
        index = write_pair_records(pairs, tmp_path, num_looks=3)
        assert index["num_records"] == 5
        loaded_index, data = read_pair_records(tmp_path)
        assert loaded_index["num_records"] == 5
        assert data.shape == (5, 4, 96, 96)
        np.testing.assert_allclose(data[2, 3], pairs[2].target, atol=1e-7)
        np.testing.assert_allclose(data[2, 0], pairs[2].inputs[0], atol=1e-7)

    def test_truncation_detected(self, tmp_path):
        from sarlooks.errors import FormatError
        write_pair_records([make_pair()], tmp_path, num_looks=3)
        bin_path = tmp_path / "pairs.bin"
        bin_path.write_bytes(bin_path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            read_pair_records(tmp_path)
