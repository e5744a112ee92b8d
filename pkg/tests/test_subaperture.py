import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import params_bandlimited, width_3db
from sarlooks.errors import ValidationError
from sarlooks.rasters import ComplexRaster
from sarlooks.simulate import PointTarget, SceneSpec, simulate_slc
from sarlooks.spectral import doppler_band
from sarlooks.subaperture import (SubapertureSpec, WindowSpec, decompose,
                                  make_spec, recompose_check)


def make_slc(height=256, width=16, seed=0, hamming=0.75, weighted=True,
             background=1.0, targets=()):
    params = params_bandlimited(hamming=hamming)
    spec = SceneSpec(height_az=height, width_rg=width,
                     background_reflectivity=background,
                     point_targets=list(targets), rng_seed=seed)
    slc, _ = simulate_slc(spec, params, apply_weighting=weighted)
    return slc


def flat_spectrum_slc(height=240, width=12, seed=1):
    """Deterministically flat |spectrum| over the processed band."""
    params = params_bandlimited(hamming=1.0)
    rng = np.random.default_rng(seed)
    lo, hi = doppler_band(height, params)
    spectrum = np.zeros((height, width), dtype=complex)
    phases = rng.uniform(0, 2 * np.pi, size=(hi - lo, width))
    spectrum[lo:hi] = np.exp(1j * phases)
    data = np.fft.ifft(np.fft.ifftshift(spectrum, axes=0), axis=0)
    return ComplexRaster(data=data, params=params,
                         azimuth_weighting_applied=False)


class TestMakeSpec:
    def test_even_division(self):
        # 900 processed bins needs n such that doppler_band yields 900;
        # synthesize a spec directly instead: 3 bands of 300
        spec = SubapertureSpec(num_looks=3, n_az=1024,
                               band_edges=(62, 362, 662, 962),
                               alpha_fractions=(300 / 900,) * 3)
        assert spec.alpha_fractions == (1 / 3, 1 / 3, 1 / 3)

    def test_remainder_goes_to_last_band(self):
        spec = SubapertureSpec(num_looks=3, n_az=1024,
                               band_edges=(61, 361, 661, 962),
                               alpha_fractions=(300 / 901, 300 / 901,
                                                301 / 901))
        sizes = np.diff(spec.band_edges)
        assert list(sizes) == [300, 300, 301]
        assert sum(spec.alpha_fractions) == pytest.approx(1.0, abs=1e-12)

    def test_bands_tile_processed_interval_exhaustively(self):
        # oracle: brute-force check that bands are contiguous, cover the
        # processed interval, and put the remainder in the last band
        for height in range(24, 1025, 7):
            slc = ComplexRaster(data=np.zeros((height, 2), dtype=complex),
                                params=params_bandlimited())
            for k in (2, 3, 4):
                lo, hi = doppler_band(height, slc.params)
                if hi - lo < 8 * k:
                    continue
                spec = make_spec(slc, k)
                edges = spec.band_edges
                assert edges[0] == lo and edges[-1] == hi
                sizes = np.diff(edges)
                total = hi - lo
                assert sizes[:-1].tolist() == [total // k] * (k - 1)
                assert sizes[-1] == total // k + total % k
                assert sum(spec.alpha_fractions) == pytest.approx(1.0,
                                                                  abs=1e-12)

    def test_paper_default_three_nonoverlapping_bands(self):
        slc = make_slc()
        spec = make_spec(slc, 3)
        assert spec.num_looks == 3
        edges = spec.band_edges
        assert all(edges[i] < edges[i + 1] for i in range(3))

    def test_too_small_raster_rejected(self):
        slc = ComplexRaster(data=np.zeros((20, 4), dtype=complex),
                            params=params_bandlimited())
        with pytest.raises(ValidationError):
            make_spec(slc, 3)

    def test_deweight_window_defaults_from_metadata(self):
        weighted = make_slc(weighted=True)
        assert make_spec(weighted, 3).deweight_window.kind == \
            "generalized_hamming"
        unweighted = make_slc(weighted=False, hamming=1.0)
        assert make_spec(unweighted, 3).deweight_window.kind == "none"

    def test_spec_json_roundtrip(self, tmp_path):
        spec = make_spec(make_slc(), 3)
        path = tmp_path / "spec.json"
        import json
        path.write_text(json.dumps(spec.to_dict()))
        assert SubapertureSpec.from_json(path) == spec


class TestDecompose:
    def test_dc_constant_signal(self):
        # all spectral energy in the DC bin: only the band holding DC keeps
        # the constant; the other looks are numerically zero. 244 azimuth
        # bins give an evenly divisible processed band (201 = 3 * 67), so the
        # DC band re-centers exactly onto zero Doppler.
        params = params_bandlimited(hamming=1.0)
        slc = ComplexRaster(data=np.full((244, 8), 2.0 + 0j), params=params,
                            azimuth_weighting_applied=False)
        spec = make_spec(slc, 3)
        assert len(set(np.diff(spec.band_edges))) == 1
        looks = decompose(slc, spec).looks
        dc_bin = 244 // 2
        holder = next(k for k in range(3)
                      if spec.band_edges[k] <= dc_bin < spec.band_edges[k + 1])
        scale = looks[holder].data / slc.data
        np.testing.assert_allclose(scale, scale[0, 0], atol=1e-10)
        for k, look in enumerate(looks):
            if k == holder:
                continue
            assert np.abs(look.data).max() <= 1e-10 * np.abs(slc.data).max()

    def test_dc_constant_magnitude_for_uneven_partition(self):
        # remainder-to-last-band plans can leave the DC band one bin off
        # center; the residual is a single-bin demodulation fringe, so the
        # magnitude still reproduces the constant exactly
        params = params_bandlimited(hamming=1.0)
        slc = ComplexRaster(data=np.full((240, 8), 2.0 + 0j), params=params,
                            azimuth_weighting_applied=False)
        spec = make_spec(slc, 3)
        assert len(set(np.diff(spec.band_edges))) > 1
        looks = decompose(slc, spec).looks
        dc_bin = 240 // 2
        holder = next(k for k in range(3)
                      if spec.band_edges[k] <= dc_bin < spec.band_edges[k + 1])
        np.testing.assert_allclose(np.abs(looks[holder].data), 2.0,
                                   atol=1e-10)

    def test_point_target_width_triples(self):
        slc = make_slc(height=512, width=4, hamming=1.0, weighted=False,
                       background=0.0,
                       targets=[PointTarget(256, 2, 1.0)])
        spec = make_spec(slc, 3)
        looks = decompose(slc, spec).looks
        full_width = width_3db(slc.data[:, 2])
        for look in looks:
            ratio = width_3db(look.data[:, 2]) / full_width
            assert ratio == pytest.approx(3.0, rel=0.10)

    def test_band_spectra_sum_to_deweighted_spectrum(self):
        slc = make_slc(seed=4)
        spec = make_spec(slc, 3)
        subset = decompose(slc, spec)
        # brute-force spectral comparison, independent of recompose_check
        from sarlooks.subaperture import _band_recenter_roll, \
            _deweighted_spectrum
        want = _deweighted_spectrum(slc, spec)
        got = np.zeros_like(want)
        for k, look in enumerate(subset.looks):
            s = np.fft.fftshift(np.fft.fft(look.data, axis=0), axes=0)
            s = np.roll(s, -_band_recenter_roll(spec, k), axis=0)
            lo, hi = spec.band_edges[k], spec.band_edges[k + 1]
            got[lo:hi] += s[lo:hi]
        err = np.linalg.norm(got - want) / np.linalg.norm(want)
        assert err <= 1e-10

    def test_same_grid_for_every_k(self):
        slc = make_slc(height=250, width=9)
        for k in (2, 3, 4, 5):
            for look in decompose(slc, make_spec(slc, k)).looks:
                assert look.data.shape == slc.data.shape

    def test_linearity(self):
        a = make_slc(seed=10)
        b = make_slc(seed=11)
        spec = make_spec(a, 3)
        combined = ComplexRaster(data=2.0 * a.data - 0.5j * b.data,
                                 params=a.params,
                                 azimuth_weighting_applied=True)
        lhs = decompose(combined, spec).looks
        la = decompose(a, spec).looks
        lb = decompose(b, spec).looks
        for k in range(3):
            want = 2.0 * la[k].data - 0.5j * lb[k].data
            scale = np.abs(want).max()
            np.testing.assert_allclose(lhs[k].data, want,
                                       atol=1e-12 * scale)

    def test_energy_partition_flat_spectrum(self):
        slc = flat_spectrum_slc()
        spec = make_spec(slc, 3)
        assert spec.deweight_window.kind == "none"
        looks = decompose(slc, spec).looks
        total = np.sum(np.abs(slc.data) ** 2)
        for k, look in enumerate(looks):
            share = np.sum(np.abs(look.data) ** 2) / total
            assert share == pytest.approx(spec.alpha_fractions[k], rel=1e-6)

    def test_spec_raster_mismatch_rejected(self):
        slc = make_slc(height=256)
        other = make_slc(height=240)
        with pytest.raises(ValidationError):
            decompose(other, make_spec(slc, 3))


class TestRecomposeCheck:
    def test_valid_decomposition_residual_tiny(self):
        for seed in range(3):
            slc = make_slc(seed=seed)
            spec = make_spec(slc, 3)
            subset = decompose(slc, spec)
            assert recompose_check(subset, slc) <= 1e-10

    def test_zeroed_look_residual_is_sqrt_energy_share(self):
        slc = flat_spectrum_slc(seed=6)
        spec = make_spec(slc, 3)
        subset = decompose(slc, spec)
        zeroed = 1
        subset.looks[zeroed] = ComplexRaster(
            data=np.zeros_like(slc.data), params=slc.params)
        residual = recompose_check(subset, slc)
        assert residual > 0
        assert residual == pytest.approx(
            np.sqrt(spec.alpha_fractions[zeroed]), rel=1e-6)

    def test_zero_input_residual_zero(self):
        params = params_bandlimited()
        slc = ComplexRaster(data=np.zeros((240, 8), dtype=complex),
                            params=params)
        spec = make_spec(slc, 3)
        subset = decompose(slc, spec)
        assert recompose_check(subset, slc) == 0.0


class TestSpecValidation:
    def test_nonmonotone_edges_rejected(self):
        with pytest.raises(ValidationError):
            SubapertureSpec(num_looks=2, n_az=64, band_edges=(10, 10, 30),
                            alpha_fractions=(0.5, 0.5))

    def test_narrow_band_rejected(self):
        with pytest.raises(ValidationError):
            SubapertureSpec(num_looks=2, n_az=64, band_edges=(0, 4, 30),
                            alpha_fractions=(0.5, 0.5))

    def test_alpha_sum_enforced(self):
        with pytest.raises(ValidationError):
            SubapertureSpec(num_looks=2, n_az=64, band_edges=(0, 16, 32),
                            alpha_fractions=(0.5, 0.49))

    def test_unknown_window_kind_rejected(self):
        with pytest.raises(ValidationError):
            WindowSpec(kind="kaiser")

    @given(st.integers(min_value=48, max_value=512),
           st.integers(min_value=2, max_value=4))
    @settings(max_examples=25, deadline=None)
    def test_make_spec_alpha_always_sums_to_one(self, height, k):
        slc = ComplexRaster(data=np.zeros((height, 2), dtype=complex),
                            params=params_bandlimited())
        lo, hi = doppler_band(height, slc.params)
        if hi - lo < 8 * k:
            return
        spec = make_spec(slc, k)
        assert abs(sum(spec.alpha_fractions) - 1.0) <= 1e-12
