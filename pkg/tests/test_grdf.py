import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import params_bandlimited
from sarlooks.errors import (FormatError, GrdfDtypeError, GrdfMagicError,
                             GrdfTruncatedError)
from sarlooks.grdf import MAGIC, read_grdf, read_header, write_grdf
from sarlooks.rasters import (ComplexRaster, IntensityRaster,
                              RadiometricState)


def complex_raster(seed=0, shape=(24, 17)):
    rng = np.random.default_rng(seed)
    data = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        .astype(np.complex64).astype(np.complex128)
    return ComplexRaster(data=data, params=params_bandlimited(),
                         azimuth_weighting_applied=True,
                         scene_id="scene-x", polarization="VH")


def intensity_raster(seed=1, shape=(19, 33), with_mask=True):
    rng = np.random.default_rng(seed)
    data = rng.uniform(size=shape).astype(np.float32).astype(np.float64)
    mask = None
    if with_mask:
        mask = rng.uniform(size=shape) < 0.1
    return IntensityRaster(data=data,
                           state=RadiometricState.NORMALIZED_UNIT,
                           clip_bounds=(-30.0, -2.5), nodata_mask=mask,
                           scene_id="scene-y", polarization="VV")


class TestRoundTrip:
    def test_c64_payload_bit_identical(self, tmp_path):
        raster = complex_raster()
        first = tmp_path / "a.grdf"
        second = tmp_path / "b.grdf"
        write_grdf(raster, first)
        loaded = read_grdf(first)
        write_grdf(loaded, second)
        assert first.read_bytes() == second.read_bytes()
        np.testing.assert_array_equal(loaded.data, raster.data)
        assert loaded.params == raster.params
        assert loaded.azimuth_weighting_applied
        assert loaded.scene_id == "scene-x"
        assert loaded.polarization == "VH"

    def test_f32_with_mask_roundtrip(self, tmp_path):
        raster = intensity_raster()
        path = tmp_path / "i.grdf"
        write_grdf(raster, path)
        loaded = read_grdf(path)
        np.testing.assert_array_equal(loaded.data, raster.data)
        np.testing.assert_array_equal(loaded.nodata_mask, raster.nodata_mask)
        assert loaded.state is RadiometricState.NORMALIZED_UNIT
        assert loaded.clip_bounds == raster.clip_bounds

    def test_extra_header_preserved(self, tmp_path):
        raster = intensity_raster(with_mask=False)
        path = tmp_path / "i.grdf"
        write_grdf(raster, path, extra_header={"band_index": 2})
        assert read_header(path)["band_index"] == 2

    @given(st.integers(min_value=1, max_value=40),
           st.integers(min_value=1, max_value=40),
           st.booleans())
    @settings(max_examples=15, deadline=None)
    def test_arbitrary_shapes_roundtrip(self, h, w, masked):
        import tempfile

        rng = np.random.default_rng(h * 100 + w)
        mask = rng.uniform(size=(h, w)) < 0.3 if masked else None
        raster = IntensityRaster(
            data=rng.uniform(size=(h, w)).astype(np.float32),
            state=RadiometricState.LINEAR_POWER, nodata_mask=mask)
        with tempfile.TemporaryDirectory() as tmp:
            path = f"{tmp}/r{h}x{w}.grdf"
            write_grdf(raster, path)
            loaded = read_grdf(path)
        np.testing.assert_array_equal(loaded.data, raster.data)
        if masked:
            np.testing.assert_array_equal(loaded.nodata_mask, mask)


class TestMalformedFiles:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.grdf"
        path.write_bytes(b"NOTGR\n" + b"\x00" * 64)
        with pytest.raises(GrdfMagicError):
            read_grdf(path)

    def test_truncated_payload_names_byte_counts(self, tmp_path):
        raster = intensity_raster(with_mask=False)
        path = tmp_path / "t.grdf"
        write_grdf(raster, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])
        with pytest.raises(GrdfTruncatedError) as err:
            read_grdf(path)
        assert err.value.expected == raster.data.size * 4
        assert err.value.actual == raster.data.size * 4 - 10

    def test_trailing_garbage_detected(self, tmp_path):
        raster = intensity_raster(with_mask=False)
        path = tmp_path / "t.grdf"
        write_grdf(raster, path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(GrdfTruncatedError):
            read_grdf(path)

    def test_unknown_dtype_f64(self, tmp_path):
        header = json.dumps({"dtype": "f64", "height_az": 2, "width_rg": 2}) \
            .encode()
        path = tmp_path / "d.grdf"
        path.write_bytes(MAGIC + len(header).to_bytes(8, "little") + header
                         + b"\x00" * 32)
        with pytest.raises(GrdfDtypeError):
            read_grdf(path)

    def test_header_not_json(self, tmp_path):
        path = tmp_path / "j.grdf"
        path.write_bytes(MAGIC + (8).to_bytes(8, "little") + b"not-json"
                         + b"\x00" * 8)
        with pytest.raises(FormatError):
            read_grdf(path)

    def test_missing_required_key(self, tmp_path):
        header = json.dumps({"dtype": "f32", "height_az": 2}).encode()
        path = tmp_path / "k.grdf"
        path.write_bytes(MAGIC + len(header).to_bytes(8, "little") + header)
        with pytest.raises(FormatError):
            read_grdf(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "h.grdf"
        path.write_bytes(MAGIC + (100).to_bytes(8, "little") + b"{}")
        with pytest.raises(GrdfTruncatedError):
            read_grdf(path)

    def test_c64_without_radar_params(self, tmp_path):
        header = json.dumps({"dtype": "c64", "height_az": 1,
                             "width_rg": 1}).encode()
        path = tmp_path / "c.grdf"
        path.write_bytes(MAGIC + len(header).to_bytes(8, "little") + header
                         + b"\x00" * 8)
        with pytest.raises(FormatError):
            read_grdf(path)
