"""GRDF raster file format.

Byte layout (documented bit-exactly, little-endian throughout):

    offset 0   : 6-byte magic b"GRDF1\\n"
    offset 6   : uint64 header byte length
    offset 14  : UTF-8 JSON header
    then       : payload, height_az * width_rg samples, row-major
                 (azimuth-major); dtype "c64" stores interleaved float32
                 re/im pairs (8 bytes/pixel), dtype "f32" stores float32
                 (4 bytes/pixel)
    then       : optional mask when header has_mask is true: one bit per
                 pixel, MSB first, each row zero-padded to a whole byte
                 (ceil(width/8) bytes per row)

Required header keys: dtype, height_az, width_rg. Complex rasters also carry
radar_params and azimuth_weighting_applied; intensity rasters carry
radiometric_state and optionally clip_bounds. polarization, scene_id, and any
extra sidecar objects (e.g. a subaperture spec) are preserved verbatim.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import (FormatError, GrdfDtypeError, GrdfMagicError,
                     GrdfTruncatedError)
from .rasters import ComplexRaster, IntensityRaster, RadarParams

MAGIC = b"GRDF1\n"
_DTYPES = {"c64": 8, "f32": 4}


def _mask_bytes(height: int, width: int) -> int:
    return height * math.ceil(width / 8)


def write_grdf(raster, path, extra_header: dict | None = None) -> None:
    """Serialize a ComplexRaster or IntensityRaster to a GRDF file."""
    header: dict = {
        "height_az": raster.height_az,
        "width_rg": raster.width_rg,
        "polarization": raster.polarization,
        "scene_id": raster.scene_id,
    }
    if isinstance(raster, ComplexRaster):
        header["dtype"] = "c64"
        header["radar_params"] = raster.params.to_dict()
        header["azimuth_weighting_applied"] = raster.azimuth_weighting_applied
        header["has_mask"] = False
        payload = np.ascontiguousarray(raster.data,
                                       dtype="<c8").tobytes()
        mask = None
    elif isinstance(raster, IntensityRaster):
        header["dtype"] = "f32"
        header["radiometric_state"] = raster.state.value
        header["clip_bounds"] = (list(raster.clip_bounds)
                                 if raster.clip_bounds else None)
        mask = raster.nodata_mask
        header["has_mask"] = mask is not None
        payload = np.ascontiguousarray(raster.data,
                                       dtype="<f4").tobytes()
    else:
        raise FormatError(f"cannot serialize object of type {type(raster)}")
    if extra_header:
        header.update(extra_header)

    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        fh.write(payload)
        if mask is not None:
            fh.write(np.packbits(mask, axis=1).tobytes())


def _parse_header(fh, path) -> dict:
    """Parse the header, leaving fh positioned at the payload."""
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise GrdfMagicError(f"{path}: bad magic {magic!r}")
    raw_len = fh.read(8)
    if len(raw_len) < 8:
        raise GrdfTruncatedError(path, 8, len(raw_len))
    header_len = int.from_bytes(raw_len, "little")
    header_bytes = fh.read(header_len)
    if len(header_bytes) < header_len:
        raise GrdfTruncatedError(path, header_len, len(header_bytes))
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: header is not valid JSON: {exc}")
    for key in ("dtype", "height_az", "width_rg"):
        if key not in header:
            raise FormatError(f"{path}: header missing required key {key!r}")
    if header["dtype"] not in _DTYPES:
        raise GrdfDtypeError(
            f"{path}: unknown dtype {header['dtype']!r}, expected c64 or f32"
        )
    return header


def read_header(path) -> dict:
    """Parse and return just the header of a GRDF file."""
    with open(path, "rb") as fh:
        return _parse_header(fh, path)


def read_grdf(path):
    """Read a GRDF file into a ComplexRaster or IntensityRaster."""
    with open(path, "rb") as fh:
        header = _parse_header(fh, path)
        body = fh.read()

    height, width = header["height_az"], header["width_rg"]
    dtype = header["dtype"]
    payload_len = height * width * _DTYPES[dtype]
    expected = payload_len
    if header.get("has_mask"):
        expected += _mask_bytes(height, width)
    if len(body) != expected:
        raise GrdfTruncatedError(path, expected, len(body))

    if dtype == "c64":
        data = np.frombuffer(body[:payload_len], dtype="<c8") \
                 .reshape(height, width).astype(np.complex128)
        params_dict = header.get("radar_params")
        if params_dict is None:
            raise FormatError(f"{path}: c64 raster lacks radar_params")
        return ComplexRaster(
            data=data,
            params=RadarParams.from_dict(params_dict),
            azimuth_weighting_applied=header.get("azimuth_weighting_applied",
                                                 False),
            scene_id=header.get("scene_id", ""),
            polarization=header.get("polarization", "VV"),
        )

    data = np.frombuffer(body[:payload_len], dtype="<f4") \
             .reshape(height, width).astype(np.float64)
    mask = None
    if header.get("has_mask"):
        packed = np.frombuffer(body[payload_len:], dtype=np.uint8)
        packed = packed.reshape(height, math.ceil(width / 8))
        mask = np.unpackbits(packed, axis=1)[:, :width].astype(bool)
    state = header.get("radiometric_state")
    if state is None:
        raise FormatError(f"{path}: f32 raster lacks radiometric_state")
    clip = header.get("clip_bounds")
    return IntensityRaster(
        data=data,
        state=state,
        clip_bounds=tuple(clip) if clip else None,
        nodata_mask=mask,
        scene_id=header.get("scene_id", ""),
        polarization=header.get("polarization", "VV"),
    )
