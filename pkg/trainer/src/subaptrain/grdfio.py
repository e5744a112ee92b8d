"""Minimal GRDF reader/writer implemented from the documented byte layout.

Only the f32 flavour is needed here: magic "GRDF1\\n", uint64-LE header
length, JSON header, row-major float32-LE payload, optional 1-bit/pixel
mask with rows padded to whole bytes.
"""

from __future__ import annotations

import json
import math

import numpy as np

MAGIC = b"GRDF1\n"


class GrdfError(Exception):
    pass


def read_f32(path):
    """Returns (data float32 [az, rg], header dict, mask or None)."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise GrdfError(f"{path}: not a GRDF file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header["dtype"] != "f32":
            raise GrdfError(f"{path}: expected f32, got {header['dtype']}")
        h, w = header["height_az"], header["width_rg"]
        payload = fh.read(h * w * 4)
        if len(payload) != h * w * 4:
            raise GrdfError(f"{path}: truncated payload")
        data = np.frombuffer(payload, dtype="<f4").reshape(h, w)
        mask = None
        if header.get("has_mask"):
            row_bytes = math.ceil(w / 8)
            packed = np.frombuffer(fh.read(h * row_bytes), dtype=np.uint8)
            mask = np.unpackbits(packed.reshape(h, row_bytes),
                                 axis=1)[:, :w].astype(bool)
    return data.copy(), header, mask


def write_f32(path, data, header_extra=None):
    """Write a normalized f32 raster; header_extra merges into the header."""
    data = np.ascontiguousarray(data, dtype="<f4")
    header = {
        "dtype": "f32",
        "height_az": int(data.shape[0]),
        "width_rg": int(data.shape[1]),
        "radiometric_state": "normalized_unit",
        "has_mask": False,
        "clip_bounds": None,
        "polarization": "VV",
        "scene_id": "",
    }
    if header_extra:
        header.update(header_extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(data.tobytes())
