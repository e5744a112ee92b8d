"""Radiometric preprocessing: detection, dB conversion, percentile clipping,
and [0, 1] normalization.

Every operation checks the raster's radiometric state and propagates no-data
masks forward. Percentile bounds are fitted per polarization over a whole
dataset with a fixed-resolution histogram so multi-gigapixel scans stay in
bounded memory; the result matches a sort-based oracle to within one bin
width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ValidationError
from .rasters import ComplexRaster, IntensityRaster, RadiometricState

DB_FLOOR_LINEAR = 1e-10
HISTOGRAM_BINS = 1 << 16
MIN_FIT_PIXELS = 10_000


def to_intensity(look: ComplexRaster) -> IntensityRaster:
    """Detected linear-power intensity |z|^2 of a complex look."""
    data = np.abs(look.data) ** 2
    if not np.all(np.isfinite(data)):
        raise NumericError("complex raster contains non-finite samples")
    return IntensityRaster(
        data=data,
        state=RadiometricState.LINEAR_POWER,
        scene_id=look.scene_id,
        polarization=look.polarization,
    )


def to_db(raster: IntensityRaster,
          floor: float = DB_FLOOR_LINEAR) -> IntensityRaster:
    """10*log10 conversion; pixels at or below the floor become no-data."""
    raster.require_state(RadiometricState.LINEAR_POWER)
    if not floor > 0:
        raise ValidationError("dB floor must be > 0")
    at_floor = raster.data <= floor
    data = 10.0 * np.log10(np.maximum(raster.data, floor))
    mask = at_floor
    if raster.nodata_mask is not None:
        mask = mask | raster.nodata_mask
    return raster.with_data(
        data,
        state=RadiometricState.DECIBEL,
        nodata_mask=mask if mask.any() else None,
    )


@dataclass
class ClipSpec:
    """Dataset-wide dB clipping window, fitted per polarization.

    computed_bounds maps polarization -> (low_db, high_db). histogram_meta
    records, per polarization, the bin count, observed range, and total pixel
    count that produced the bounds, so a fit can be reproduced.
    """

    low_percentile: float = 0.1
    high_percentile: float = 99.9
    per_polarization: bool = True
    num_bins: int = HISTOGRAM_BINS
    computed_bounds: dict = field(default_factory=dict)
    histogram_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.low_percentile < self.high_percentile <= 100:
            raise ValidationError("need 0 <= low < high <= 100 percentiles")
        if self.num_bins < 2:
            raise ValidationError("histogram needs at least 2 bins")

    def bounds_for(self, polarization: str) -> tuple[float, float]:
        key = polarization if self.per_polarization else "all"
        if key not in self.computed_bounds:
            raise ValidationError(
                f"no clip bounds computed for polarization {key!r}"
            )
        return tuple(self.computed_bounds[key])

    def to_dict(self) -> dict:
        return {
            "low_percentile": self.low_percentile,
            "high_percentile": self.high_percentile,
            "per_polarization": self.per_polarization,
            "num_bins": self.num_bins,
            "computed_bounds": {k: list(v)
                                for k, v in self.computed_bounds.items()},
            "histogram_meta": self.histogram_meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClipSpec":
        spec = cls(
            low_percentile=d.get("low_percentile", 0.1),
            high_percentile=d.get("high_percentile", 99.9),
            per_polarization=d.get("per_polarization", True),
            num_bins=d.get("num_bins", HISTOGRAM_BINS),
        )
        spec.computed_bounds = {k: tuple(v)
                                for k, v in d.get("computed_bounds", {}).items()}
        spec.histogram_meta = d.get("histogram_meta", {})
        return spec

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ClipSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _histogram_percentile(counts, lo, width, total, percentile):
    """Percentile from bin counts, linearly interpolated inside the bin."""
    target = percentile / 100.0 * total
    cum = np.cumsum(counts)
    idx = int(np.searchsorted(cum, target, side="left"))
    idx = min(idx, len(counts) - 1)
    before = cum[idx - 1] if idx > 0 else 0
    inside = counts[idx]
    frac = 0.0 if inside == 0 else (target - before) / inside
    frac = min(max(frac, 0.0), 1.0)
    return lo + (idx + frac) * width


def fit_clip(rasters: list[IntensityRaster],
             spec: ClipSpec | None = None) -> ClipSpec:
    """Fit dataset-wide percentile bounds from dB rasters.

    Rasters are grouped by polarization when spec.per_polarization is set.
    The scan is two passes per group: observed range, then a fixed-resolution
    histogram whose merge is associative, so groups can be accumulated in any
    order.
    """
    spec = spec or ClipSpec()
    if not rasters:
        raise ValidationError("fit_clip needs at least one raster")
    groups: dict[str, list[IntensityRaster]] = {}
    for raster in rasters:
        raster.require_state(RadiometricState.DECIBEL)
        key = raster.polarization if spec.per_polarization else "all"
        groups.setdefault(key, []).append(raster)

    for key, members in groups.items():
        vmin, vmax, total = np.inf, -np.inf, 0
        for raster in members:
            values = raster.valid_values()
            if values.size:
                vmin = min(vmin, float(values.min()))
                vmax = max(vmax, float(values.max()))
                total += values.size
        if total == 0:
            raise ValidationError(f"all pixels masked for polarization {key!r}")
        if total < MIN_FIT_PIXELS:
            raise ValidationError(
                f"polarization {key!r} has {total} unmasked pixels, "
                f"need >= {MIN_FIT_PIXELS}"
            )
        if vmax == vmin:
            low = high = vmin
            width = 0.0
        else:
            width = (vmax - vmin) / spec.num_bins
            counts = np.zeros(spec.num_bins, dtype=np.int64)
            for raster in members:
                values = raster.valid_values()
                if values.size == 0:
                    continue
                idx = np.floor((values - vmin) / width).astype(np.int64)
                np.clip(idx, 0, spec.num_bins - 1, out=idx)
                counts += np.bincount(idx, minlength=spec.num_bins)
            low = _histogram_percentile(counts, vmin, width, total,
                                        spec.low_percentile)
            high = _histogram_percentile(counts, vmin, width, total,
                                         spec.high_percentile)
        spec.computed_bounds[key] = (float(low), float(high))
        spec.histogram_meta[key] = {
            "num_bins": spec.num_bins,
            "range_db": [float(vmin), float(vmax)],
            "bin_width_db": float(width),
            "total_pixels": int(total),
        }
    return spec


def clip_and_normalize(raster: IntensityRaster,
                       spec: ClipSpec) -> IntensityRaster:
    """Clamp to the fitted dB window and rescale linearly to [0, 1]."""
    raster.require_state(RadiometricState.DECIBEL)
    low, high = spec.bounds_for(raster.polarization)
    if high == low:
        raise ValidationError("clip bounds are degenerate (high == low)")
    data = (np.clip(raster.data, low, high) - low) / (high - low)
    return raster.with_data(
        data,
        state=RadiometricState.NORMALIZED_UNIT,
        clip_bounds=(low, high),
    )


def denormalize_to_db(raster: IntensityRaster) -> IntensityRaster:
    """Invert clip_and_normalize using the recorded bounds."""
    raster.require_state(RadiometricState.NORMALIZED_UNIT)
    if raster.clip_bounds is None:
        raise ValidationError("normalized raster carries no clip bounds")
    low, high = raster.clip_bounds
    data = low + raster.data * (high - low)
    return raster.with_data(data, state=RadiometricState.DECIBEL,
                            clip_bounds=None)


def to_linear(raster: IntensityRaster) -> IntensityRaster:
    """De-log a dB (or normalized) raster back to linear power."""
    if raster.state is RadiometricState.NORMALIZED_UNIT:
        raster = denormalize_to_db(raster)
    raster.require_state(RadiometricState.DECIBEL)
    data = np.power(10.0, raster.data / 10.0)
    return raster.with_data(data, state=RadiometricState.LINEAR_POWER)
