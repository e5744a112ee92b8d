"""Core raster containers shared by every processing stage.

Grids are 2-D numpy arrays indexed [azimuth, range] (azimuth-major, row-major
in memory). Complex rasters keep the focused SLC signal; intensity rasters
carry an explicit radiometric state so stages can reject inputs in the wrong
space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericError, ValidationError

SPEED_OF_LIGHT = 299_792_458.0


class RadiometricState(str, enum.Enum):
    LINEAR_POWER = "linear_power"
    DECIBEL = "decibel"
    NORMALIZED_UNIT = "normalized_unit"


@dataclass(frozen=True)
class RadarParams:
    """Acquisition geometry driving resolution and azimuth spectrum shape.

    The Doppler bandwidth 2*v/L must fit inside the PRF window, otherwise the
    simulated azimuth spectrum would alias.
    """

    platform_velocity: float
    antenna_length: float
    transmitted_bandwidth: float
    azimuth_prf: float
    hamming_coefficient: float = 0.75
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("platform_velocity", "antenna_length",
                     "transmitted_bandwidth", "azimuth_prf"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"RadarParams.{name} must be > 0")
        if not 0.5 < self.hamming_coefficient <= 1.0:
            raise ValidationError(
                f"hamming_coefficient must lie in (0.5, 1.0], "
                f"got {self.hamming_coefficient}"
            )
        if self.doppler_bandwidth > self.azimuth_prf:
            raise ValidationError(
                f"Doppler bandwidth {self.doppler_bandwidth:.1f} Hz exceeds "
                f"PRF {self.azimuth_prf:.1f} Hz (azimuth aliasing)"
            )

    @property
    def doppler_bandwidth(self) -> float:
        return 2.0 * self.platform_velocity / self.antenna_length

    @property
    def range_resolution(self) -> float:
        return self.speed_of_light / (2.0 * self.transmitted_bandwidth)

    @property
    def azimuth_resolution(self) -> float:
        return self.antenna_length / 2.0

    def to_dict(self) -> dict:
        return {
            "platform_velocity": self.platform_velocity,
            "antenna_length": self.antenna_length,
            "transmitted_bandwidth": self.transmitted_bandwidth,
            "azimuth_prf": self.azimuth_prf,
            "hamming_coefficient": self.hamming_coefficient,
            "speed_of_light": self.speed_of_light,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadarParams":
        return cls(**d)


@dataclass
class ComplexRaster:
    """Focused single-look-complex grid plus the metadata that produced it."""

    data: np.ndarray
    params: RadarParams
    azimuth_weighting_applied: bool = False
    scene_id: str = ""
    polarization: str = "VV"

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ValidationError("ComplexRaster.data must be 2-D (az, rg)")
        if not np.iscomplexobj(self.data):
            self.data = self.data.astype(np.complex128)
        if not np.all(np.isfinite(self.data.view(np.float64)
                                  if self.data.dtype == np.complex128
                                  else np.abs(self.data))):
            raise NumericError("ComplexRaster contains non-finite samples")

    @property
    def height_az(self) -> int:
        return self.data.shape[0]

    @property
    def width_rg(self) -> int:
        return self.data.shape[1]


@dataclass
class IntensityRaster:
    """Real-valued grid in a declared radiometric state.

    nodata_mask marks pixels excluded from every statistic; it is unioned
    forward through all operations. clip_bounds records the dB window used by
    normalization so normalized values stay invertible.
    """

    data: np.ndarray
    state: RadiometricState
    clip_bounds: tuple[float, float] | None = None
    nodata_mask: np.ndarray | None = None
    scene_id: str = ""
    polarization: str = "VV"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValidationError("IntensityRaster.data must be 2-D (az, rg)")
        self.state = RadiometricState(self.state)
        if self.nodata_mask is not None:
            self.nodata_mask = np.asarray(self.nodata_mask, dtype=bool)
            if self.nodata_mask.shape != self.data.shape:
                raise ValidationError("nodata_mask shape differs from data")

    @property
    def height_az(self) -> int:
        return self.data.shape[0]

    @property
    def width_rg(self) -> int:
        return self.data.shape[1]

    def valid_mask(self) -> np.ndarray:
        if self.nodata_mask is None:
            return np.ones(self.data.shape, dtype=bool)
        return ~self.nodata_mask

    def valid_values(self) -> np.ndarray:
        return self.data[self.valid_mask()]

    def require_state(self, state: RadiometricState) -> None:
        if self.state is not state:
            raise ValidationError(
                f"raster is in state {self.state.value!r}, "
                f"operation requires {state.value!r}"
            )

    def with_data(self, data: np.ndarray, **changes) -> "IntensityRaster":
        """Copy of this raster with new samples and selected field changes."""
        out = replace(self, data=np.asarray(data, dtype=np.float64))
        for key, value in changes.items():
            setattr(out, key, value)
        return out


def union_masks(*masks: np.ndarray | None) -> np.ndarray | None:
    """Union of optional boolean masks; None when no pixel is masked."""
    combined = None
    for m in masks:
        if m is None:
            continue
        combined = m.copy() if combined is None else (combined | m)
    if combined is not None and not combined.any():
        return None
    return combined
