"""Azimuth subaperture decomposition.

Splits a full-aperture SLC into K complex looks, each reconstructed from one
contiguous interval of the azimuth Doppler spectrum: forward FFT per range
column, de-weighting of the focusing apodization, band extraction with
spectral re-centering at zero Doppler, inverse FFT, and an azimuth circular
shift re-centering the look on the source grid. Looks keep the source pixel
grid; only the effective azimuth resolution degrades, by 1/alpha_k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rasters import ComplexRaster
from .spectral import doppler_band, generalized_hamming_band

MIN_BAND_BINS = 8


@dataclass(frozen=True)
class WindowSpec:
    """De-weighting window descriptor: kind 'generalized_hamming' or 'none'."""

    kind: str = "generalized_hamming"
    coefficient: float = 0.75

    def __post_init__(self):
        if self.kind not in ("generalized_hamming", "none"):
            raise ValidationError(f"unknown window kind {self.kind!r}")

    def band_values(self, num_bins: int) -> np.ndarray:
        if self.kind == "none":
            return np.ones(num_bins)
        return generalized_hamming_band(num_bins, self.coefficient)


@dataclass(frozen=True)
class SubapertureSpec:
    """Band plan for one decomposition.

    band_edges are K+1 strictly increasing indices into the fftshift-ed
    azimuth spectrum of an n_az-bin grid; band k spans the half-open interval
    [band_edges[k], band_edges[k+1]). alpha_fractions are the per-band bin
    fractions of the processed Doppler band.
    """

    num_looks: int
    n_az: int
    band_edges: tuple[int, ...]
    alpha_fractions: tuple[float, ...]
    deweight_window: WindowSpec = WindowSpec()
    deweight_floor_epsilon: float = 1e-3

    def __post_init__(self):
        if self.num_looks < 2:
            raise ValidationError("num_looks must be >= 2")
        if len(self.band_edges) != self.num_looks + 1:
            raise ValidationError("band_edges must have K+1 entries")
        if len(self.alpha_fractions) != self.num_looks:
            raise ValidationError("alpha_fractions must have K entries")
        edges = np.asarray(self.band_edges)
        if np.any(np.diff(edges) <= 0):
            raise ValidationError("band_edges must be strictly increasing")
        if np.any(np.diff(edges) < MIN_BAND_BINS):
            raise ValidationError(
                f"every band needs at least {MIN_BAND_BINS} bins"
            )
        if edges[0] < 0 or edges[-1] > self.n_az:
            raise ValidationError("band_edges outside the spectrum grid")
        if abs(sum(self.alpha_fractions) - 1.0) > 1e-12:
            raise ValidationError("alpha fractions must sum to 1")
        if not self.deweight_floor_epsilon > 0:
            raise ValidationError("deweight_floor_epsilon must be > 0")

    @property
    def processed_band(self) -> tuple[int, int]:
        return self.band_edges[0], self.band_edges[-1]

    def to_dict(self) -> dict:
        return {
            "num_looks": self.num_looks,
            "n_az": self.n_az,
            "band_edges": list(self.band_edges),
            "alpha_fractions": list(self.alpha_fractions),
            "deweight_window": {
                "kind": self.deweight_window.kind,
                "coefficient": self.deweight_window.coefficient,
            },
            "deweight_floor_epsilon": self.deweight_floor_epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubapertureSpec":
        return cls(
            num_looks=d["num_looks"],
            n_az=d["n_az"],
            band_edges=tuple(d["band_edges"]),
            alpha_fractions=tuple(d["alpha_fractions"]),
            deweight_window=WindowSpec(**d["deweight_window"]),
            deweight_floor_epsilon=d["deweight_floor_epsilon"],
        )

    @classmethod
    def from_json(cls, path) -> "SubapertureSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SubapertureSet:
    looks: list[ComplexRaster]
    spec: SubapertureSpec
    source_id: str = ""


def make_spec(raster: ComplexRaster, num_looks: int,
              deweight_window: WindowSpec | None = None,
              deweight_floor_epsilon: float = 1e-3) -> SubapertureSpec:
    """Even K-way partition of the raster's processed Doppler band.

    The processed band comes from the raster metadata (PRF and Doppler
    bandwidth). When the bin count is not divisible by K the last band
    absorbs the remainder, so bands always tile the interval exactly and the
    alpha fractions stay honest bin counts.
    """
    if num_looks < 2:
        raise ValidationError("num_looks must be >= 2")
    n = raster.height_az
    if n < MIN_BAND_BINS * num_looks:
        raise ValidationError(
            f"raster too small: {n} azimuth bins cannot host "
            f"{num_looks} bands of {MIN_BAND_BINS}+ bins"
        )
    lo, hi = doppler_band(n, raster.params)
    total = hi - lo
    if total < MIN_BAND_BINS * num_looks:
        raise ValidationError(
            f"processed Doppler band too narrow: {total} bins for "
            f"{num_looks} looks"
        )
    base = total // num_looks
    sizes = [base] * (num_looks - 1) + [base + total % num_looks]
    edges = [lo]
    for size in sizes:
        edges.append(edges[-1] + size)
    if deweight_window is None:
        if raster.azimuth_weighting_applied:
            deweight_window = WindowSpec("generalized_hamming",
                                         raster.params.hamming_coefficient)
        else:
            deweight_window = WindowSpec("none")
    return SubapertureSpec(
        num_looks=num_looks,
        n_az=n,
        band_edges=tuple(edges),
        alpha_fractions=tuple(size / total for size in sizes),
        deweight_window=deweight_window,
        deweight_floor_epsilon=deweight_floor_epsilon,
    )


def _deweighted_spectrum(slc: ComplexRaster,
                         spec: SubapertureSpec) -> np.ndarray:
    """fftshift-ed azimuth spectrum with the apodization divided out."""
    spectrum = np.fft.fftshift(np.fft.fft(slc.data, axis=0), axes=0)
    lo, hi = spec.processed_band
    w = spec.deweight_window.band_values(hi - lo)
    w = np.maximum(w, spec.deweight_floor_epsilon)
    spectrum[lo:hi] /= w[:, None]
    return spectrum


def _band_recenter_roll(spec: SubapertureSpec, k: int) -> int:
    """Shifted-spectrum roll that moves band k's center bin to zero Doppler."""
    lo, hi = spec.band_edges[k], spec.band_edges[k + 1]
    center = int(round((lo + hi - 1) / 2.0))
    return spec.n_az // 2 - center


def _spatial_recenter_shift(spec: SubapertureSpec, k: int) -> int:
    """Azimuth circular shift putting look k's impulse response back on grid.

    Band extraction plus the zero-Doppler re-centering roll is a zero-phase
    filter, so its impulse response peaks at zero azimuth offset and the
    required shift is zero for every band of this plan.
    """
    del k
    return 0


def _check_consistent(slc: ComplexRaster, spec: SubapertureSpec) -> None:
    if slc.height_az != spec.n_az:
        raise ValidationError(
            f"spec built for {spec.n_az} azimuth bins, raster has "
            f"{slc.height_az}"
        )


def decompose(slc: ComplexRaster, spec: SubapertureSpec) -> SubapertureSet:
    """Split an SLC into K re-centered complex looks on the source grid."""
    _check_consistent(slc, spec)
    spectrum = _deweighted_spectrum(slc, spec)
    looks = []
    for k in range(spec.num_looks):
        lo, hi = spec.band_edges[k], spec.band_edges[k + 1]
        band = np.zeros_like(spectrum)
        band[lo:hi] = spectrum[lo:hi]
        band = np.roll(band, _band_recenter_roll(spec, k), axis=0)
        look = np.fft.ifft(np.fft.ifftshift(band, axes=0), axis=0)
        look = np.roll(look, _spatial_recenter_shift(spec, k), axis=0)
        looks.append(ComplexRaster(
            data=look,
            params=slc.params,
            azimuth_weighting_applied=False,
            scene_id=slc.scene_id,
            polarization=slc.polarization,
        ))
    return SubapertureSet(looks=looks, spec=spec, source_id=slc.scene_id)


def recompose_check(subset: SubapertureSet, slc: ComplexRaster) -> float:
    """Relative L2 residual between reassembled and direct de-weighted spectra.

    Exact decompositions give residuals at floating-point level; removing a
    band's energy shows up as the square root of its energy share. All-zero
    inputs define the residual as 0.
    """
    spec = subset.spec
    _check_consistent(slc, spec)
    if len(subset.looks) != spec.num_looks:
        raise ValidationError("look count does not match the spec")
    reference = _deweighted_spectrum(slc, spec)
    reassembled = np.zeros_like(reference)
    for k, look in enumerate(subset.looks):
        if look.data.shape != slc.data.shape:
            raise ValidationError("look grid does not match the source grid")
        lo, hi = spec.band_edges[k], spec.band_edges[k + 1]
        data = np.roll(look.data, -_spatial_recenter_shift(spec, k), axis=0)
        spectrum = np.fft.fftshift(np.fft.fft(data, axis=0), axes=0)
        spectrum = np.roll(spectrum, -_band_recenter_roll(spec, k), axis=0)
        reassembled[lo:hi] += spectrum[lo:hi]
    norm = np.linalg.norm(reference)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(reassembled - reference) / norm)
