"""Shared azimuth-frequency helpers.

All band bookkeeping uses indices into the fftshift-ed spectrum, i.e. a
monotone frequency axis from -PRF/2 up to (but excluding) +PRF/2. The
simulator and the decomposition must agree bin-for-bin on the processed band
and on the apodization window, so both import from here.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .rasters import RadarParams


def azimuth_freqs(n: int, prf: float) -> np.ndarray:
    """Monotone azimuth frequency axis (Hz) for an n-bin fftshift-ed spectrum."""
    return np.fft.fftshift(np.fft.fftfreq(n, d=1.0 / prf))


def doppler_band(n: int, params: RadarParams) -> tuple[int, int]:
    """Half-open [lo, hi) shifted-bin interval holding |f| <= B_D / 2."""
    freqs = azimuth_freqs(n, params.azimuth_prf)
    half = params.doppler_bandwidth / 2.0
    inside = np.nonzero(np.abs(freqs) <= half + 1e-9 * params.azimuth_prf)[0]
    if inside.size == 0:
        raise ValidationError("Doppler band covers no azimuth frequency bins")
    return int(inside[0]), int(inside[-1]) + 1


def generalized_hamming_band(num_bins: int, coefficient: float) -> np.ndarray:
    """Generalized Hamming taper sampled across one spectral band.

    w(u) = a - (1 - a) * cos(2*pi*u) with u running 0..1 from the low band
    edge to the high one, so the taper peaks at 1 mid-band and falls to
    2a - 1 at both edges.
    """
    if num_bins < 1:
        raise ValidationError("window needs at least one bin")
    if num_bins == 1:
        return np.ones(1)
    a = coefficient
    u = np.arange(num_bins) / (num_bins - 1)
    return a - (1.0 - a) * np.cos(2.0 * np.pi * u)
