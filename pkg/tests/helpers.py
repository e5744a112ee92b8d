"""Shared test utilities: radar parameter factories and independent
measurement oracles kept free of the library's own fast paths."""

import numpy as np

from sarlooks.rasters import RadarParams


def params_bandlimited(hamming=0.75):
    """B_D = 1400 Hz inside a 1700 Hz PRF window."""
    return RadarParams(platform_velocity=7000.0, antenna_length=10.0,
                       transmitted_bandwidth=3e7, azimuth_prf=1700.0,
                       hamming_coefficient=hamming)


def params_fullband():
    """B_D exactly equal to the PRF: no band limiting."""
    return RadarParams(platform_velocity=8500.0, antenna_length=10.0,
                       transmitted_bandwidth=3e7, azimuth_prf=1700.0,
                       hamming_coefficient=1.0)


def width_3db(profile, upsample=64):
    """-3 dB width in pixels of |profile|^2, via zero-padded interpolation.

    Works on the complex azimuth cut through a point target; the width is
    the contiguous run around the peak where power >= half the peak.
    """
    profile = np.asarray(profile, dtype=complex)
    n = profile.size
    spectrum = np.fft.fft(profile)
    padded = np.zeros(n * upsample, dtype=complex)
    half = n // 2
    padded[:half] = spectrum[:half]
    padded[-(n - half):] = spectrum[half:]
    fine = np.fft.ifft(padded) * upsample
    power = np.abs(fine) ** 2
    power = np.roll(power, power.size // 2 - int(np.argmax(power)))
    above = power >= power.max() / 2.0
    center = power.size // 2
    lo = center
    while above[lo - 1]:
        lo -= 1
    hi = center
    while above[hi + 1]:
        hi += 1
    return (hi - lo + 1) / upsample


def enl_of(values):
    values = np.asarray(values, dtype=np.float64).ravel()
    return values.mean() ** 2 / values.var()
