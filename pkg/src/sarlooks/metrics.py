"""Evaluation metrics: PSNR, SSIM, ENL over homogeneous ROIs, and a
KDE-based distribution distance.

PSNR and SSIM are full-reference scores on normalized rasters (data range
1.0). ENL is the mean^2/variance looks estimator and is only meaningful in
linear power, so callers denormalize first. The distribution distance is the
L1 gap between Gaussian kernel density estimates of the two sample sets on a
shared [0, 1] grid: 0 for identical distributions, approaching 2 for
disjoint ones.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ValidationError
from .rasters import IntensityRaster, RadiometricState

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
KDE_GRID_POINTS = 256
ROI_MIN_SIDE = 32
ROI_COUNT_TARGET = 20


def _data_and_mask(raster) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(raster, IntensityRaster):
        raster.require_state(RadiometricState.NORMALIZED_UNIT)
        return raster.data, raster.nodata_mask
    return np.asarray(raster, dtype=np.float64), None


def psnr(pred, ref) -> float:
    """Peak signal-to-noise ratio in dB over unmasked pixels, peak 1.0."""
    p, pm = _data_and_mask(pred)
    r, rm = _data_and_mask(ref)
    if p.shape != r.shape:
        raise ValidationError("pred and ref must share a grid")
    valid = np.ones(p.shape, dtype=bool)
    if pm is not None:
        valid &= ~pm
    if rm is not None:
        valid &= ~rm
    if not valid.any():
        raise ValidationError("no unmasked pixels to compare")
    mse = float(np.mean((p[valid] - r[valid]) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(pred, ref, window_size: int = SSIM_WINDOW,
         sigma: float = SSIM_SIGMA, k1: float = SSIM_K1,
         k2: float = SSIM_K2, data_range: float = 1.0) -> float:
    """Mean local SSIM with a Gaussian window over valid positions.

    Local statistics use 'valid' windows only (no padding); no-data pixels
    are excluded by renormalizing the window weights, and windows with no
    valid weight are dropped from the mean.
    """
    p, pm = _data_and_mask(pred)
    r, rm = _data_and_mask(ref)
    if p.shape != r.shape:
        raise ValidationError("pred and ref must share a grid")
    if min(p.shape) < window_size:
        raise ValidationError(
            f"raster {p.shape} smaller than the {window_size}x{window_size} "
            f"SSIM window"
        )
    kernel = _gaussian_kernel(window_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    invalid = None
    if pm is not None or rm is not None:
        invalid = np.zeros(p.shape, dtype=bool)
        if pm is not None:
            invalid |= pm
        if rm is not None:
            invalid |= rm

    if invalid is None:
        mu_p = fftconvolve(p, kernel, mode="valid")
        mu_r = fftconvolve(r, kernel, mode="valid")
        m_pp = fftconvolve(p * p, kernel, mode="valid")
        m_rr = fftconvolve(r * r, kernel, mode="valid")
        m_pr = fftconvolve(p * r, kernel, mode="valid")
        weight_ok = None
    else:
        m = (~invalid).astype(np.float64)
        wsum = fftconvolve(m, kernel, mode="valid")
        weight_ok = wsum > 1e-12
        safe = np.where(weight_ok, wsum, 1.0)
        mu_p = fftconvolve(p * m, kernel, mode="valid") / safe
        mu_r = fftconvolve(r * m, kernel, mode="valid") / safe
        m_pp = fftconvolve(p * p * m, kernel, mode="valid") / safe
        m_rr = fftconvolve(r * r * m, kernel, mode="valid") / safe
        m_pr = fftconvolve(p * r * m, kernel, mode="valid") / safe

    var_p = m_pp - mu_p ** 2
    var_r = m_rr - mu_r ** 2
    cov = m_pr - mu_p * mu_r
    ssim_map = ((2 * mu_p * mu_r + c1) * (2 * cov + c2)) / \
               ((mu_p ** 2 + mu_r ** 2 + c1) * (var_p + var_r + c2))
    if weight_ok is None:
        return float(ssim_map.mean())
    if not weight_ok.any():
        raise ValidationError("every SSIM window is fully masked")
    return float(ssim_map[weight_ok].mean())


@dataclass(frozen=True)
class Roi:
    scene_id: str
    az: int
    rg: int
    height: int
    width: int

    def slices(self) -> tuple[slice, slice]:
        return (slice(self.az, self.az + self.height),
                slice(self.rg, self.rg + self.width))


@dataclass
class RoiSet:
    """Homogeneous regions used by the ENL estimate; 20 is the usual count."""

    rois: list[Roi]

    def __post_init__(self):
        for roi in self.rois:
            if roi.height < ROI_MIN_SIDE or roi.width < ROI_MIN_SIDE:
                raise ValidationError(
                    f"ROI smaller than {ROI_MIN_SIDE}x{ROI_MIN_SIDE}: {roi}"
                )
        by_scene: dict[str, list[Roi]] = {}
        for roi in self.rois:
            by_scene.setdefault(roi.scene_id, []).append(roi)
        for scene, members in by_scene.items():
            for i, a in enumerate(members):
                for b in members[i + 1:]:
                    if (a.az < b.az + b.height and b.az < a.az + a.height and
                            a.rg < b.rg + b.width and b.rg < a.rg + a.width):
                        raise ValidationError(
                            f"overlapping ROIs in scene {scene!r}: {a} / {b}"
                        )

    def for_scene(self, scene_id: str) -> list[Roi]:
        return [r for r in self.rois if r.scene_id == scene_id]

    def to_dict(self) -> dict:
        return {"rois": [[r.scene_id, r.az, r.rg, r.height, r.width]
                         for r in self.rois]}

    @classmethod
    def from_dict(cls, d: dict) -> "RoiSet":
        return cls(rois=[Roi(*entry) for entry in d["rois"]])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RoiSet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def enl(raster: IntensityRaster, rois: list[Roi] | RoiSet) -> float:
    """Equivalent number of looks: mean^2/variance averaged over ROIs.

    Requires linear power. Constant ROIs have an undefined estimate; they are
    excluded from the average with a warning.
    """
    raster.require_state(RadiometricState.LINEAR_POWER)
    roi_list = rois.rois if isinstance(rois, RoiSet) else list(rois)
    if not roi_list:
        raise ValidationError("ENL needs at least one ROI")
    valid = raster.valid_mask()
    estimates = []
    for roi in roi_list:
        if roi.az + roi.height > raster.height_az or \
                roi.rg + roi.width > raster.width_rg:
            raise ValidationError(f"ROI outside raster bounds: {roi}")
        window = raster.data[roi.slices()][valid[roi.slices()]]
        if window.size < 2:
            raise ValidationError(f"ROI has too few valid pixels: {roi}")
        variance = float(np.var(window))
        if variance == 0.0:
            warnings.warn(
                f"constant ROI excluded from ENL average: {roi}",
                stacklevel=2,
            )
            continue
        estimates.append(float(np.mean(window)) ** 2 / variance)
    if not estimates:
        return float("inf")
    return float(np.mean(estimates))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Silverman's rule of thumb for a 1-D Gaussian KDE."""
    n = samples.size
    std = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = float(q75 - q25)
    scale = min(std, iqr / 1.349) if iqr > 0 else std
    return 0.9 * scale * n ** (-0.2)


def kde_distance(pred_samples, ref_samples,
                 grid_points: int = KDE_GRID_POINTS) -> float:
    """L1 distance between the Gaussian KDEs of two sample sets on [0, 1].

    Each estimated density is renormalized to unit mass on the grid before
    differencing, which pins the distance inside [0, 2] exactly: 0 for
    identical sample sets, 2 for fully separated ones.
    """
    p = np.asarray(pred_samples, dtype=np.float64).ravel()
    r = np.asarray(ref_samples, dtype=np.float64).ravel()
    if p.size < 100 or r.size < 100:
        raise ValidationError("kde_distance needs >= 100 samples per set")
    grid = np.linspace(0.0, 1.0, grid_points)
    dx = grid[1] - grid[0]

    def density(samples):
        h = silverman_bandwidth(samples)
        if not h > 0:
            h = 1.0 / grid_points
        z = (grid[:, None] - samples[None, :]) / h
        f = np.exp(-0.5 * z * z).sum(axis=1) / \
            (samples.size * h * np.sqrt(2.0 * np.pi))
        return f / (f.sum() * dx)

    return float(np.sum(np.abs(density(p) - density(r))) * dx)


def _finite_or_marker(value: float):
    if np.isfinite(value):
        return float(value)
    return "inf" if value > 0 else "-inf"


@dataclass
class EvalReport:
    """Per (scene, polarization, method, pass) metric rows plus averages."""

    rows: list[dict] = field(default_factory=list)

    def add_row(self, scene_id: str, polarization: str, method: str,
                refinement_pass: int, psnr_db: float, ssim_value: float,
                enl_value: float, kde_value: float) -> None:
        self.rows.append({
            "scene_id": scene_id,
            "polarization": polarization,
            "method": method,
            "refinement_pass": refinement_pass,
            "psnr_db": psnr_db,
            "ssim": ssim_value,
            "ssim_x100": ssim_value * 100.0,
            "enl": enl_value,
            "kde_distance": kde_value,
        })

    def aggregates(self) -> dict:
        """Mean of each metric across scenes per (method, pass, pol)."""
        grouped: dict[tuple, list[dict]] = {}
        for row in self.rows:
            key = (row["method"], row["refinement_pass"], row["polarization"])
            grouped.setdefault(key, []).append(row)
        out = {}
        for (method, rpass, pol), members in sorted(grouped.items()):
            label = f"{method}/pass{rpass}/{pol}"
            out[label] = {
                metric: float(np.mean([m[metric] for m in members]))
                for metric in ("psnr_db", "ssim", "ssim_x100", "enl",
                               "kde_distance")
            }
        return out

    def to_dict(self) -> dict:
        def clean_row(row):
            return {k: (_finite_or_marker(v)
                        if isinstance(v, float) else v)
                    for k, v in row.items()}

        return {
            "rows": [clean_row(r) for r in self.rows],
            "aggregates": {label: {k: _finite_or_marker(v)
                                   for k, v in metrics.items()}
                           for label, metrics in self.aggregates().items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "EvalReport":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)

        def revive(row):
            out = {}
            for k, v in row.items():
                if v == "inf":
                    out[k] = float("inf")
                elif v == "-inf":
                    out[k] = float("-inf")
                else:
                    out[k] = v
            return out

        report = cls()
        report.rows = [revive(r) for r in payload["rows"]]
        return report

    def format_table(self) -> str:
        """Text table: methods as rows, SSIM/PSNR/ENL per polarization."""
        pols = sorted({row["polarization"] for row in self.rows}) or ["VV"]
        methods = []
        for row in self.rows:
            key = (row["method"], row["refinement_pass"])
            if key not in methods:
                methods.append(key)
        agg = self.aggregates()

        def cell(method, rpass, pol, metric, fmt):
            entry = agg.get(f"{method}/pass{rpass}/{pol}")
            if entry is None or not np.isfinite(entry[metric]):
                return "--"
            return fmt.format(entry[metric])

        headers = ["Method"]
        for name in ("SSIM", "PSNR", "ENL"):
            headers += [f"{name} {p}" for p in pols]
        lines = ["  ".join(f"{h:>12}" for h in headers)]
        for method, rpass in methods:
            label = method if rpass == 0 else f"{method}+{rpass}"
            cells = [label]
            for metric, fmt in (("ssim_x100", "{:.1f}"),
                                ("psnr_db", "{:.1f}"),
                                ("enl", "{:.1f}")):
                cells += [cell(method, rpass, p, metric, fmt) for p in pols]
            lines.append("  ".join(f"{c:>12}" for c in cells))
        return "\n".join(lines)
