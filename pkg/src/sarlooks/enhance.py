"""Enhancer hosting: built-in classical enhancers, sliding-window tiled
inference with overlap blending, iterative refinement, and the external
enhancer subprocess protocol.

Tiled inference extracts overlapping tiles (reflection padding at the
borders), runs the bound enhancer per tile, and fuses outputs with a
separable raised-cosine weight window normalized so per-pixel weights sum to
one; the identity enhancer therefore reproduces its input to float accuracy
for any tile size and overlap. External enhancers exchange GRDF files via a
command template with {inputs} and {output} placeholders.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from . import grdf
from .errors import ExternalEnhancerError, ValidationError
from .rasters import IntensityRaster, RadiometricState, union_masks

THREADS_ENV_VAR = "SARLOOKS_THREADS"
BUILTIN_KINDS = ("identity", "subap_multilook", "lee_filter", "boxcar")
MAX_REFINE_PASSES = 8


def thread_count() -> int:
    value = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@dataclass
class EnhancerBinding:
    """How to run one enhancer: built-in kind or external command.

    arity 'SI' consumes one raster, 'MF' consumes num_inputs rasters. An MF
    binding given a single raster replicates it, matching the operational
    single-acquisition mode.
    """

    kind: str
    arity: str = "SI"
    params: dict = field(default_factory=dict)
    external_command: str | None = None
    workdir: str | None = None
    timeout_s: float = 300.0
    batch_size: int = 1
    num_inputs: int = 3

    def __post_init__(self):
        if self.kind not in BUILTIN_KINDS + ("external",):
            raise ValidationError(f"unknown enhancer kind {self.kind!r}")
        if self.arity not in ("SI", "MF"):
            raise ValidationError("arity must be 'SI' or 'MF'")
        if self.kind == "external" and not self.external_command:
            raise ValidationError("external enhancer needs a command template")
        if self.kind == "external":
            for placeholder in ("{inputs}", "{output}"):
                if placeholder not in self.external_command:
                    raise ValidationError(
                        f"command template must reference {placeholder}"
                    )

    def expected_inputs(self) -> int:
        return 1 if self.arity == "SI" else self.num_inputs


@dataclass(frozen=True)
class TilingPlan:
    tile_size: int = 96
    overlap_fraction: float = 0.5
    blend_window: str = "hann"

    def __post_init__(self):
        if self.tile_size < 32:
            raise ValidationError("tile_size must be >= 32")
        if not 0.0 <= self.overlap_fraction <= 0.75:
            raise ValidationError("overlap_fraction must be in [0, 0.75]")
        if self.blend_window != "hann":
            raise ValidationError(f"unknown blend window {self.blend_window!r}")

    @property
    def stride(self) -> int:
        return max(1, int(round(self.tile_size * (1 - self.overlap_fraction))))


def lee_filter(data, window: int = 7, noise_cv: float = 1.0):
    """Local-statistics Lee filter: out = mean + k * (in - mean).

    k = max(0, 1 - noise_cv^2 / local_cv^2), clamped to full smoothing where
    the local window is constant. Accepts an IntensityRaster or a plain
    array and returns the same type.
    """
    raster = None
    if isinstance(data, IntensityRaster):
        raster, data = data, data.data
    data = np.asarray(data, dtype=np.float64)
    if window < 3 or window % 2 == 0:
        raise ValidationError("Lee window must be odd and >= 3")
    if min(data.shape) < window:
        raise ValidationError("Lee window larger than the raster")
    if noise_cv < 0:
        raise ValidationError("noise_cv must be >= 0")
    mean = uniform_filter(data, size=window, mode="reflect")
    mean_sq = uniform_filter(data * data, size=window, mode="reflect")
    var = np.maximum(mean_sq - mean ** 2, 0.0)
    if noise_cv == 0.0:
        gain = np.ones_like(data)
    else:
        local_cv_sq = np.divide(var, mean ** 2,
                                out=np.zeros_like(var),
                                where=mean != 0)
        gain = np.where(local_cv_sq > 0,
                        np.maximum(0.0, 1.0 - noise_cv ** 2
                                   / np.maximum(local_cv_sq, 1e-30)),
                        0.0)
    out = mean + gain * (data - mean)
    if raster is not None:
        return raster.with_data(out)
    return out


def _boxcar(data: np.ndarray, window: int) -> np.ndarray:
    if window < 3 or window % 2 == 0:
        raise ValidationError("boxcar window must be odd and >= 3")
    return uniform_filter(data, size=window, mode="reflect")


def _multilook_tiles(tiles: list[np.ndarray],
                     clip_bounds: list[tuple[float, float]]) -> np.ndarray:
    """Average looks in linear power, then return to the normalized scale."""
    linears = []
    for tile, (low, high) in zip(tiles, clip_bounds):
        db = low + tile * (high - low)
        linears.append(np.power(10.0, db / 10.0))
    mean_linear = np.mean(linears, axis=0)
    low, high = clip_bounds[0]
    db = 10.0 * np.log10(np.maximum(mean_linear, 1e-300))
    return np.clip((db - low) / (high - low), 0.0, 1.0)


def _builtin_tile_fn(binding: EnhancerBinding,
                     clip_bounds: list[tuple[float, float]] | None):
    kind = binding.kind
    if kind == "identity":
        return lambda tiles: tiles[0]
    if kind == "boxcar":
        window = int(binding.params.get("window", 3))
        return lambda tiles: _boxcar(tiles[0], window)
    if kind == "lee_filter":
        window = int(binding.params.get("window", 7))
        noise_cv = float(binding.params.get("noise_cv", 1.0))
        return lambda tiles: lee_filter(tiles[0], window, noise_cv)
    if kind == "subap_multilook":
        if clip_bounds is None or any(b is None for b in clip_bounds):
            raise ValidationError(
                "subap_multilook needs clip bounds on every input raster"
            )
        return lambda tiles: _multilook_tiles(tiles, clip_bounds)
    raise ValidationError(f"no builtin for kind {kind!r}")


def _pad_symmetric(data: np.ndarray, pad: int) -> np.ndarray:
    """Reflection-pad by pad pixels per side, iterating for tiny rasters."""
    out = data
    remaining = pad
    while remaining > 0:
        step_az = min(remaining, out.shape[0])
        step_rg = min(remaining, out.shape[1])
        step = min(step_az, step_rg)
        out = np.pad(out, step, mode="symmetric")
        remaining -= step
    return out


def _tile_starts(length: int, tile: int, stride: int) -> list[int]:
    starts = list(range(0, length - tile + 1, stride))
    if starts[-1] != length - tile:
        starts.append(length - tile)
    return starts


def _blend_weights(tile: int) -> np.ndarray:
    # hann endpoints are zero; sampling the open interval keeps every weight
    # positive so normalization never divides by zero
    w = np.hanning(tile + 2)[1:-1]
    return np.outer(w, w)


def enhance_tiled(inputs: list[IntensityRaster], binding: EnhancerBinding,
                  plan: TilingPlan) -> IntensityRaster:
    """Run the bound enhancer over overlapping tiles and blend the outputs."""
    if not inputs:
        raise ValidationError("enhance_tiled needs at least one input raster")
    if binding.arity == "MF" and len(inputs) == 1:
        inputs = list(inputs) * binding.num_inputs
    if len(inputs) != binding.expected_inputs():
        raise ValidationError(
            f"binding arity {binding.arity} expects "
            f"{binding.expected_inputs()} inputs, got {len(inputs)}"
        )
    shape = inputs[0].data.shape
    for raster in inputs:
        raster.require_state(RadiometricState.NORMALIZED_UNIT)
        if raster.data.shape != shape:
            raise ValidationError("input rasters must share a grid")

    tile = plan.tile_size
    pad = tile // 2
    padded = [_pad_symmetric(r.data, pad) for r in inputs]
    p_az, p_rg = padded[0].shape
    az_starts = _tile_starts(p_az, tile, plan.stride)
    rg_starts = _tile_starts(p_rg, tile, plan.stride)
    units = [(az, rg) for az in az_starts for rg in rg_starts]

    if binding.kind == "external":
        outputs = _run_external_tiles(binding, inputs, padded, units, tile)
    else:
        bounds = [r.clip_bounds for r in inputs]
        tile_fn = _builtin_tile_fn(binding, bounds)

        def run_unit(pos):
            az, rg = pos
            tiles = [p[az:az + tile, rg:rg + tile] for p in padded]
            return tile_fn(tiles)

        workers = thread_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outputs = list(pool.map(run_unit, units))
        else:
            outputs = [run_unit(pos) for pos in units]

    weights = _blend_weights(tile)
    acc = np.zeros((p_az, p_rg))
    norm = np.zeros((p_az, p_rg))
    for (az, rg), out in zip(units, outputs):
        if out.shape != (tile, tile):
            raise ValidationError(
                f"enhancer returned tile of shape {out.shape}, "
                f"expected {(tile, tile)}"
            )
        acc[az:az + tile, rg:rg + tile] += out * weights
        norm[az:az + tile, rg:rg + tile] += weights
    blended = (acc / norm)[pad:pad + shape[0], pad:pad + shape[1]]

    mask = union_masks(*(r.nodata_mask for r in inputs))
    return inputs[0].with_data(blended, nodata_mask=mask)


def _run_external_tiles(binding, inputs, padded, units, tile):
    """Run the external command over tile units, batched per invocation."""
    batch = binding.batch_size if binding.batch_size > 0 else len(units)
    outputs: list[np.ndarray] = []
    for start in range(0, len(units), batch):
        chunk = units[start:start + batch]
        unit_rasters = []
        for az, rg in chunk:
            unit_rasters.append([
                raster.with_data(p[az:az + tile, rg:rg + tile])
                for raster, p in zip(inputs, padded)
            ])
        results = run_external(binding, unit_rasters)
        outputs.extend(r.data for r in results)
    return outputs


def run_external(binding: EnhancerBinding,
                 units: list[list[IntensityRaster]]) -> list[IntensityRaster]:
    """One external-command invocation processing a batch of input units.

    Inputs are written as GRDF files, {inputs} and {output} placeholders are
    substituted with comma-joined paths (unit-major), and each output raster
    is validated: grid match, finite samples, values within 1e-3 of [0, 1]
    (then clamped). Violations raise ExternalEnhancerError naming the
    offending path or exit code.
    """
    if binding.kind != "external":
        raise ValidationError("run_external needs an external binding")
    base = binding.workdir or tempfile.gettempdir()
    os.makedirs(base, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=base, prefix="ext-") as tmp:
        input_paths, output_paths = [], []
        for i, unit in enumerate(units):
            for j, raster in enumerate(unit):
                path = os.path.join(tmp, f"in_{i:05d}_{j}.grdf")
                grdf.write_grdf(raster, path)
                input_paths.append(path)
            output_paths.append(os.path.join(tmp, f"out_{i:05d}.grdf"))
        command = binding.external_command \
            .replace("{inputs}", ",".join(input_paths)) \
            .replace("{output}", ",".join(output_paths))
        argv = shlex.split(command)
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True,
                timeout=binding.timeout_s,
            )
        except subprocess.TimeoutExpired:
            raise ExternalEnhancerError(
                f"external enhancer timed out after {binding.timeout_s}s",
                command=command,
            )
        except OSError as exc:
            raise ExternalEnhancerError(
                f"failed to launch external enhancer: {exc}", command=command
            )
        if proc.returncode != 0:
            raise ExternalEnhancerError(
                f"external enhancer exited with code {proc.returncode}: "
                f"{proc.stderr.strip()[:500]}",
                command=command, returncode=proc.returncode,
            )
        results = []
        for unit, path in zip(units, output_paths):
            if not os.path.exists(path):
                raise ExternalEnhancerError(
                    f"external enhancer produced no output at {path}",
                    command=command,
                )
            out = grdf.read_grdf(path)
            if not isinstance(out, IntensityRaster):
                raise ExternalEnhancerError(
                    f"{path}: protocol violation, expected an f32 raster",
                    command=command,
                )
            if out.data.shape != unit[0].data.shape:
                raise ExternalEnhancerError(
                    f"{path}: protocol violation, output grid "
                    f"{out.data.shape} != input grid {unit[0].data.shape}",
                    command=command,
                )
            if not np.all(np.isfinite(out.data)):
                raise ExternalEnhancerError(
                    f"{path}: protocol violation, non-finite samples",
                    command=command,
                )
            if out.data.min() < -1e-3 or out.data.max() > 1.0 + 1e-3:
                raise ExternalEnhancerError(
                    f"{path}: protocol violation, values outside [0, 1] "
                    f"by more than 1e-3",
                    command=command,
                )
            data = np.clip(out.data, 0.0, 1.0)
            results.append(unit[0].with_data(
                data, state=RadiometricState.NORMALIZED_UNIT
            ))
        return results


def iterate_refine(initial_inputs: list[IntensityRaster],
                   binding_init: EnhancerBinding,
                   binding_si: EnhancerBinding,
                   passes: int, plan: TilingPlan,
                   max_passes: int = MAX_REFINE_PASSES
                   ) -> list[IntensityRaster]:
    """Initial enhancement plus `passes` pseudo-subaperture SI refinements.

    Returns every stage (passes + 1 rasters) so metrics can be computed at
    each refinement step. On enhancer failure the raised error carries the
    stages completed so far in `.stages`.
    """
    if binding_si.arity != "SI":
        raise ValidationError("refinement binding must have SI arity")
    if not 0 <= passes <= max_passes:
        raise ValidationError(f"passes must be in 0..{max_passes}")
    stages: list[IntensityRaster] = []
    try:
        stages.append(enhance_tiled(initial_inputs, binding_init, plan))
        for _ in range(passes):
            stages.append(enhance_tiled([stages[-1]], binding_si, plan))
    except ExternalEnhancerError as exc:
        exc.stages = stages
        raise
    return stages
