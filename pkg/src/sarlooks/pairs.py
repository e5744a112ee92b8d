"""Self-supervised patch pair construction.

Pairs co-located subaperture patches with the full-aperture patch on the same
grid: non-overlapping tiles from a fixed (0, 0) origin, acquisition-level
splits, dihedral augmentation, per-step input sampling, and patch-wise
histogram matching. Pairs are stored as fixed-size packed records plus a JSON
index so readers never need this package.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import FormatError, ValidationError
from .rasters import IntensityRaster, RadiometricState, union_masks

PATCH_SIZE = 96
SPLITS = ("train", "validation", "test")
RECORDS_FILE = "pairs.bin"
INDEX_FILE = "pairs_index.json"


@dataclass
class PatchPair:
    inputs: list[np.ndarray]
    target: np.ndarray
    scene_id: str
    polarization: str
    patch_origin: tuple[int, int]
    split: str

    def __post_init__(self):
        shape = self.target.shape
        if any(p.shape != shape for p in self.inputs):
            raise ValidationError("input patches differ in size from target")
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")


@dataclass
class SplitManifest:
    """Scene-to-split assignment; the only thing deciding split membership."""

    assignments: dict[str, str]
    patch_size: int = PATCH_SIZE
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for scene, split in self.assignments.items():
            if split not in SPLITS:
                raise ValidationError(
                    f"scene {scene!r} assigned to unknown split {split!r}"
                )

    def split_of(self, scene_id: str) -> str:
        if scene_id not in self.assignments:
            raise ValidationError(f"scene {scene_id!r} missing from manifest")
        return self.assignments[scene_id]

    def scene_sets(self) -> dict[str, set]:
        sets: dict[str, set] = {s: set() for s in SPLITS}
        for scene, split in self.assignments.items():
            sets[split].add(scene)
        return sets

    def assert_leakage_free(self) -> None:
        sets = self.scene_sets()
        for a, b in itertools.combinations(SPLITS, 2):
            overlap = sets[a] & sets[b]
            if overlap:
                raise ValidationError(
                    f"scenes {sorted(overlap)} appear in both {a} and {b}"
                )

    def to_dict(self) -> dict:
        return {
            "assignments": dict(sorted(self.assignments.items())),
            "patch_size": self.patch_size,
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitManifest":
        return cls(
            assignments=d["assignments"],
            patch_size=d.get("patch_size", PATCH_SIZE),
            counts=d.get("counts", {}),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "SplitManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def extract_pairs(full: IntensityRaster, looks: list[IntensityRaster],
                  manifest: SplitManifest, scene_id: str
                  ) -> Iterator[PatchPair]:
    """Yield one PatchPair per fully valid non-overlapping tile.

    Tiles are patch_size squares in row-major order from (0, 0); partial edge
    tiles are dropped, as is any tile touching a no-data pixel in the target
    or any look.
    """
    split = manifest.split_of(scene_id)
    size = manifest.patch_size
    rasters = [full] + list(looks)
    shape = full.data.shape
    for raster in rasters:
        raster.require_state(RadiometricState.NORMALIZED_UNIT)
        if raster.data.shape != shape:
            raise ValidationError("full and look rasters must share a grid")
    invalid = union_masks(*(r.nodata_mask for r in rasters))
    for az in range(0, shape[0] - size + 1, size):
        for rg in range(0, shape[1] - size + 1, size):
            window = (slice(az, az + size), slice(rg, rg + size))
            if invalid is not None and invalid[window].any():
                continue
            yield PatchPair(
                inputs=[look.data[window].copy() for look in looks],
                target=full.data[window].copy(),
                scene_id=scene_id,
                polarization=full.polarization,
                patch_origin=(az, rg),
                split=split,
            )


def histogram_match(source: np.ndarray, reference: np.ndarray,
                    levels: int = 256) -> np.ndarray:
    """Map source values so their distribution follows the reference patch.

    Classic CDF specification on `levels` quantized bins over [0, 1] with
    piecewise-linear interpolation of both CDFs; output values stay inside
    the reference range. A constant reference makes matching undefined, so
    the result is that constant everywhere.
    """
    if source.shape != reference.shape:
        raise ValidationError("source and reference patches differ in shape")
    if levels < 64:
        raise ValidationError("histogram matching needs >= 64 levels")
    ref_min, ref_max = float(reference.min()), float(reference.max())
    if ref_max - ref_min < 1e-12:
        return np.full_like(source, ref_min)

    edges = np.linspace(0.0, 1.0, levels + 1)
    src_counts, _ = np.histogram(source, bins=edges)
    ref_counts, _ = np.histogram(reference, bins=edges)
    src_cdf = np.concatenate(([0.0], np.cumsum(src_counts) / source.size))
    ref_cdf = np.concatenate(([0.0], np.cumsum(ref_counts) / reference.size))

    quantiles = np.interp(source.ravel(), edges, src_cdf)
    # Strictly increasing CDF samples keep the inverse single-valued across
    # empty bins.
    ref_cdf_strict = ref_cdf + np.arange(levels + 1) * 1e-12
    matched = np.interp(quantiles, ref_cdf_strict, edges)
    matched = np.clip(matched, ref_min, ref_max)
    return matched.reshape(source.shape)


def dihedral_transform(patch: np.ndarray, element: int) -> np.ndarray:
    """Apply one of the 8 square symmetries: element = flip * 4 + rotation."""
    if not 0 <= element <= 7:
        raise ValidationError("dihedral element must be in 0..7")
    out = patch
    if element >= 4:
        out = np.fliplr(out)
    return np.rot90(out, k=element % 4).copy()


def dihedral_inverse(element: int) -> int:
    """Group inverse: reflections are involutions, rotations negate."""
    if not 0 <= element <= 7:
        raise ValidationError("dihedral element must be in 0..7")
    if element >= 4:
        return element
    return (-element) % 4


def dihedral_augment(pair: PatchPair, element: int) -> PatchPair:
    """Apply the same dihedral element to every input and the target."""
    return PatchPair(
        inputs=[dihedral_transform(p, element) for p in pair.inputs],
        target=dihedral_transform(pair.target, element),
        scene_id=pair.scene_id,
        polarization=pair.polarization,
        patch_origin=pair.patch_origin,
        split=pair.split,
    )


class InputSampler:
    """Deterministic per-step input selection for SI and MF training.

    SI draws one look index per step uniformly; MF draws a uniform
    permutation of the K look positions.
    """

    def __init__(self, mode: str, num_looks: int, seed: int):
        if mode not in ("SI", "MF"):
            raise ValidationError(f"unknown sampling mode {mode!r}")
        if num_looks < 1:
            raise ValidationError("num_looks must be >= 1")
        self.mode = mode
        self.num_looks = num_looks
        self._rng = np.random.default_rng(seed)

    def draw(self):
        if self.mode == "SI":
            return int(self._rng.integers(self.num_looks))
        return tuple(int(i) for i in self._rng.permutation(self.num_looks))

    def sequence(self, steps: int) -> list:
        return [self.draw() for _ in range(steps)]


def write_pair_records(pairs: list[PatchPair], out_dir,
                       num_looks: int, patch_size: int = PATCH_SIZE) -> dict:
    """Pack pairs into fixed-size records plus a JSON index.

    Record layout: num_looks input patches then the target patch, each
    patch_size^2 little-endian float32 values row-major.
    """
    os.makedirs(out_dir, exist_ok=True)
    records = []
    with open(os.path.join(out_dir, RECORDS_FILE), "wb") as fh:
        for pair in pairs:
            if len(pair.inputs) != num_looks:
                raise ValidationError("pair look count mismatch")
            if pair.target.shape != (patch_size, patch_size):
                raise ValidationError("pair patch size mismatch")
            for patch in pair.inputs + [pair.target]:
                fh.write(np.ascontiguousarray(patch, dtype="<f4").tobytes())
            records.append({
                "scene_id": pair.scene_id,
                "polarization": pair.polarization,
                "patch_origin": list(pair.patch_origin),
                "split": pair.split,
            })
    index = {
        "format_version": 1,
        "patch_size": patch_size,
        "num_looks": num_looks,
        "dtype": "float32-le",
        "record_layout": "inputs[0..K-1] then target, row-major",
        "num_records": len(records),
        "records": records,
    }
    with open(os.path.join(out_dir, INDEX_FILE), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
    return index


def read_pair_records(data_dir) -> tuple[dict, np.ndarray]:
    """Load the index and a (num_records, K+1, S, S) float32 array."""
    index_path = os.path.join(data_dir, INDEX_FILE)
    with open(index_path, "r", encoding="utf-8") as fh:
        index = json.load(fh)
    size = index["patch_size"]
    k = index["num_looks"]
    count = index["num_records"]
    expected = count * (k + 1) * size * size * 4
    bin_path = os.path.join(data_dir, RECORDS_FILE)
    actual = os.path.getsize(bin_path)
    if actual != expected:
        raise FormatError(
            f"{bin_path}: expected {expected} bytes for {count} records, "
            f"found {actual}"
        )
    data = np.fromfile(bin_path, dtype="<f4").reshape(count, k + 1, size, size)
    return index, data
