"""Inference over GRDF rasters, matching the external-enhancer protocol.

Inputs arrive as a comma-joined list of f32 GRDF paths (unit-major: SI
units carry one path, MF units num_looks consecutive paths); outputs are
one GRDF per unit on the same grid with values in [0, 1]. Inference is
deterministic: eval mode, no grad, deterministic algorithms.
"""

from __future__ import annotations

import numpy as np
import torch

from . import grdfio
from .train import load_model


def _pad_to_multiple(data: np.ndarray, multiple: int = 8):
    h, w = data.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        data = np.pad(data, ((0, ph), (0, pw)), mode="symmetric")
    return data, (h, w)


def enhance_arrays(model, stacks: list[np.ndarray]) -> list[np.ndarray]:
    """stacks: per unit a (C, H, W) float32 array; returns (H, W) outputs."""
    torch.use_deterministic_algorithms(True)
    outputs = []
    with torch.no_grad():
        for stack in stacks:
            h, w = stack.shape[-2:]
            channels = [_pad_to_multiple(stack[c])[0]
                        for c in range(stack.shape[0])]
            batch = torch.from_numpy(
                np.stack(channels)[None].astype(np.float32))
            pred = model(batch)[0, 0].numpy()
            outputs.append(np.clip(pred[:h, :w], 0.0, 1.0))
    return outputs


def serve(model_dir: str, input_paths: list[str],
          output_paths: list[str]) -> None:
    model, meta = load_model(model_dir)
    unit_size = 1 if meta["mode"] == "si" else meta["num_looks"]
    if len(input_paths) % unit_size != 0:
        raise ValueError(
            f"{len(input_paths)} inputs not divisible by unit size "
            f"{unit_size} for mode {meta['mode']}"
        )
    units = [input_paths[i:i + unit_size]
             for i in range(0, len(input_paths), unit_size)]
    if len(units) != len(output_paths):
        raise ValueError(
            f"{len(units)} input units but {len(output_paths)} outputs"
        )
    for unit, out_path in zip(units, output_paths):
        arrays, headers = [], []
        for path in unit:
            data, header, _ = grdfio.read_f32(path)
            arrays.append(data)
            headers.append(header)
        stack = np.stack(arrays)
        result = enhance_arrays(model, [stack])[0]
        grdfio.write_f32(out_path, result, header_extra={
            "clip_bounds": headers[0].get("clip_bounds"),
            "polarization": headers[0].get("polarization", "VV"),
            "scene_id": headers[0].get("scene_id", ""),
        })
