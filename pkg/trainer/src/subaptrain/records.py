"""Packed pair record reader: pairs.bin alongside pairs_index.json.

Records are fixed size: num_looks input patches then the target patch, each
patch_size^2 float32-LE values row-major. Split filtering happens here so
training can never cross acquisition-level split boundaries.
"""

from __future__ import annotations

import json
import os

import numpy as np


class PairDataset:
    def __init__(self, data_dir, split="train"):
        index_path = os.path.join(data_dir, "pairs_index.json")
        with open(index_path, "r", encoding="utf-8") as fh:
            self.index = json.load(fh)
        self.patch_size = self.index["patch_size"]
        self.num_looks = self.index["num_looks"]
        count = self.index["num_records"]
        bin_path = os.path.join(data_dir, "pairs.bin")
        expected = count * (self.num_looks + 1) * self.patch_size ** 2 * 4
        actual = os.path.getsize(bin_path)
        if actual != expected:
            raise ValueError(
                f"{bin_path}: expected {expected} bytes, found {actual}"
            )
        data = np.fromfile(bin_path, dtype="<f4").reshape(
            count, self.num_looks + 1, self.patch_size, self.patch_size)
        keep = [i for i, rec in enumerate(self.index["records"])
                if rec["split"] == split]
        if not keep:
            raise ValueError(f"no records in split {split!r}")
        self.records = [self.index["records"][i] for i in keep]
        self.inputs = data[keep, :self.num_looks]
        self.targets = data[keep, self.num_looks]
        self.split = split

    def __len__(self):
        return len(self.records)

    def assert_single_split(self):
        splits = {rec["split"] for rec in self.records}
        if splits != {self.split}:
            raise AssertionError(f"dataset leaked splits: {splits}")
