"""Toy fully convolutional enhancers.

SI: a small 4-level U-Net (1 input channel). MF: the same body with K input
channels fused at the first convolution. The sigmoid head keeps outputs
inside [0, 1], so even untrained models satisfy the serving protocol.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def _block(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class ToyUNet(nn.Module):
    """Encoder-decoder with skip connections; spatial size must be a
    multiple of 8 (three 2x downsamplings)."""

    def __init__(self, in_channels: int = 1, base_width: int = 16):
        super().__init__()
        w = base_width
        self.enc1 = _block(in_channels, w)
        self.enc2 = _block(w, 2 * w)
        self.enc3 = _block(2 * w, 4 * w)
        self.bottleneck = _block(4 * w, 8 * w)
        self.pool = nn.MaxPool2d(2)
        self.up3 = nn.ConvTranspose2d(8 * w, 4 * w, 2, stride=2)
        self.dec3 = _block(8 * w, 4 * w)
        self.up2 = nn.ConvTranspose2d(4 * w, 2 * w, 2, stride=2)
        self.dec2 = _block(4 * w, 2 * w)
        self.up1 = nn.ConvTranspose2d(2 * w, w, 2, stride=2)
        self.dec1 = _block(2 * w, w)
        self.head = nn.Conv2d(w, 1, 1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))
        b = self.bottleneck(self.pool(e3))
        d3 = self.dec3(torch.cat([self.up3(b), e3], dim=1))
        d2 = self.dec2(torch.cat([self.up2(d3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return torch.sigmoid(self.head(d1))


def build_model(mode: str, num_looks: int, base_width: int = 16) -> ToyUNet:
    if mode == "si":
        return ToyUNet(in_channels=1, base_width=base_width)
    if mode == "mf":
        return ToyUNet(in_channels=num_looks, base_width=base_width)
    raise ValueError(f"unknown mode {mode!r}")
