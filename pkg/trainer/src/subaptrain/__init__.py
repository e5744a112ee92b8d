"""Toy learned enhancer for subaperture SAR pair datasets.

Trains small SI (single look in) and MF (all looks in) convolutional models
on packed pair records with a weighted l2 + SSIM + KDE objective, then
serves inference over GRDF rasters through the external-enhancer command
protocol.
"""

__version__ = "0.1.0"
