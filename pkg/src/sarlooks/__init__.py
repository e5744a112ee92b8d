"""Self-supervised SAR enhancement toolkit.

Generates physics-consistent training pairs by azimuth subaperture
decomposition of single-look-complex imagery, hosts classical and external
enhancers behind a tiled inference driver, and evaluates them with PSNR,
SSIM, ENL, and a KDE distribution distance against full-aperture references.
A synthetic SLC simulator with known clean reflectivity serves as the
ground-truth oracle.
"""

__version__ = "0.1.0"
