# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Colorimetry: sRGB (8-bit) -> linear RGB -> CIE-XYZ (D65, 2° observer) -> CIE-Lab, and the pixel-wise Individual
Typology Angle (ITA).

All math is float64. Functions are vectorised over a trailing channel axis of length 3.
"""

import numpy as np

# sRGB (IEC 61966-2-1) primaries to XYZ, D65 white
M_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
WHITE_D65 = M_RGB2XYZ @ np.ones(3)  # (0.95047, 1.0, 1.08883), exact image of linear white
DELTA = 6 / 29  # CIE-Lab companding knee
B_ZERO = 1e-9  # |b| below this is achromatic round-off


def srgb_to_linear(rgb):
    """Expands 8-bit sRGB values in [0, 255] to linear RGB in [0, 1] using the standard sRGB transfer curve."""
    c = np.asarray(rgb, dtype=np.float64) / 255
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(rgb, quantize=True):
    """Compresses linear RGB in [0, 1] to sRGB, returned as uint8 in [0, 255] when `quantize` else float in [0, 1]."""
    c = np.clip(np.asarray(rgb, dtype=np.float64), 0, 1)
    c = np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)
    return np.rint(c * 255).astype(np.uint8) if quantize else c


def linear_to_lab(rgb):
    """Converts linear RGB (..., 3) to CIE-Lab (..., 3) under D65 / 2° observer."""
    xyz = np.asarray(rgb, dtype=np.float64) @ M_RGB2XYZ.T
    t = xyz / WHITE_D65
    f = np.where(t > DELTA**3, np.cbrt(t), t / (3 * DELTA**2) + 4 / 29)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack((L, a, b), axis=-1)


def srgb_to_lab(rgb):
    """
    Converts 8-bit sRGB pixels (..., 3) to CIE-Lab (..., 3).

    Pure and deterministic; white (255, 255, 255) maps to L=100, a=b=0 and black to L=a=b=0.
    """
    return linear_to_lab(srgb_to_linear(rgb))


def lab_ita(L, b):
    """
    Returns the Individual Typology Angle arctan((L - 50) / b) in degrees, elementwise.

    For b == 0 the limit convention applies: +90 if L > 50, -90 if L < 50 and 0 if L == 50. Output lies in [-90, 90].
    |b| < B_ZERO counts as 0, so exact grays (whose b is float round-off) follow the limit convention.
    """
    L, b = np.asarray(L, dtype=np.float64), np.asarray(b, dtype=np.float64)
    dl = L - 50
    with np.errstate(divide="ignore", invalid="ignore"):
        ita = np.degrees(np.arctan(dl / b))
    return np.where(np.abs(b) < B_ZERO, 90.0 * np.sign(dl), ita)


def gray_world(image):
    """
    Gray-world normalises an 8-bit RGB image (H, W, 3): in linear space every channel is scaled so that its mean equals
    the mean over all channels, then the image is re-encoded to 8-bit sRGB.
    """
    lin = srgb_to_linear(image)
    means = lin.reshape(-1, 3).mean(0)
    gains = np.divide(means.mean(), means, out=np.ones(3), where=means > 0)
    return linear_to_srgb(lin * gains)
