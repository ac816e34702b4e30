# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Individual Typology Angle (ITA) skin-tone estimation.

Per region: pixel-wise ITA, averaging-filter smoothing over the patch support, histogram mode. Per face: mean of the
available region modes. ITA has no training component.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from utils import DegenerateInputError
from utils.colorspace import lab_ita, srgb_to_lab
from utils.general import check_odd

ITA_KERNEL = 5  # averaging filter size
BIN_EDGES = np.linspace(-90, 90, 181)  # 1 degree bins


def ita_map(patch):
    """Returns the pixel-wise ITA (degrees) of a PixelPatch, aligned with `patch.coords`."""
    lab = srgb_to_lab(patch.pixels)
    return lab_ita(lab[:, 0], lab[:, 2])


def smooth_ita(values, coords, kernel=ITA_KERNEL):
    """
    Box-filters an ITA map over its irregular patch support.

    Each pixel becomes the mean of the patch pixels inside its kernel x kernel neighbourhood; windows cut by the patch
    edge average only the members they contain. kernel=1 is the identity.
    """
    k = check_odd(kernel, "--ita-kernel")
    values = np.asarray(values, dtype=np.float64)
    if k == 1 or not len(values):
        return values.copy()
    coords = np.asarray(coords, dtype=np.int64)
    x, y = (coords - coords.min(0)).T
    shape = y.max() + 1, x.max() + 1
    grid, mask = np.zeros(shape), np.zeros(shape)
    grid[y, x], mask[y, x] = values, 1.0
    r = k // 2
    sums = sliding_window_view(np.pad(grid, r), (k, k)).sum(axis=(-2, -1))
    counts = sliding_window_view(np.pad(mask, r), (k, k)).sum(axis=(-2, -1))
    return sums[y, x] / counts[y, x]


def region_ita(values):
    """
    Returns the mode of an ITA map: the centre of the most populated 1° bin over [-90, 90], ties to the lower bin.
    """
    values = np.asarray(values, dtype=np.float64)
    if not len(values):
        raise DegenerateInputError("empty ITA map has no mode")
    counts, _ = np.histogram(np.clip(values, -90, 90), bins=BIN_EDGES)
    i = int(np.argmax(counts))  # first maximum is the lowest bin
    return float((BIN_EDGES[i] + BIN_EDGES[i + 1]) / 2)


def face_ita(region_values):
    """Averages 1-3 region ITA modes into one face-level ITA."""
    region_values = np.asarray(list(region_values), dtype=np.float64)
    if not len(region_values):
        raise DegenerateInputError("face ITA needs at least one region")
    return math.fsum(region_values) / len(region_values)  # exact sum, order independent


def patch_ita(patch, kernel=ITA_KERNEL):
    """Region-level ITA of one PixelPatch: ita_map -> smooth_ita -> region_ita."""
    return region_ita(smooth_ita(ita_map(patch), patch.coords, kernel))
