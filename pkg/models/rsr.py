# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Relative Skin Reflectance (RSR).

A PCA line is fitted through the per-face mean skin colours of a dataset (linear RGB); a face's score is its centred
projection onto that line, oriented so that higher scores mean higher luminance proxy (r + g + b).
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from models.common import check_fields, check_vector, load_json, save_json
from utils import DegenerateInputError, ModelFormatError
from utils.colorspace import srgb_to_linear
from utils.general import LOGGER, colorstr

RSR_VERSION = 1


@dataclass(frozen=True)
class RsrModel:
    """PCA line in linear RGB: `mean_rgb` + t * `direction`, scores multiplied by `sign`."""

    mean_rgb: tuple
    direction: tuple
    sign: int
    trained_on: str
    version: int = RSR_VERSION
    normalization_applied: bool = False

    def __post_init__(self):
        """Validates the unit direction and the orientation token."""
        if abs(np.linalg.norm(self.direction) - 1) > 1e-9:
            raise ModelFormatError(f"RSR direction {self.direction} is not unit length")
        if self.sign not in (1, -1):
            raise ModelFormatError(f"RSR sign must be +1 or -1, got {self.sign}")


def face_mean_rgb(patches):
    """Returns the pixel-weighted mean linear RGB over all pixels of 1-3 PixelPatches."""
    patches = list(patches)
    if not patches:
        raise DegenerateInputError("face mean needs at least one patch")
    return srgb_to_linear(np.concatenate([p.pixels for p in patches], 0)).mean(0)


def fit_rsr(faces, dataset_name="", normalization_applied=False):
    """
    Fits an RsrModel to per-face mean colours (n x 3), n >= 2.

    The direction is the leading eigenvector of the sample covariance, canonicalised so that its largest-magnitude entry
    is positive; `sign` then orients scores to correlate positively with r + g + b.
    """
    X = np.asarray(faces, dtype=np.float64).reshape(-1, 3)
    if len(X) < 2:
        raise DegenerateInputError(f"RSR needs >= 2 faces, got {len(X)}")
    mean = X.mean(0)
    Xc = X - mean
    if not Xc.any():
        raise DegenerateInputError("RSR input has zero variance (all faces identical)")
    _, vecs = linalg.eigh(Xc.T @ Xc / (len(X) - 1))
    d = vecs[:, -1]
    d = d / np.linalg.norm(d)
    d = d if d[np.argmax(np.abs(d))] > 0 else -d
    lum = X.sum(1)
    sign = -1 if (Xc @ d) @ (lum - lum.mean()) < 0 else 1
    model = RsrModel(tuple(mean.tolist()), tuple(d.tolist()), sign, dataset_name, RSR_VERSION, normalization_applied)
    LOGGER.info(f"{colorstr('RSR: ')}fitted on {len(X)} faces of '{dataset_name}', direction={np.round(d, 4).tolist()}")
    return model


def score_rsr(model, face):
    """Returns sign * <face - mean_rgb, direction>."""
    return float(model.sign * (np.asarray(face, dtype=np.float64) - model.mean_rgb) @ np.asarray(model.direction))


def save_rsr(model, path):
    """Writes an RsrModel as a versioned JSON document."""
    return save_json(
        path,
        {
            "kind": "rsr",
            "version": model.version,
            "trained_on": model.trained_on,
            "normalization_applied": model.normalization_applied,
            "mean_rgb": list(model.mean_rgb),
            "direction": list(model.direction),
            "sign": model.sign,
        },
    )


def load_rsr(path):
    """Reads an RsrModel, raising ModelVersionError on version mismatch and ModelFormatError on malformed content."""
    d = load_json(path, kind="rsr", version=RSR_VERSION)
    check_fields(d, ("mean_rgb", "direction", "sign", "trained_on", "normalization_applied"), path)
    return RsrModel(
        mean_rgb=check_vector(d["mean_rgb"], 3, "mean_rgb", path),
        direction=check_vector(d["direction"], 3, "direction", path),
        sign=int(d["sign"]),
        trained_on=str(d["trained_on"]),
        version=d["version"],
        normalization_applied=bool(d["normalization_applied"]),
    )
