# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""Shared pytest fixtures: tiny images and manifests under tmp_path, and a small synthetic dataset."""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]  # skintone root directory
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH

from utils.dataloaders import PixelPatch  # noqa: E402
from utils.general import cv2, imwrite  # noqa: E402
from utils.synthetic import SynthSpec, generate_dataset  # noqa: E402


def write_rgb(path, rgb):
    """Writes an (H, W, 3) uint8 RGB array as a lossless PNG."""
    assert imwrite(path, cv2.cvtColor(np.ascontiguousarray(rgb, dtype=np.uint8), cv2.COLOR_RGB2BGR))
    return path


def write_manifest(path, records):
    """Writes manifest records (dicts) as JSON Lines."""
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    return path


def constant_patch(rgb, n=64, region_kind="forehead"):
    """PixelPatch of `n` identical pixels on an 8-wide row-major grid."""
    idx = np.arange(n)
    return PixelPatch(np.tile(np.asarray(rgb, dtype=np.uint8), (n, 1)), np.stack((idx % 8, idx // 8), 1), region_kind)


SMALL_SPEC = dict(
    n_subjects=8,
    samples_per_subject=2,
    melanin_range=(0.3, 1.0),
    melanin_grid=True,
    specular_range=(0.0, 0.2),
    patch_size=64,
    seed=0,
)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Directory holding a small rendered synthetic dataset named 'neutral'."""
    out = tmp_path_factory.mktemp("synth") / "neutral"
    generate_dataset(SynthSpec(name="neutral", **SMALL_SPEC), out, workers=2)
    return out


@pytest.fixture(scope="session")
def synth_manifest(synth_dir):
    """Path of the small synthetic dataset's manifest."""
    return synth_dir / "neutral.jsonl"


@pytest.fixture(scope="session")
def warm_manifest(tmp_path_factory):
    """Manifest of a second small synthetic dataset rendered under a warm illuminant."""
    out = tmp_path_factory.mktemp("synth") / "warm"
    spec = SynthSpec(name="warm", **{**SMALL_SPEC, "seed": 1}, illuminants=[(1.0, 0.95, 0.9)])
    generate_dataset(spec, out, workers=2)
    return out / "warm.jsonl"
