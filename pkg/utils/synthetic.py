# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Synthetic skin-patch datasets rendered with the dichromatic forward model.

Each pixel's linear radiance is g * (albedo ∘ illuminant) + s * illuminant + noise, where the shading g is lognormal,
the specular weight s is half-normal and the noise is Gaussian per channel. A subject's albedo is `melanin` times a
fixed base albedo; the melanin value is drawn once per subject and embedded in the subject id, which makes the datasets
ground truth for the tone-gradient checks.
"""

import math
from dataclasses import asdict, dataclass, field, fields
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import List, Tuple

import numpy as np

from utils import SpecError
from utils.colorspace import linear_to_srgb
from utils.dataloaders import MIN_PATCH_PIXELS, REGIONS, DatasetManifest, PixelPatch, RegionPolygon, SampleRecord
from utils.dataloaders import save_manifest
from utils.general import LOGGER, NUM_THREADS, colorstr, cv2, imwrite, rng_streams, yaml_load, yaml_save


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_range(v):
    return len(v) == 2 and 0 <= v[0] <= v[1]


def _coerce(k, v):
    """Converts a YAML value of field `k` to the field's type; raises TypeError/ValueError when it cannot."""
    if k in ("melanin_range", "specular_range", "base_albedo"):
        return tuple(float(x) for x in v)
    if k == "illuminants":
        return [tuple(float(x) for x in e) for e in v]
    if k in ("shading_variation", "noise_sigma"):
        return float(v)
    return v


@dataclass
class SynthSpec:
    """Parameters of a synthetic dataset; every random draw derives from `seed`."""

    n_subjects: int = 40
    samples_per_subject: int = 5
    melanin_range: Tuple[float, float] = (0.3, 1.0)
    melanin_grid: bool = False  # subjects on a uniform melanin grid instead of uniform draws
    base_albedo: Tuple[float, float, float] = (0.75, 0.55, 0.45)
    illuminants: List[Tuple[float, float, float]] = field(default_factory=lambda: [(1.0, 1.0, 1.0)])
    specular_range: Tuple[float, float] = (0.0, 0.3)
    shading_variation: float = 0.1
    noise_sigma: float = 0.005
    patch_size: int = 256  # interior pixels per region, a perfect square
    seed: int = 0
    name: str = "synth"

    def validate(self):
        """Raises SpecError naming every invalid field; values of the wrong type count as invalid, not as crashes."""
        checks = {
            "n_subjects": (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
            "samples_per_subject": (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
            "melanin_range": (_is_range, "must be an ordered non-negative [lo, hi] pair"),
            "melanin_grid": (lambda v: isinstance(v, bool), "must be true or false"),
            "base_albedo": (lambda v: len(v) == 3 and all(0 < a <= 1 for a in v), "must be 3 values in (0, 1]"),
            "illuminants": (
                lambda v: len(v) > 0 and all(len(e) == 3 and all(0 < c <= 1 for c in e) for e in v),
                "must be a non-empty list of 3-vectors in (0, 1]",
            ),
            "specular_range": (_is_range, "must be an ordered non-negative [lo, hi] pair"),
            "shading_variation": (lambda v: v >= 0, "must be >= 0"),
            "noise_sigma": (lambda v: v >= 0, "must be >= 0"),
            "patch_size": (
                lambda v: _is_int(v) and v >= MIN_PATCH_PIXELS and math.isqrt(v) ** 2 == v,
                f"must be a perfect square >= {MIN_PATCH_PIXELS}",
            ),
            "seed": (_is_int, "must be an integer"),
            "name": (lambda v: isinstance(v, str) and v.strip() != "", "must be a non-empty string"),
        }
        errors = {}
        for k, (ok, msg) in checks.items():
            v = getattr(self, k)
            try:
                valid = ok(v)
            except (TypeError, ValueError):
                valid = False
            if not valid:
                errors[k] = f"{msg}, got {v!r}"
        if errors:
            raise SpecError(errors)
        return self

    @classmethod
    def from_dict(cls, d):
        """Builds a validated SynthSpec from a mapping; unknown keys and uncoercible values share one SpecError."""
        if not isinstance(d, dict):
            raise SpecError({"spec": f"must be a mapping of fields, got {type(d).__name__}"})
        known = {f.name for f in fields(cls)}
        errors = {k: "unknown field" for k in sorted(set(d) - known)}
        values = {}
        for k, v in d.items():
            if k not in known:
                continue
            try:
                values[k] = _coerce(k, v)
            except (TypeError, ValueError):
                errors[k] = f"invalid value {v!r}"
        if errors:
            raise SpecError(errors)
        return cls(**values).validate()

    @classmethod
    def from_yaml(cls, file):
        """Loads a SynthSpec from a YAML file; missing keys keep their defaults."""
        return cls.from_dict(yaml_load(file) or {})


def render_intensities(albedo, illuminant, specular_strength, shading_sigma, noise_sigma, n_pixels, seed=0):
    """Returns (n_pixels, 3) linear radiances of the dichromatic model, clamped to [0, 1]."""
    rng = np.random.default_rng(seed)
    albedo, illuminant = np.asarray(albedo, dtype=np.float64), np.asarray(illuminant, dtype=np.float64)
    g = rng.lognormal(0.0, shading_sigma, (n_pixels, 1))
    s = np.abs(rng.normal(0.0, specular_strength, (n_pixels, 1)))  # half-normal
    eps = rng.normal(0.0, noise_sigma, (n_pixels, 3))
    return np.clip(g * (albedo * illuminant) + s * illuminant + eps, 0, 1)


def render_patch(albedo, illuminant, specular_strength, shading_sigma, noise_sigma, n_pixels, seed=0):
    """
    Renders a PixelPatch of `n_pixels` laid out row-major on a square grid.

    Linear radiances are sRGB-encoded and quantised to 8 bits, so decoding the patch recovers the rendered radiance.
    """
    lin = render_intensities(albedo, illuminant, specular_strength, shading_sigma, noise_sigma, n_pixels, seed)
    side = math.isqrt(n_pixels - 1) + 1
    idx = np.arange(n_pixels)
    return PixelPatch(linear_to_srgb(lin), np.stack((idx % side, idx // side), 1))


def subject_melanin(spec):
    """Returns one melanin value per subject (grid or seeded draws)."""
    lo, hi = spec.melanin_range
    if spec.melanin_grid:
        return np.linspace(lo, hi, spec.n_subjects)
    return np.array([rng_streams(spec.seed, i).uniform(lo, hi) for i in range(spec.n_subjects)])


def _render_sample(spec, i, j, melanin, image_dir):
    """Renders sample j of subject i as one image tiling the three regions side by side; returns its SampleRecord."""
    rng = rng_streams(spec.seed, i, j)
    side = math.isqrt(spec.patch_size)  # interior side length
    tile = side + 2  # full-rectangle polygons exclude their boundary row/column
    illuminant = spec.illuminants[int(rng.integers(len(spec.illuminants)))]
    strength = rng.uniform(*spec.specular_range)
    albedo = melanin * np.asarray(spec.base_albedo)
    image = np.empty((tile, tile * len(REGIONS), 3), dtype=np.uint8)
    polys = []
    for r, kind in enumerate(REGIONS):
        seed = int(rng.integers(2**63))
        lin = render_intensities(albedo, illuminant, strength, spec.shading_variation, spec.noise_sigma, tile**2, seed)
        image[:, r * tile : (r + 1) * tile] = linear_to_srgb(lin).reshape(tile, tile, 3)
        x0, x1 = r * tile, (r + 1) * tile - 1
        polys.append(RegionPolygon(kind, ((x0, 0), (x1, 0), (x1, tile - 1), (x0, tile - 1))))
    subject = f"s{i:04d}_m{melanin:.4f}"
    path = Path(image_dir) / f"{subject}_{j:03d}.png"
    assert imwrite(path, cv2.cvtColor(image, cv2.COLOR_RGB2BGR)), f"failed to write {path}"
    group = "m_low" if melanin < sum(spec.melanin_range) / 2 else "m_high"
    return SampleRecord(path, subject, f"{j:03d}", group, tuple(polys))


def melanin_from_subject(subject_id):
    """Recovers the melanin value embedded in a synthetic subject id ('s0003_m0.4521' -> 0.4521)."""
    return float(subject_id.rsplit("_m", 1)[1])


def generate_dataset(spec, out_dir, workers=NUM_THREADS):
    """
    Renders `spec` into `out_dir`: PNG images under images/, a `<name>.jsonl` manifest and the resolved `spec.yaml`.

    Per-sample random streams are keyed by (subject, sample) so the output is byte-identical for any worker count.
    Returns the DatasetManifest.
    """
    spec.validate()
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    melanin = subject_melanin(spec)
    jobs = [(i, j) for i in range(spec.n_subjects) for j in range(spec.samples_per_subject)]
    with ThreadPool(max(1, workers)) as pool:
        samples = pool.map(lambda ij: _render_sample(spec, *ij, melanin[ij[0]], image_dir), jobs)
    manifest = DatasetManifest(spec.name, samples)
    path = save_manifest(manifest, out_dir / f"{spec.name}.jsonl")
    d = asdict(spec)
    d.update({k: list(v) for k, v in d.items() if isinstance(v, tuple)})
    d["illuminants"] = [list(e) for e in spec.illuminants]  # safe_dump has no tuple representer
    yaml_save(out_dir / "spec.yaml", d)
    LOGGER.info(f"{colorstr('synth: ')}{len(samples)} samples of {spec.n_subjects} subjects written to {path}")
    return manifest
