# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""Dataset manifests, image decoding and skin-patch extraction."""

import json
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import Any, List, Optional, Tuple

import numpy as np
from PIL import Image
from tqdm import tqdm

from utils import ManifestError, PatchError
from utils.colorspace import gray_world
from utils.general import LOGGER, NUM_THREADS, TQDM_BAR_FORMAT, cv2, imread

# Parameters
REGIONS = "forehead", "left_cheek", "right_cheek"  # region kinds, canonical order
IMG_FORMATS = "png", "jpeg"  # accepted image containers (PIL format names)
MIN_PATCH_PIXELS = 64  # default minimum interior pixel count of a usable patch


def _is_int(c):
    return isinstance(c, (int, np.integer)) and not isinstance(c, bool)


@dataclass(frozen=True)
class RegionPolygon:
    """Skin region outline in pixel coordinates; vertices are (x, y) integer pairs."""

    region_kind: str
    vertices: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        """Validates region kind, vertex count, non-negative integer coordinates and non-self-intersection."""
        if self.region_kind not in REGIONS:
            raise ValueError(f"unknown region '{self.region_kind}', expected one of {REGIONS}")
        v = tuple(tuple(xy) for xy in self.vertices)
        if not all(len(xy) == 2 and all(_is_int(c) for c in xy) for xy in v):
            raise ValueError(f"{self.region_kind}: vertices must be integer [x, y] pairs, got {[list(xy) for xy in v]}")
        v = tuple((int(x), int(y)) for x, y in v)
        if len(v) < 3:
            raise ValueError(f"{self.region_kind}: polygon needs >= 3 vertices, got {len(v)}")
        if any(x < 0 or y < 0 for x, y in v):
            raise ValueError(f"{self.region_kind}: negative vertex coordinates {v}")
        if self_intersects(v):
            raise ValueError(f"{self.region_kind}: polygon is self-intersecting")
        object.__setattr__(self, "vertices", v)


@dataclass(frozen=True)
class SampleRecord:
    """One manifest line: an image of `subject_id` with 1-3 skin regions."""

    image_path: Path
    subject_id: str
    sample_id: str
    group_label: Optional[str]
    regions: Tuple[RegionPolygon, ...]


@dataclass
class DatasetManifest:
    """Named, ordered list of SampleRecords; sample order is the canonical output order."""

    dataset_name: str
    samples: List[SampleRecord] = field(default_factory=list)

    def __len__(self):
        """Returns the number of samples."""
        return len(self.samples)

    def __iter__(self):
        """Iterates samples in manifest order."""
        return iter(self.samples)


@dataclass
class PixelPatch:
    """Extracted skin pixels: `pixels` (N, 3) uint8 RGB, `coords` (N, 2) integer (x, y), row-major scan order."""

    pixels: np.ndarray
    coords: np.ndarray
    region_kind: str = "forehead"

    def __post_init__(self):
        """Coerces array dtypes and checks that pixels and coords align."""
        self.pixels = np.asarray(self.pixels, dtype=np.uint8).reshape(-1, 3)
        self.coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 2)
        assert len(self.pixels) == len(self.coords), f"{len(self.pixels)} pixels but {len(self.coords)} coords"

    def __len__(self):
        """Returns the number of pixels."""
        return len(self.pixels)


def _orient(p, q, r):
    """Returns the sign of the cross product (q - p) x (r - p)."""
    return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))


def self_intersects(vertices):
    """Checks whether any two non-adjacent polygon edges properly cross each other."""
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the closing edge
            (p1, p2), (q1, q2) = edges[i], edges[j]
            d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
            d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


def polygon_mask(vertices, shape):
    """
    Returns a boolean (H, W) mask of the pixel centres strictly inside the polygon under the even-odd rule.

    Pixel (x, y) sits at integer coordinates; pixels on an edge are excluded. Crossings use the half-open rule so the
    result does not depend on which vertex the polygon starts from.
    """
    h, w = shape[:2]
    v = np.asarray(vertices, dtype=np.float64)
    x0, y0 = np.floor(v.min(0)).astype(int)
    x1, y1 = np.ceil(v.max(0)).astype(int)
    x0, y0, x1, y1 = max(x0, 0), max(y0, 0), min(x1, w - 1), min(y1, h - 1)
    mask = np.zeros((h, w), dtype=bool)
    if x1 < x0 or y1 < y0:
        return mask
    py, px = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    boundary = np.zeros(px.shape, dtype=bool)
    for (ax, ay), (bx, by) in zip(v, np.roll(v, -1, axis=0)):
        # on-edge test: collinear and within the segment's bounding box
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        within_x = (min(ax, bx) <= px) & (px <= max(ax, bx))
        within_y = (min(ay, by) <= py) & (py <= max(ay, by))
        boundary |= (cross == 0) & within_x & within_y
        # crossing-number test: upward or downward crossing right of the point
        if ay != by:
            straddle = (ay <= py) != (by <= py)
            xi = ax + (py - ay) * (bx - ax) / (by - ay)
            inside ^= straddle & (px < xi)
    mask[y0 : y1 + 1, x0 : x1 + 1] = inside & ~boundary
    return mask


def extract_patch(image, poly, min_patch_pixels=MIN_PATCH_PIXELS):
    """
    Extracts the pixels of `image` (H, W, 3) RGB strictly inside `poly` in row-major order as a PixelPatch.

    Raises PatchError when a vertex lies outside the image or fewer than `min_patch_pixels` pixels are enclosed.
    """
    h, w = image.shape[:2]
    v = np.asarray(poly.vertices)
    if (v[:, 0] >= w).any() or (v[:, 1] >= h).any():
        raise PatchError(f"{poly.region_kind}: polygon {poly.vertices} out of bounds for {w}x{h} image")
    ys, xs = np.nonzero(polygon_mask(poly.vertices, (h, w)))  # row-major
    if len(ys) < min_patch_pixels:
        raise PatchError(f"{poly.region_kind}: {len(ys)} interior pixels < min_patch_pixels={min_patch_pixels}")
    return PixelPatch(pixels=image[ys, xs], coords=np.stack((xs, ys), 1), region_kind=poly.region_kind)


def _parse_record(obj, parent, where):
    """Builds a SampleRecord from one decoded manifest JSON object; `where` prefixes error messages."""
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected a JSON object")
    try:
        for k in "image_path", "subject_id", "sample_id", "regions":
            assert k in obj, f"missing key '{k}'"
        for k in "image_path", "subject_id", "sample_id":
            assert isinstance(obj[k], str) and obj[k], f"'{k}' must be a non-empty string"
        group = obj.get("group_label")
        assert group is None or isinstance(group, str), "'group_label' must be a string or null"
        regions = obj["regions"]
        assert isinstance(regions, dict) and regions, "'regions' must be a non-empty object"
        polys = tuple(RegionPolygon(k, tuple(tuple(xy) for xy in regions[k])) for k in REGIONS if k in regions)
        unknown = set(regions) - set(REGIONS)
        assert not unknown, f"unknown region kinds {sorted(unknown)}"
    except (AssertionError, ValueError, TypeError) as e:
        raise ManifestError(f"{where}: {e}") from e
    image_path = Path(obj["image_path"])
    return SampleRecord(
        image_path=image_path if image_path.is_absolute() else parent / image_path,
        subject_id=obj["subject_id"],
        sample_id=obj["sample_id"],
        group_label=group,
        regions=polys,
    )


def load_manifest(path, dataset_name=None):
    """
    Loads a JSON Lines manifest into a DatasetManifest, preserving line order.

    Relative image paths resolve against the manifest's directory. The dataset name defaults to the manifest file stem.
    Raises ManifestError with the line number on parse errors, on duplicate (subject_id, sample_id) pairs and on empty
    manifests.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    samples, seen = [], {}
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{i}: invalid JSON ({e.msg})") from e
            record = _parse_record(obj, path.parent, f"{path}:{i}")
            key = record.subject_id, record.sample_id
            if key in seen:
                raise ManifestError(f"{path}:{i}: duplicate (subject_id, sample_id) {key}, first on line {seen[key]}")
            seen[key] = i
            samples.append(record)
    if not samples:
        raise ManifestError(f"{path}: empty manifest")
    return DatasetManifest(dataset_name or path.stem, samples)


def save_manifest(manifest, path):
    """Writes `manifest` as UTF-8 JSON Lines; image paths are stored relative to the manifest when possible."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in manifest:
            try:
                image_path = s.image_path.relative_to(path.parent)
            except ValueError:
                image_path = s.image_path
            obj = {
                "image_path": image_path.as_posix(),
                "subject_id": s.subject_id,
                "sample_id": s.sample_id,
                "group_label": s.group_label,
                "regions": {r.region_kind: [list(xy) for xy in r.vertices] for r in s.regions},
            }
            f.write(json.dumps(obj) + "\n")
    return path


def load_image(path):
    """Verifies a PNG/JPEG container with PIL and decodes it with OpenCV to an (H, W, 3) uint8 RGB array."""
    with Image.open(path) as im:
        im.verify()  # PIL verify
        fmt = (im.format or "").lower()
    assert fmt in IMG_FORMATS, f"invalid image format {fmt or 'unknown'}"
    im = imread(str(path), cv2.IMREAD_COLOR)  # BGR, alpha dropped
    assert im is not None, "image could not be decoded"
    return cv2.cvtColor(im, cv2.COLOR_BGR2RGB)


@dataclass
class Sample:
    """Patches extracted for one SampleRecord; `patches` is empty and `msg` set on failure."""

    record: SampleRecord
    patches: List[PixelPatch]
    msg: str = ""
    features: Any = None  # output of LoadSamples' `features` callable

    @property
    def ok(self):
        """True when at least one region produced a usable patch."""
        return bool(self.patches)


class LoadSamples:
    """
    Iterates a DatasetManifest yielding one Sample per record, in manifest order.

    Decoding, patch extraction and the optional `features(patches)` callable run on a ThreadPool of `workers` threads;
    output order never depends on the worker count. A region that fails extraction is dropped with a warning; a sample
    with no usable region, an unreadable image or a failing `features` call is yielded with empty patches and a
    message instead of raising.
    """

    def __init__(
        self,
        manifest,
        min_patch_pixels=MIN_PATCH_PIXELS,
        gray_world=False,
        workers=NUM_THREADS,
        prefix="",
        features=None,
        desc=None,
    ):
        """Stores the manifest, extraction options and the per-sample feature callable."""
        self.manifest = manifest
        self.min_patch_pixels = min_patch_pixels
        self.gray_world = gray_world
        self.workers = max(1, int(workers))
        self.prefix = prefix
        self.features = features
        self.desc = desc or f"Loading {manifest.dataset_name}"

    def __len__(self):
        """Returns the number of samples in the manifest."""
        return len(self.manifest)

    def load(self, record):
        """Decodes one record's image and extracts its patches."""
        try:
            im = load_image(record.image_path)
        except Exception as e:
            return Sample(record, [], f"{record.image_path}: unreadable image: {e}")
        if self.gray_world:
            im = gray_world(im)
        patches, msgs = [], []
        for poly in record.regions:
            try:
                patches.append(extract_patch(im, poly, self.min_patch_pixels))
            except PatchError as e:
                msgs.append(str(e))
        msg = f"{record.image_path}: " + ", ".join(msgs) if msgs else ""
        return Sample(record, patches, msg)

    def _work(self, record):
        sample = self.load(record)
        if sample.ok and self.features:
            try:
                sample.features = self.features(sample.patches)
            except Exception as e:
                return Sample(record, [], f"{record.image_path}: {e}")
        return sample

    def __iter__(self):
        """Yields Samples in manifest order, logging per-region and per-sample warnings."""
        with ThreadPool(self.workers) as pool:
            pbar = tqdm(
                pool.imap(self._work, self.manifest.samples),
                desc=f"{self.prefix}{self.desc}",
                total=len(self),
                bar_format=TQDM_BAR_FORMAT,
                disable=len(self) < 2,
            )
            for sample in pbar:
                if sample.msg:
                    level = "dropped regions" if sample.ok else "skipping sample"
                    LOGGER.warning(f"{self.prefix}WARNING ⚠️ {level}: {sample.msg}")
                elif not sample.ok:
                    sample.msg = f"{sample.record.image_path}: no usable region"
                    LOGGER.warning(f"{self.prefix}WARNING ⚠️ skipping sample: {sample.msg}")
                yield sample
