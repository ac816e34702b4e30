# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Per-metric plumbing shared by fit.py, score.py and analyze.py.

Scoring is split into a model-independent feature stage (expensive: colour conversion, NNMF) and a model-dependent
scoring stage (cheap projections), so one manifest's features can be scored against several models.
"""

from dataclasses import dataclass

import numpy as np

from models.common import peek_kind
from models.ita import ITA_KERNEL, face_ita, patch_ita
from models.rsr import face_mean_rgb, fit_rsr, load_rsr, save_rsr, score_rsr
from models.sreds import MAX_ANCHORS, fit_sreds, load_sreds, mean_projection, save_sreds
from utils import DegenerateInputError, ModelFormatError, SkinToneError
from utils.dataloaders import MIN_PATCH_PIXELS, LoadSamples
from utils.dichromatic import extract_diffuse
from utils.general import NUM_THREADS
from utils.metrics import METRIC_NAMES, score_table

METRICS = "ita", "rsr", "sreds"
TRAINABLE = "rsr", "sreds"


@dataclass
class FeatureOptions:
    """Extraction settings shared by fitting and scoring."""

    ita_kernel: int = ITA_KERNEL
    nnmf_iters: int = 500
    nnmf_tol: float = 1e-6
    seed: int = 0
    min_patch_pixels: int = MIN_PATCH_PIXELS
    gray_world: bool = False
    workers: int = NUM_THREADS


def sample_features(metric, patches, opt):
    """
    Model-independent features of one face.

    ita: list of region ITA modes; rsr: face mean linear RGB (3,); sreds: list of per-region DiffuseFeatures.
    """
    if metric == "ita":
        return [patch_ita(p, opt.ita_kernel) for p in patches]
    if metric == "rsr":
        return face_mean_rgb(patches)
    if metric == "sreds":
        return [extract_diffuse(p, seed=opt.seed, iters=opt.nnmf_iters, tol=opt.nnmf_tol) for p in patches]
    raise ValueError(f"unknown metric '{metric}', expected one of {METRICS}")


def score_features(metric, model, features):
    """Turns sample_features output into one face score with `model` (None for ita)."""
    if metric == "ita":
        return face_ita(features)
    if metric == "rsr":
        return score_rsr(model, features)
    if metric == "sreds":
        return mean_projection(model, features)
    raise ValueError(f"unknown metric '{metric}', expected one of {METRICS}")


def dataset_features(metric, manifest, opt, prefix=""):
    """
    Extracts features for every sample of `manifest`, in manifest order, on LoadSamples' worker pool.

    Returns (records, features, failures): `features[i]` is None for a soft-failed sample and `failures` lists the
    messages of those samples.
    """
    loader = LoadSamples(
        manifest,
        opt.min_patch_pixels,
        opt.gray_world,
        opt.workers,
        prefix,
        features=lambda patches: sample_features(metric, patches, opt),
        desc=f"Extracting {metric} features from {manifest.dataset_name}",
    )
    features, failures = [], []
    for sample in loader:
        features.append(sample.features if sample.ok else None)
        if not sample.ok:
            failures.append(sample.msg)
    return list(manifest.samples), features, failures


def fit_model(metric, features, dataset_name, opt, max_anchors=MAX_ANCHORS, gamma=None):
    """Fits an RSR or SREDS model on the non-None entries of dataset_features output."""
    features = [f for f in features if f is not None]
    if metric == "rsr":
        return fit_rsr(np.array(features), dataset_name, normalization_applied=opt.gray_world)
    if metric == "sreds":
        regions = [r for f in features for r in f]  # every region is a training point
        return fit_sreds(np.array(regions), max_anchors, gamma, seed=opt.seed, dataset_name=dataset_name)
    raise ValueError(f"ITA has no training component; --metric must be one of {TRAINABLE}")


def save_model(model, path):
    """Saves an RsrModel or SredsModel by type."""
    return save_rsr(model, path) if hasattr(model, "direction") else save_sreds(model, path)


def load_model(path, metric=None):
    """Loads an RSR or SREDS model file, dispatching on its `kind`; checks it matches `metric` when given."""
    kind = peek_kind(path)
    if metric and kind != metric:
        raise ModelFormatError(f"{path}: expected a '{metric}' model, found '{kind}'")
    if kind == "rsr":
        return load_rsr(path)
    if kind == "sreds":
        return load_sreds(path)
    raise ModelFormatError(f"{path}: unknown model kind '{kind}'")


def check_failures(failures, max_failures=100):
    """Raises SkinToneError when more than `max_failures` samples soft-failed (a negative limit disables the check)."""
    if 0 <= max_failures < len(failures):
        raise SkinToneError(f"{len(failures)} samples failed (--max-failures={max_failures}), first: {failures[0]}")


def score_dataset(metric, model, dataset_name, records, features, attrs=None):
    """
    Scores dataset_features output into a ScoreTable in manifest order.

    Samples without features, or whose features cannot be scored, become NA rows. Returns (table, failures).
    """
    rows, failures = [], []
    for r, f in zip(records, features):
        score = np.nan
        if f is not None:
            try:
                score = score_features(metric, model, f)
            except DegenerateInputError as e:
                failures.append(f"{r.image_path}: {e}")
        rows.append((dataset_name, r.subject_id, r.sample_id, METRIC_NAMES[metric], score))
    return score_table(rows, attrs), failures


def check_normalization(model, gray_world):
    """Raises ModelFormatError when an RSR model was fitted with a different --gray-world setting than requested."""
    applied = getattr(model, "normalization_applied", None)
    if applied is not None and applied != gray_world:
        want = "with" if applied else "without"
        raise ModelFormatError(
            f"RSR model trained on '{model.trained_on}' was fitted {want} gray-world normalisation, "
            f"score {want} --gray-world to match"
        )
