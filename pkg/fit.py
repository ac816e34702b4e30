# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Calibrate a skin-tone gradient (RSR or SREDS model) on a dataset manifest.

Usage:
    $ python fit.py --metric sreds --manifest datasets/neutral/neutral.jsonl
    $ python fit.py --metric rsr --manifest faces.jsonl --model-out models/faces_rsr.json --gray-world

ITA has no training component and is scored directly with score.py.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

FILE = Path(__file__).resolve()
ROOT = FILE.parents[0]  # skintone root directory
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH
ROOT = Path(os.path.relpath(ROOT, Path.cwd()))  # relative

from models.scoring import METRICS, TRAINABLE, FeatureOptions, check_failures, dataset_features, fit_model, save_model
from models.sreds import MAX_ANCHORS
from utils import SkinToneError
from utils.dataloaders import MIN_PATCH_PIXELS, load_manifest
from utils.general import LOGGER, NUM_THREADS, Profile, colorstr, increment_path, print_args


def run(
    metric="sreds",  # rsr or sreds
    manifest="",  # dataset manifest path (*.jsonl)
    model_out=None,  # model file path, defaults to project/name/<dataset>_<metric>.json
    project=ROOT / "runs/fit",  # save to project/name
    name="exp",  # save to project/name
    exist_ok=False,  # existing project/name ok, do not increment
    max_anchors=MAX_ANCHORS,  # SREDS anchor subsample size
    gamma=None,  # SREDS RBF bandwidth, median heuristic when None
    nnmf_iters=500,  # NNMF iteration cap
    nnmf_tol=1e-6,  # NNMF relative objective tolerance
    seed=0,  # NNMF initialisation and anchor subsampling seed
    gray_world=False,  # gray-world normalise images before extraction
    min_pixels=MIN_PATCH_PIXELS,  # minimum interior pixels per region
    workers=NUM_THREADS,  # feature extraction threads
    max_failures=100,  # abort when more samples fail, -1 for no limit
):
    prefix = colorstr("fit: ")
    data = load_manifest(manifest)
    opt = FeatureOptions(
        nnmf_iters=nnmf_iters,
        nnmf_tol=nnmf_tol,
        seed=seed,
        min_patch_pixels=min_pixels,
        gray_world=gray_world,
        workers=workers,
    )
    with Profile() as dt:
        _, features, failures = dataset_features(metric, data, opt, prefix=prefix)
        check_failures(failures, max_failures)
        model = fit_model(metric, features, data.dataset_name, opt, max_anchors=max_anchors, gamma=gamma)

    if model_out is None:
        save_dir = increment_path(Path(project) / name, exist_ok=exist_ok, mkdir=True)
        model_out = save_dir / f"{data.dataset_name}_{metric}.json"
    path = save_model(model, model_out)

    # Summary
    n = len(data) - len(failures)
    if metric == "rsr":
        s = f"direction={np.round(model.direction, 5).tolist()}, sign={model.sign:+d}"
    else:
        s = f"anchors={len(model.anchors)}, gamma={model.gamma:.6g}, eigenvalue={model.eigenvalue:.6g}"
    LOGGER.info(f"{prefix}{metric} model on '{data.dataset_name}' from {n}/{len(data)} samples, {s}, seed={seed}")
    if failures:
        LOGGER.warning(f"{prefix}WARNING ⚠️ {len(failures)} samples skipped")
    LOGGER.info(f"Done ({dt.t:.1f}s). Model saved to {colorstr('bold', path)}")
    return model, path


def parse_opt(args=None):
    """Parses fit.py command-line arguments; `--metric ita` is a usage error."""
    parser = argparse.ArgumentParser()
    parser.add_argument("--metric", type=str, choices=METRICS, default="sreds", help="metric to calibrate")
    parser.add_argument("--manifest", type=str, required=True, help="dataset manifest path (*.jsonl)")
    parser.add_argument("--model-out", type=str, default=None, help="model file path (default: project/name/...)")
    parser.add_argument("--project", default=ROOT / "runs/fit", help="save to project/name")
    parser.add_argument("--name", default="exp", help="save to project/name")
    parser.add_argument("--exist-ok", action="store_true", help="existing project/name ok, do not increment")
    parser.add_argument("--max-anchors", type=int, default=MAX_ANCHORS, help="SREDS anchor subsample size")
    parser.add_argument("--gamma", type=float, default=None, help="SREDS RBF bandwidth (default: median heuristic)")
    parser.add_argument("--nnmf-iters", type=int, default=500, help="NNMF iteration cap")
    parser.add_argument("--nnmf-tol", type=float, default=1e-6, help="NNMF relative objective tolerance")
    parser.add_argument("--seed", type=int, default=0, help="global seed")
    parser.add_argument("--gray-world", action="store_true", help="gray-world normalise images before extraction")
    parser.add_argument("--min-pixels", type=int, default=MIN_PATCH_PIXELS, help="minimum interior pixels per region")
    parser.add_argument("--workers", type=int, default=NUM_THREADS, help="feature extraction threads")
    parser.add_argument("--max-failures", type=int, default=100, help="abort when more samples fail, -1 for no limit")
    opt = parser.parse_args(args)
    if opt.metric not in TRAINABLE:
        parser.error(f"ITA has no training component; --metric must be one of {TRAINABLE}")
    if opt.gamma is not None and opt.gamma <= 0:
        parser.error(f"--gamma must be > 0, got {opt.gamma}")
    print_args(vars(opt))
    return opt


def main(opt):
    """Runs fit.py, returning a process exit status."""
    try:
        run(**vars(opt))
    except (SkinToneError, OSError) as e:
        LOGGER.error(f"{colorstr('red', 'fit: ')}{e}")
        return 1
    return 0


if __name__ == "__main__":
    opt = parse_opt()
    sys.exit(main(opt))
