# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Score every sample of a dataset manifest with ITA, RSR or SREDS.

Usage:
    $ python score.py --metric ita --manifest datasets/neutral/neutral.jsonl
    $ python score.py --metric sreds --manifest datasets/warm/warm.jsonl --model runs/fit/exp/neutral_sreds.json

Scores are written in manifest order to a CSV (dataset,subject_id,sample_id,metric,score); samples that cannot be
scored are logged and written as NA rows. A provenance sidecar <out>.yaml records the model and resolved options.
"""

import argparse
import os
import sys
from pathlib import Path

FILE = Path(__file__).resolve()
ROOT = FILE.parents[0]  # skintone root directory
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH
ROOT = Path(os.path.relpath(ROOT, Path.cwd()))  # relative

from models.ita import ITA_KERNEL
from models.scoring import (
    METRICS,
    FeatureOptions,
    check_failures,
    check_normalization,
    dataset_features,
    load_model,
    score_dataset,
)
from utils import MissingModelError, SkinToneError, TryExcept
from utils.dataloaders import MIN_PATCH_PIXELS, load_manifest
from utils.general import LOGGER, NUM_THREADS, Profile, check_odd, colorstr, increment_path, print_args, yaml_save
from utils.metrics import write_scores


def run(
    metric="ita",  # ita, rsr or sreds
    manifest="",  # dataset manifest path (*.jsonl)
    model=None,  # RSR/SREDS model file, unused for ita
    out=None,  # scores CSV path, defaults to project/name/<dataset>_<metric>.csv
    project=ROOT / "runs/score",  # save to project/name
    name="exp",  # save to project/name
    exist_ok=False,  # existing project/name ok, do not increment
    ita_kernel=ITA_KERNEL,  # ITA smoothing filter size (odd)
    nnmf_iters=500,  # NNMF iteration cap
    nnmf_tol=1e-6,  # NNMF relative objective tolerance
    seed=0,  # NNMF initialisation seed
    gray_world=False,  # gray-world normalise images before extraction
    min_pixels=MIN_PATCH_PIXELS,  # minimum interior pixels per region
    workers=NUM_THREADS,  # feature extraction threads
    max_failures=100,  # abort when more samples fail, -1 for no limit
):
    prefix = colorstr("score: ")
    model_path = str(model) if model and metric != "ita" else None
    if metric != "ita":
        if not model or not Path(model).is_file():
            raise MissingModelError(f"{metric} model not found: {model}")
        model = load_model(model, metric)
        check_normalization(model, gray_world)
    else:
        model = None
    data = load_manifest(manifest)
    opt = FeatureOptions(ita_kernel, nnmf_iters, nnmf_tol, seed, min_pixels, gray_world, workers)

    with Profile() as dt:
        records, features, failures = dataset_features(metric, data, opt, prefix=prefix)
        trained_on = getattr(model, "trained_on", None)
        attrs = {"trained_on": trained_on, "seed": seed}
        df, score_failures = score_dataset(metric, model, data.dataset_name, records, features, attrs)
    for msg in score_failures:
        LOGGER.warning(f"{prefix}WARNING ⚠️ unscorable sample: {msg}")
    failures += score_failures
    check_failures(failures, max_failures)

    if out is None:
        save_dir = increment_path(Path(project) / name, exist_ok=exist_ok, mkdir=True)
        out = save_dir / f"{data.dataset_name}_{metric}.csv"
    path = write_scores(df, out)
    with TryExcept(f"{prefix}WARNING ⚠️ provenance sidecar not written"):
        yaml_save(
            path.with_suffix(".yaml"),
            {
                "dataset": data.dataset_name,
                "metric": metric,
                "trained_on": trained_on,
                "manifest": str(manifest),
                "model": model_path,
                "ita_kernel": ita_kernel,
                "nnmf_iters": nnmf_iters,
                "nnmf_tol": nnmf_tol,
                "seed": seed,
                "gray_world": gray_world,
                "min_pixels": min_pixels,
                "samples": len(df),
                "failures": len(failures),
            },
        )
    if failures:
        LOGGER.warning(f"{prefix}WARNING ⚠️ {len(failures)}/{len(df)} samples written as NA")
    LOGGER.info(f"Done ({dt.t:.1f}s). {len(df)} scores saved to {colorstr('bold', path)}")
    return df


def parse_opt(args=None):
    """Parses score.py command-line arguments; RSR and SREDS require --model."""
    parser = argparse.ArgumentParser()
    parser.add_argument("--metric", type=str, choices=METRICS, default="ita", help="metric to score")
    parser.add_argument("--manifest", type=str, required=True, help="dataset manifest path (*.jsonl)")
    parser.add_argument("--model", type=str, default=None, help="RSR/SREDS model file")
    parser.add_argument("--out", type=str, default=None, help="scores CSV path (default: project/name/...)")
    parser.add_argument("--project", default=ROOT / "runs/score", help="save to project/name")
    parser.add_argument("--name", default="exp", help="save to project/name")
    parser.add_argument("--exist-ok", action="store_true", help="existing project/name ok, do not increment")
    parser.add_argument("--ita-kernel", type=int, default=ITA_KERNEL, help="ITA smoothing filter size (odd)")
    parser.add_argument("--nnmf-iters", type=int, default=500, help="NNMF iteration cap")
    parser.add_argument("--nnmf-tol", type=float, default=1e-6, help="NNMF relative objective tolerance")
    parser.add_argument("--seed", type=int, default=0, help="global seed")
    parser.add_argument("--gray-world", action="store_true", help="gray-world normalise images before extraction")
    parser.add_argument("--min-pixels", type=int, default=MIN_PATCH_PIXELS, help="minimum interior pixels per region")
    parser.add_argument("--workers", type=int, default=NUM_THREADS, help="feature extraction threads")
    parser.add_argument("--max-failures", type=int, default=100, help="abort when more samples fail, -1 for no limit")
    opt = parser.parse_args(args)
    if opt.metric != "ita" and not opt.model:
        parser.error(f"--model is required for --metric {opt.metric}")
    try:
        check_odd(opt.ita_kernel, "--ita-kernel")
    except ValueError as e:
        parser.error(str(e))
    print_args(vars(opt))
    return opt


def main(opt):
    """Runs score.py, returning a process exit status."""
    try:
        run(**vars(opt))
    except (SkinToneError, OSError) as e:
        LOGGER.error(f"{colorstr('red', 'score: ')}{e}")
        return 1
    return 0


if __name__ == "__main__":
    opt = parse_opt()
    sys.exit(main(opt))
