# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Analyse skin-tone scores: intra-subject variability, cross-dataset calibration matrices, binning and group
distributions.

Usage - subcommands:
    $ python analyze.py variability --scores runs/score/exp/neutral_ita.csv runs/score/exp2/neutral_sreds.csv
    $ python analyze.py cross --manifests a/a.jsonl b/b.jsonl --models a_rsr.json a_sreds.json b_rsr.json b_sreds.json
    $ python analyze.py bin --scores neutral_sreds.csv --strategy median --per-subject --manifest a/a.jsonl
    $ python analyze.py dist --scores neutral_sreds.csv --manifest a/a.jsonl --bins 50

Reports are CSV files saved to project/name (runs/analyze/exp, exp2, ...).
"""

import argparse
import os
import sys
from pathlib import Path

import pandas as pd

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
from utils import ManifestError, MissingModelError, ScoreSchemaError, SkinToneError
from utils.dataloaders import MIN_PATCH_PIXELS, load_manifest
from utils.general import LOGGER, NUM_THREADS, Profile, check_odd, colorstr, increment_path, print_args, yaml_load
from utils.metrics import (
    METRIC_NAMES,
    bin_crosstab,
    bin_scores,
    group_distribution,
    read_scores,
    report_table,
    subject_scores,
    variability_matrix,
    write_report,
)

PREFIX = colorstr("analyze: ")


def cross_dataset_matrix(
    models, manifests, metrics=METRICS, opt=None, trains=None, normalize=True, max_failures=100, prefix=PREFIX
):
    """
    Scores every test manifest with the model of every training dataset and reports intra-subject variability.

    Args:
        models: fitted RsrModel / SredsModel objects, matched to rows through their `trained_on` dataset name.
        manifests: test DatasetManifests (columns).
        metrics: metrics to report, any of 'ita', 'rsr', 'sreds'.
        opt: FeatureOptions for feature extraction.
        trains: training dataset names (rows), defaults to the test dataset names.
        normalize: z-normalise each cell's scores before computing variability.
        max_failures: per-cell soft-failure limit (extraction plus scoring), -1 for no limit.

    Returns:
        (report, cells): the VariabilityReport in train x test x metric order and the ScoreTable of every cell (None
        for not-applicable ITA cells, which only exist on the diagonal).

    Raises MissingModelError naming the first (train, test, metric) cell without a model, and ModelFormatError for an
    RSR model fitted under a different gray-world setting, before any scoring starts.
    """
    opt = opt or FeatureOptions()
    tests = [m.dataset_name for m in manifests]
    if len(set(tests)) != len(tests):
        raise ManifestError(f"test datasets must have distinct names, got {tests}")
    trains = list(dict.fromkeys(trains or tests))
    available = {("rsr" if hasattr(m, "direction") else "sreds", m.trained_on): m for m in models}

    plan = {}  # (train, test, metric) -> (applicable, model)
    for train in trains:
        for test in tests:
            for metric in metrics:
                if metric == "ita":
                    plan[train, test, metric] = train == test, None
                elif (metric, train) in available:
                    check_normalization(available[metric, train], opt.gray_world)
                    plan[train, test, metric] = True, available[metric, train]
                else:
                    cell = f"({train} -> {test}, {metric})"
                    raise MissingModelError(f"no {metric} model trained on '{train}' for cell {cell}")

    cells = dict.fromkeys(plan)
    for data in manifests:
        for metric in metrics:
            todo = [t for t in trains if plan[t, data.dataset_name, metric][0]]
            if not todo:
                continue
            records, features, failures = dataset_features(metric, data, opt, prefix=prefix)  # shared by every model
            for train in todo:
                model = plan[train, data.dataset_name, metric][1]
                attrs = {"trained_on": train, "seed": opt.seed}
                df, score_failures = score_dataset(metric, model, data.dataset_name, records, features, attrs)
                for msg in score_failures:
                    LOGGER.warning(f"{prefix}WARNING ⚠️ unscorable sample: {msg}")
                try:
                    check_failures(failures + score_failures, max_failures)
                except SkinToneError as e:
                    raise SkinToneError(f"cell ({train} -> {data.dataset_name}, {metric}): {e}") from e
                cells[train, data.dataset_name, metric] = df
    named = {(tr, te, METRIC_NAMES[m]): df for (tr, te, m), df in cells.items()}
    return variability_matrix(named, normalize), cells


def sidecar_trained_on(csv):
    """Returns the `trained_on` dataset recorded in a scores CSV's provenance sidecar, or None."""
    f = Path(csv).with_suffix(".yaml")
    if f.is_file():
        return (yaml_load(f) or {}).get("trained_on")
    return None


def manifest_labels(manifest):
    """Group labels of a manifest as a DataFrame (subject_id, sample_id, group_label)."""
    rows = [(s.subject_id, s.sample_id, s.group_label) for s in load_manifest(manifest)]
    return pd.DataFrame(rows, columns=["subject_id", "sample_id", "group_label"])


def slices(df, metric=None):
    """Yields ((dataset, metric), slice) pairs of a ScoreTable in first-seen order, optionally for one metric."""
    if metric:
        df = df[df["metric"].str.upper() == metric.upper()]
        if df.empty:
            raise ScoreSchemaError(f"no '{metric}' scores found")
    yield from df.groupby(["dataset", "metric"], sort=False)


def run_variability(scores, normalize=True, save_dir=None):
    """One variability row per (dataset, metric) slice of every scores CSV; rows are keyed by the sidecar's
    `trained_on` when present, otherwise by the scored dataset itself.
    """
    cells = {}
    for csv in scores:
        df = read_scores(csv)
        trained_on = sidecar_trained_on(csv)
        for (dataset, metric), s in slices(df):
            key = trained_on or dataset, dataset, metric
            if key in cells:
                raise ScoreSchemaError(f"{csv}: cell {key} already provided by another scores file")
            cells[key] = s
    report = variability_matrix(cells, normalize)
    LOGGER.info(f"{PREFIX}intra-subject variability (normalize={normalize})\n{report.to_string(index=False)}")
    write_report(report, save_dir / "variability.csv", index=False)
    return report


def run_cross(
    manifests, models=(), metrics=METRICS, trains=None, normalize=True, max_failures=100, save_dir=None, **kwargs
):
    """Loads models and manifests, builds the cross-dataset matrix and writes it in long and table layouts."""
    loaded = []
    for f in models:
        if not Path(f).is_file():
            LOGGER.warning(f"{PREFIX}WARNING ⚠️ model not found: {f}")
            continue
        loaded.append(load_model(f))
    manifests = [load_manifest(f) for f in manifests]
    opt = FeatureOptions(**kwargs)
    report, _ = cross_dataset_matrix(loaded, manifests, metrics, opt, trains, normalize, max_failures)
    table = report_table(report)
    LOGGER.info(f"{PREFIX}cross-dataset intra-subject variability (normalize={normalize})\n{table.to_string()}")
    write_report(report, save_dir / "cross_long.csv", index=False)
    write_report(table, save_dir / "cross.csv")
    return report


def run_bin(scores, strategy="median", k=2, metric=None, per_subject=False, manifest=None, save_dir=None):
    """Bins every (dataset, metric) slice separately; with a manifest also tabulates bins against group labels."""
    df = read_scores(scores)
    binned = []
    for (dataset, m), s in slices(df, metric):
        s = subject_scores(s) if per_subject else s.dropna(subset=["score"])
        labels, edges = bin_scores(s["score"].to_numpy(), strategy, k)
        LOGGER.info(f"{PREFIX}{dataset}/{m} {strategy} edges: {', '.join(f'{e:.6g}' for e in edges)}")
        binned.append(s.assign(bin=labels))
    binned = pd.concat(binned, ignore_index=True)
    write_report(binned, save_dir / "bins.csv", index=False)
    if manifest:
        labels = manifest_labels(manifest)
        if per_subject:
            labels = labels.drop_duplicates("subject_id")[["subject_id", "group_label"]]
            keys = ["subject_id"]
        else:
            keys = ["subject_id", "sample_id"]
        joined = binned.merge(labels, on=keys, how="left")
        table = bin_crosstab(joined["bin"], joined["group_label"].fillna("NA"))
        LOGGER.info(f"{PREFIX}bins by group\n{table.to_string()}")
        write_report(table, save_dir / "crosstab.csv")
    return binned


def run_dist(scores, manifest, bins=50, metric=None, save_dir=None):
    """Per-group score histograms for every (dataset, metric) slice, group labels joined from the manifest."""
    df = read_scores(scores).merge(manifest_labels(manifest), on=["subject_id", "sample_id"], how="left")
    out = []
    for (dataset, m), s in slices(df, metric):
        out.append(group_distribution(s, bins).assign(dataset=dataset, metric=m))
    out = pd.concat(out, ignore_index=True)[["dataset", "metric", "group", "bin", "left", "right", "count"]]
    write_report(out, save_dir / "dist.csv", index=False)
    return out


def run(command="variability", project=ROOT / "runs/analyze", name="exp", exist_ok=False, **kwargs):
    """Dispatches an analyze subcommand, saving its reports to project/name."""
    save_dir = increment_path(Path(project) / name, exist_ok=exist_ok, mkdir=True)
    fn = {"variability": run_variability, "cross": run_cross, "bin": run_bin, "dist": run_dist}[command]
    with Profile() as dt:
        result = fn(save_dir=save_dir, **kwargs)
    LOGGER.info(f"Done ({dt.t:.1f}s). Reports saved to {colorstr('bold', save_dir)}")
    return result


def parse_opt(args=None):
    """Parses analyze.py command-line arguments for the variability, cross, bin and dist subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--project", default=ROOT / "runs/analyze", help="save to project/name")
    common.add_argument("--name", default="exp", help="save to project/name")
    common.add_argument("--exist-ok", action="store_true", help="existing project/name ok, do not increment")

    parser = argparse.ArgumentParser()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("variability", parents=[common], help="mean intra-subject standard deviation per score slice")
    p.add_argument("--scores", nargs="+", required=True, help="scores CSV file(s)")
    p.add_argument("--no-normalize", dest="normalize", action="store_false", help="skip per-slice z-normalisation")

    p = sub.add_parser("cross", parents=[common], help="train x test x metric variability matrix")
    p.add_argument("--manifests", nargs="+", required=True, help="test dataset manifests (*.jsonl)")
    p.add_argument("--models", nargs="*", default=[], help="RSR/SREDS model files, matched by trained_on")
    p.add_argument("--metrics", nargs="+", choices=METRICS, default=list(METRICS), help="metrics to report")
    p.add_argument("--trains", nargs="+", default=None, help="training dataset names (default: test datasets)")
    p.add_argument("--no-normalize", dest="normalize", action="store_false", help="skip per-cell z-normalisation")
    p.add_argument("--ita-kernel", type=int, default=ITA_KERNEL, help="ITA smoothing filter size (odd)")
    p.add_argument("--nnmf-iters", type=int, default=500, help="NNMF iteration cap")
    p.add_argument("--nnmf-tol", type=float, default=1e-6, help="NNMF relative objective tolerance")
    p.add_argument("--seed", type=int, default=0, help="global seed")
    p.add_argument("--gray-world", action="store_true", help="gray-world normalise images before extraction")
    p.add_argument("--min-pixels", dest="min_patch_pixels", type=int, default=MIN_PATCH_PIXELS, help="min pixels")
    p.add_argument("--workers", type=int, default=NUM_THREADS, help="feature extraction threads")
    p.add_argument("--max-failures", type=int, default=100, help="per-cell failed-sample limit, -1 for no limit")

    p = sub.add_parser("bin", parents=[common], help="median or quantile binning of scores")
    p.add_argument("--scores", required=True, help="scores CSV file")
    p.add_argument("--strategy", choices=("median", "quantile"), default="median", help="binning strategy")
    p.add_argument("--k", type=int, default=2, help="number of quantile bins")
    p.add_argument("--metric", default=None, help="bin only this metric")
    p.add_argument("--per-subject", action="store_true", help="bin per-subject mean scores instead of samples")
    p.add_argument("--manifest", default=None, help="manifest with group labels for a bins x groups crosstab")

    p = sub.add_parser("dist", parents=[common], help="per-group score histograms")
    p.add_argument("--scores", required=True, help="scores CSV file")
    p.add_argument("--manifest", required=True, help="manifest with group labels")
    p.add_argument("--bins", type=int, default=50, help="histogram bin count")
    p.add_argument("--metric", default=None, help="histogram only this metric")

    opt = parser.parse_args(args)
    if opt.command == "bin" and opt.strategy == "quantile" and opt.k < 2:
        parser.error(f"--k must be >= 2, got {opt.k}")
    if opt.command == "cross":
        try:
            check_odd(opt.ita_kernel, "--ita-kernel")
        except ValueError as e:
            parser.error(str(e))
    print_args(vars(opt))
    return opt


def main(opt):
    """Runs analyze.py, returning a process exit status."""
    try:
        run(**vars(opt))
    except (SkinToneError, OSError) as e:
        LOGGER.error(f"{colorstr('red', 'analyze: ')}{e}")
        return 1
    return 0


if __name__ == "__main__":
    opt = parse_opt()
    sys.exit(main(opt))
