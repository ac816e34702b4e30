# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""End-to-end runs of the fit, score, analyze and synth scripts on small synthetic datasets."""

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from scipy.stats import spearmanr

import analyze
import fit
import score
import synth
from conftest import SMALL_SPEC
from models.scoring import FeatureOptions, dataset_features, fit_model, load_model, score_dataset
from models.sreds import project_sreds
from utils import MissingModelError, ModelFormatError, SkinToneError
from utils.general import ROOT, yaml_load, yaml_save
from utils.metrics import intra_subject_variability, read_scores, subject_scores
from utils.synthetic import SynthSpec, generate_dataset, melanin_from_subject

HEADER = "dataset,subject_id,sample_id,metric,score\n"


def melanin_rho(df):
    """Spearman correlation between per-subject mean scores and the rendered melanin."""
    s = subject_scores(df)
    return spearmanr(s["score"], [melanin_from_subject(x) for x in s["subject_id"]])[0]


def broken_manifest(manifest):
    """Copy of `manifest` next to it whose first image path points nowhere."""
    lines = manifest.read_text().splitlines()
    broken = lines[0].replace('"image_path": "images/', '"image_path": "missing/')
    out = manifest.parent / "broken.jsonl"
    out.write_text("\n".join([broken] + lines[1:]) + "\n")
    return out


@pytest.fixture(scope="module")
def neutral_sreds(synth_manifest, tmp_path_factory):
    """SREDS model fitted on the neutral synthetic dataset."""
    out = tmp_path_factory.mktemp("models") / "neutral_sreds.json"
    opt = fit.parse_opt(["--metric", "sreds", "--manifest", str(synth_manifest), "--model-out", str(out)])
    assert fit.main(opt) == 0
    return out


@pytest.fixture(scope="module")
def full_scale(tmp_path_factory):
    """Shipped neutral and warm synth configs rendered at full size, plus a SREDS model fitted on the neutral one."""
    root = tmp_path_factory.mktemp("full")
    synth.run(ROOT / "data" / "synth.yaml", root / "neutral", workers=4)
    synth.run(ROOT / "data" / "synth-warm.yaml", root / "warm", workers=4)
    neutral, warm = root / "neutral" / "neutral.jsonl", root / "warm" / "warm.jsonl"
    return neutral, warm, fit.run("sreds", neutral, root / "neutral_sreds.json", workers=4)[1]


def test_fit_ita_is_usage_error(synth_manifest):
    with pytest.raises(SystemExit) as e:
        fit.parse_opt(["--metric", "ita", "--manifest", str(synth_manifest)])
    assert e.value.code == 2


def test_fit_rsr_empty_manifest(tmp_path):
    (tmp_path / "empty.jsonl").write_text("\n")
    opt = fit.parse_opt(["--metric", "rsr", "--manifest", str(tmp_path / "empty.jsonl"), "--project", str(tmp_path)])
    assert fit.main(opt) == 1


def test_fit_sreds_round_trip(neutral_sreds):
    model = load_model(neutral_sreds, "sreds")
    assert model.trained_on == "neutral" and model.seed == 0
    assert len(model.anchors) == 8 * 2 * 3  # every region is an anchor
    again = load_model(neutral_sreds)
    f = np.array([0.3, 0.2, 0.15])
    assert project_sreds(model, f) == project_sreds(again, f)


def test_fit_rsr(synth_manifest, tmp_path):
    model, path = fit.run("rsr", synth_manifest, project=tmp_path, workers=2)
    assert path == tmp_path / "exp" / "neutral_rsr.json"
    assert model.trained_on == "neutral" and model.direction[np.argmax(np.abs(model.direction))] > 0


def test_score_requires_model(synth_manifest):
    with pytest.raises(SystemExit) as e:
        score.parse_opt(["--metric", "rsr", "--manifest", str(synth_manifest)])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        score.parse_opt(["--metric", "ita", "--manifest", str(synth_manifest), "--ita-kernel", "4"])


def test_score_missing_model_file(synth_manifest, tmp_path):
    args = ["--metric", "sreds", "--manifest", str(synth_manifest), "--model", str(tmp_path / "nope.json")]
    assert score.main(score.parse_opt(args + ["--project", str(tmp_path)])) == 1
    with pytest.raises(MissingModelError):
        score.run("sreds", synth_manifest, tmp_path / "nope.json", project=tmp_path)


def test_score_wrong_model_kind(synth_manifest, neutral_sreds, tmp_path):
    args = ["--metric", "rsr", "--manifest", str(synth_manifest), "--model", str(neutral_sreds)]
    assert score.main(score.parse_opt(args + ["--project", str(tmp_path)])) == 1


def test_score_rsr_gray_world_must_match(synth_manifest, tmp_path):
    model, path = fit.run("rsr", synth_manifest, tmp_path / "gw_rsr.json", gray_world=True, workers=2)
    assert model.normalization_applied and load_model(path).normalization_applied
    with pytest.raises(ModelFormatError, match="gray-world"):
        score.run("rsr", synth_manifest, path, out=tmp_path / "a.csv")
    out = str(tmp_path / "b.csv")
    args = ["--metric", "rsr", "--manifest", str(synth_manifest), "--model", str(path), "--out", out]
    assert score.main(score.parse_opt(args)) == 1
    assert score.main(score.parse_opt(args + ["--gray-world"])) == 0
    assert read_scores(out)["score"].notna().all()
    kwargs = dict(manifests=[synth_manifest], models=[path], metrics=["rsr"], workers=2)
    with pytest.raises(ModelFormatError, match="gray-world"):
        analyze.run("cross", tmp_path, **kwargs)
    report = analyze.run("cross", tmp_path, gray_world=True, **kwargs)
    assert len(report) == 1 and np.isfinite(report["variability"]).all()


def test_score_ita(synth_manifest, tmp_path):
    df = score.run("ita", synth_manifest, out=tmp_path / "ita.csv", workers=2)
    assert len(df) == 16 and df["score"].notna().all()
    back = read_scores(tmp_path / "ita.csv")
    assert back["metric"].unique().tolist() == ["ITA"]
    assert back["score"].between(-90, 90).all()
    side = yaml_load(tmp_path / "ita.yaml")
    assert side["dataset"] == "neutral" and side["trained_on"] is None and side["samples"] == 16


@pytest.mark.parametrize("metric", ["ita", "sreds"])
def test_score_independent_of_workers(metric, synth_manifest, neutral_sreds, tmp_path):
    model = neutral_sreds if metric == "sreds" else None
    a = score.run(metric, synth_manifest, model, out=tmp_path / "a.csv", workers=1)
    b = score.run(metric, synth_manifest, model, out=tmp_path / "b.csv", workers=4)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    pd.testing.assert_frame_equal(a, b)


def test_sreds_tracks_melanin(synth_manifest, neutral_sreds, tmp_path):
    df = score.run("sreds", synth_manifest, neutral_sreds, out=tmp_path / "sreds.csv", workers=2)
    assert df["score"].notna().all()
    assert melanin_rho(df) > 0.8


def test_sreds_tone_gradient_full_scale(full_scale, tmp_path):
    neutral, _, model = full_scale
    df = score.run("sreds", neutral, model, out=tmp_path / "neutral.csv", workers=4)
    assert len(df) == 40 * 5 and df["score"].notna().all()
    assert melanin_rho(df) > 0.95


def test_sreds_cross_dataset_full_scale(full_scale, tmp_path):
    _, warm, model = full_scale
    df = score.run("sreds", warm, model, out=tmp_path / "warm.csv", workers=4)
    assert df["dataset"].unique().tolist() == ["warm"] and df["score"].notna().all()
    assert melanin_rho(df) > 0.9


def test_sreds_less_variable_than_ita(tmp_path):
    base = SynthSpec.from_yaml(ROOT / "data" / "synth.yaml")
    opt = FeatureOptions(workers=4)
    wins = 0
    for seed in range(10):
        spec = replace(base, seed=seed, name=f"rep{seed}")
        data = generate_dataset(spec, tmp_path / spec.name, workers=4)
        records, features, _ = dataset_features("ita", data, opt)
        ita = intra_subject_variability(score_dataset("ita", None, spec.name, records, features)[0]).value
        records, features, _ = dataset_features("sreds", data, opt)
        model = fit_model("sreds", features, spec.name, opt)
        sreds = intra_subject_variability(score_dataset("sreds", model, spec.name, records, features)[0]).value
        wins += sreds < ita
    assert wins >= 8


def test_score_cross_dataset(warm_manifest, neutral_sreds, tmp_path):
    df = score.run("sreds", warm_manifest, neutral_sreds, out=tmp_path / "warm.csv", workers=2)
    assert len(df) == 16 and np.isfinite(df["score"]).all()
    assert df["dataset"].unique().tolist() == ["warm"]
    assert yaml_load(tmp_path / "warm.yaml")["trained_on"] == "neutral"


def test_score_max_failures(tmp_path, synth_manifest):
    manifest = broken_manifest(synth_manifest)
    df = score.run("ita", manifest, out=tmp_path / "ita.csv", workers=2, max_failures=1)
    assert df["score"].isna().sum() == 1 and "NA" in (tmp_path / "ita.csv").read_text()
    opt = score.parse_opt(["--manifest", str(manifest), "--out", str(tmp_path / "x.csv"), "--max-failures", "0"])
    assert score.main(opt) == 1


def test_analyze_variability(tmp_path):
    csv = tmp_path / "hand.csv"
    csv.write_text(HEADER + "d,A,0,SREDS,0\nd,A,1,SREDS,2\nd,B,0,SREDS,5\nd,B,1,SREDS,5\n")
    opt = analyze.parse_opt(["variability", "--scores", str(csv), "--no-normalize", "--project", str(tmp_path)])
    assert analyze.main(opt) == 0
    report = pd.read_csv(tmp_path / "exp" / "variability.csv")
    assert report.loc[0, "variability"] == pytest.approx(0.70711, abs=1e-5)
    assert "0.707106781" in (tmp_path / "exp" / "variability.csv").read_text()


def test_analyze_variability_schema_error(tmp_path):
    (tmp_path / "bad.csv").write_text("dataset,subject,sample,metric,score\n")
    opt = analyze.parse_opt(["variability", "--scores", str(tmp_path / "bad.csv"), "--project", str(tmp_path)])
    assert analyze.main(opt) == 1


def test_analyze_bin(tmp_path):
    csv = tmp_path / "four.csv"
    csv.write_text(HEADER + "d,A,0,SREDS,-1\nd,B,0,SREDS,-0.5\nd,C,0,SREDS,0.1\nd,D,0,SREDS,2\n")
    opt = analyze.parse_opt(["bin", "--scores", str(csv), "--strategy", "median", "--project", str(tmp_path)])
    assert analyze.main(opt) == 0
    bins = pd.read_csv(tmp_path / "exp" / "bins.csv", dtype=str)
    assert bins["bin"].tolist() == ["low", "low", "high", "high"]
    with pytest.raises(SystemExit):
        analyze.parse_opt(["bin", "--scores", str(csv), "--strategy", "quantile", "--k", "1"])


def test_analyze_bin_and_dist_with_groups(synth_manifest, neutral_sreds, tmp_path):
    scores = tmp_path / "sreds.csv"
    score.run("sreds", synth_manifest, neutral_sreds, out=scores, workers=2)
    binned = analyze.run("bin", tmp_path, scores=scores, per_subject=True, manifest=synth_manifest)
    assert len(binned) == 8 and set(binned["bin"]) == {"low", "high"}
    table = pd.read_csv(tmp_path / "exp" / "crosstab.csv", index_col=0)
    assert table.values.sum() == 8
    dist = analyze.run("dist", tmp_path, scores=scores, manifest=synth_manifest, bins=10)
    assert set(dist["group"]) == {"m_low", "m_high"}
    assert dist.groupby("group")["count"].sum().tolist() == [8, 8]


def test_analyze_cross_missing_model(synth_manifest, tmp_path):
    args = ["cross", "--manifests", str(synth_manifest), "--models", str(tmp_path / "nope.json"), "--metrics", "sreds"]
    assert analyze.main(analyze.parse_opt(args + ["--project", str(tmp_path)])) == 1
    with pytest.raises(MissingModelError, match=r"\(neutral -> neutral, sreds\)"):
        analyze.run("cross", tmp_path, manifests=[synth_manifest], models=[tmp_path / "nope.json"], metrics=["sreds"])


def test_analyze_cross_validates_ita_kernel(synth_manifest):
    with pytest.raises(SystemExit) as e:
        analyze.parse_opt(["cross", "--manifests", str(synth_manifest), "--metrics", "ita", "--ita-kernel", "4"])
    assert e.value.code == 2


def test_analyze_cross_max_failures(synth_manifest, tmp_path):
    manifest = broken_manifest(synth_manifest)
    report = analyze.run("cross", tmp_path, manifests=[manifest], metrics=["ita"], max_failures=1, workers=2)
    assert len(report) == 1 and np.isfinite(report["variability"]).all()
    with pytest.raises(SkinToneError, match=r"cell \(broken -> broken, ita\): 1 samples failed"):
        analyze.run("cross", tmp_path, manifests=[manifest], metrics=["ita"], max_failures=0)
    args = ["cross", "--manifests", str(manifest), "--metrics", "ita", "--project", str(tmp_path)]
    assert analyze.main(analyze.parse_opt(args + ["--max-failures", "0"])) == 1


def test_analyze_cross(synth_manifest, warm_manifest, neutral_sreds, tmp_path):
    warm_sreds = tmp_path / "warm_sreds.json"
    fit.run("sreds", warm_manifest, warm_sreds, workers=2)
    models = [neutral_sreds, warm_sreds]
    kwargs = dict(manifests=[synth_manifest, warm_manifest], models=models, metrics=["ita", "sreds"], workers=2)
    report = analyze.run("cross", tmp_path, **kwargs)
    assert len(report) == 2 * 2 * 2
    ita = report[report.metric == "ITA"]
    assert ita["variability"].isna().tolist() == [False, True, True, False]  # ITA only on the diagonal
    sreds = report[report.metric == "SREDS"]
    assert np.isfinite(sreds["variability"]).all() and (sreds["variability"] >= 0).all()
    table = pd.read_csv(tmp_path / "exp" / "cross.csv", index_col=0, keep_default_na=False)
    assert table.index.tolist() == ["neutral", "warm"]
    assert table.loc["neutral", "warm/ITA"] == "NA"
    again = analyze.run("cross", tmp_path, **kwargs)
    pd.testing.assert_frame_equal(report, again)


def test_synth_cli(tmp_path):
    opt = synth.parse_opt(["--out-dir", str(tmp_path / "tiny"), "--seed", "3"])
    assert synth.main(opt) == 0
    spec = yaml_load(tmp_path / "tiny" / "spec.yaml")
    assert spec["name"] == "tiny" and spec["seed"] == 3
    assert len((tmp_path / "tiny" / "tiny.jsonl").read_text().splitlines()) == 40 * 5


def test_synth_cli_rejects_reversed_range(tmp_path):
    (tmp_path / "bad.yaml").write_text("melanin_range: [1.0, 0.3]\n")
    assert synth.main(synth.parse_opt(["--spec", str(tmp_path / "bad.yaml"), "--out-dir", str(tmp_path / "x")])) == 1
    assert not (tmp_path / "x").exists()


def test_synth_cli_rejects_wrong_types(tmp_path):
    (tmp_path / "bad.yaml").write_text("melanin_range: 0.5\nshading_variation: abc\npatch_size: 65\n")
    assert synth.main(synth.parse_opt(["--spec", str(tmp_path / "bad.yaml"), "--out-dir", str(tmp_path / "x")])) == 1
    assert not (tmp_path / "x").exists()


def run_pipeline(root, spec_file, workers):
    """synth -> fit -> score -> analyze under `root`; returns {relative path: bytes} of the outputs."""
    manifest = root / "d" / "d.jsonl"
    synth.run(spec_file, root / "d", workers=workers)
    for metric in "rsr", "sreds":
        fit.run(metric, manifest, root / f"d_{metric}.json", workers=workers)
    scores = []
    for metric in "ita", "rsr", "sreds":
        model = None if metric == "ita" else root / f"d_{metric}.json"
        scores.append(root / f"d_{metric}.csv")
        score.run(metric, manifest, model, out=scores[-1], workers=workers)
    analyze.run("variability", root, name="variability", scores=scores)
    models = [root / "d_rsr.json", root / "d_sreds.json"]
    analyze.run("cross", root, name="cross", manifests=[manifest], models=models, workers=workers)
    analyze.run("bin", root, name="bin", scores=scores[-1], per_subject=True, manifest=manifest)
    sidecars = {s.with_suffix(".yaml") for s in scores}  # record absolute manifest and model paths
    files = sorted(p for p in root.rglob("*") if p.is_file() and p not in sidecars)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in files}


def test_pipeline_independent_of_workers(tmp_path):
    spec = {k: list(v) if isinstance(v, tuple) else v for k, v in SMALL_SPEC.items()}
    yaml_save(tmp_path / "small.yaml", spec)
    one = run_pipeline(tmp_path / "w1", tmp_path / "small.yaml", workers=1)
    eight = run_pipeline(tmp_path / "w8", tmp_path / "small.yaml", workers=8)
    assert {"d_ita.csv", "d_sreds.json", "cross/cross.csv", "variability/variability.csv", "bin/bins.csv"} <= set(one)
    assert one.keys() == eight.keys()
    for k in one:
        assert one[k] == eight[k], f"{k} differs between 1 and 8 workers"
