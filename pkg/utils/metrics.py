# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""Score tables and the analyses run on them: intra-subject variability, cross-dataset matrices, binning, group
distributions.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from utils import DegenerateInputError, ScoreSchemaError

SCORE_COLUMNS = ["dataset", "subject_id", "sample_id", "metric", "score"]
KEY_COLUMNS = SCORE_COLUMNS[:4]
METRIC_NAMES = {"ita": "ITA", "rsr": "RSR", "sreds": "SREDS"}
NA = "NA"


# Score tables ---------------------------------------------------------------------------------------------------------
def score_table(rows, attrs=None):
    """Builds a ScoreTable DataFrame from (dataset, subject_id, sample_id, metric, score) rows, checking key unicity."""
    df = pd.DataFrame(list(rows), columns=SCORE_COLUMNS)
    df["score"] = df["score"].astype(np.float64)
    check_unique(df)
    df.attrs.update(attrs or {})  # provenance: trained_on, seed, ...
    return df


def check_unique(df):
    """Raises ScoreSchemaError when a (dataset, subject_id, sample_id, metric) key appears more than once."""
    dup = df.duplicated(KEY_COLUMNS)
    if dup.any():
        raise ScoreSchemaError(f"duplicate score keys: {df.loc[dup, KEY_COLUMNS].head(3).values.tolist()}")


def write_scores(df, path):
    """Writes a ScoreTable as UTF-8 CSV with LF newlines, 9 significant digits and literal NA for missing scores."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df[SCORE_COLUMNS].to_csv(path, index=False, float_format="%.9g", na_rep=NA, lineterminator="\n", encoding="utf-8")
    return path


def read_scores(path):
    """Reads a scores CSV, validating the header and score column; identifiers stay strings."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ScoreSchemaError(f"{path}: unreadable scores CSV ({e})") from e
    if list(df.columns) != SCORE_COLUMNS:
        raise ScoreSchemaError(f"{path}: header {list(df.columns)} != {SCORE_COLUMNS}")
    scores = df["score"].replace(NA, np.nan)
    try:
        df["score"] = scores.astype(np.float64)
    except ValueError as e:
        raise ScoreSchemaError(f"{path}: non-numeric score ({e})") from e
    check_unique(df)
    return df


def subject_scores(df):
    """Per-subject mean score (NA rows dropped), one row per (dataset, metric, subject_id) in first-seen order."""
    df = df.dropna(subset=["score"])
    return df.groupby(["dataset", "metric", "subject_id"], sort=False, as_index=False)["score"].mean()


# Intra-subject variability --------------------------------------------------------------------------------------------
@dataclass(frozen=True)
class Variability:
    """Mean intra-subject standard deviation of one score slice."""

    value: float
    subjects: int  # subjects with >= 2 samples
    singletons: int  # subjects excluded for having one sample
    normalized: bool


def intra_subject_variability(df, normalize=True):
    """
    Mean over subjects of the sample (n - 1) standard deviation of each subject's scores.

    With `normalize`, scores are first z-normalised over the slice (mean 0, sd 1; constant slices map to 0), making the
    result invariant to positive affine rescaling. NA scores are ignored; subjects with a single sample are counted and
    excluded. Raises DegenerateInputError when no subject has >= 2 samples.
    """
    df = df.dropna(subset=["score"])
    s = df["score"].to_numpy(np.float64)
    if normalize and len(s):
        sd = s.std(ddof=1) if len(s) > 1 else 0.0
        s = (s - s.mean()) / sd if sd > 0 else np.zeros_like(s)
    g = pd.DataFrame({"subject_id": df["subject_id"].to_numpy(), "score": s}).groupby("subject_id", sort=True)["score"]
    stats = g.agg(["std", "count"])
    multi = stats[stats["count"] >= 2]
    if multi.empty:
        raise DegenerateInputError("no subject has >= 2 scored samples; intra-subject variability is undefined")
    return Variability(float(multi["std"].mean()), len(multi), int((stats["count"] < 2).sum()), bool(normalize))


def variability_matrix(cells, normalize=True):
    """
    Builds a VariabilityReport from `cells`, a mapping (train, test, metric) -> ScoreTable slice or None (not
    applicable). Rows keep the mapping's order; not-applicable cells carry NaN values.
    """
    rows = []
    for (train, test, metric), df in cells.items():
        if df is None:
            rows.append((train, test, metric, np.nan, 0, 0, bool(normalize)))
        else:
            v = intra_subject_variability(df, normalize)
            rows.append((train, test, metric, v.value, v.subjects, v.singletons, v.normalized))
    columns = ["train", "test", "metric", "variability", "subjects", "singletons", "normalized"]
    return pd.DataFrame(rows, columns=columns)


def report_table(report):
    """Pivots a VariabilityReport into the train-rows x (test, metric)-columns layout; NaN cells print as NA."""

    def order(c):
        return list(dict.fromkeys(report[c]))  # first-seen order

    table = report.pivot(index="train", columns=["test", "metric"], values="variability")
    columns = [(t, m) for t in order("test") for m in order("metric") if (t, m) in table.columns]
    table = table.reindex(index=order("train"), columns=pd.MultiIndex.from_tuples(columns))
    table.columns = [f"{t}/{METRIC_NAMES.get(m, m)}" for t, m in columns]
    table.index.name = "train"
    return table


def write_report(table, path, index=True):
    """Writes a report table (or a long VariabilityReport with index=False) as CSV, 9 significant digits, NA cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=index, float_format="%.9g", na_rep=NA, lineterminator="\n", encoding="utf-8")
    return path


# Binning --------------------------------------------------------------------------------------------------------------
def bin_scores(scores, strategy="median", k=2):
    """
    Labels scores by bin.

    median: threshold = median (mean of the middle two for even n); score < threshold -> 'low', otherwise 'high'.
    quantile: `k` equal-probability bins, left-closed, labelled 'q1'..'qk' (the maximum falls in 'qk').

    Returns:
        (labels, edges): numpy array of labels and the thresholds used.
    """
    s = np.asarray(scores, dtype=np.float64)
    if strategy == "median":
        if len(s) < 2:
            raise DegenerateInputError(f"median binning needs >= 2 scores, got {len(s)}")
        t = float(np.median(s))
        return np.where(s < t, "low", "high"), np.array([t])
    if strategy == "quantile":
        if k < 2:
            raise ValueError(f"quantile binning needs k >= 2, got {k}")
        if len(s) < k:
            raise DegenerateInputError(f"quantile({k}) binning needs >= {k} scores, got {len(s)}")
        edges = np.quantile(s, np.linspace(0, 1, k + 1))
        idx = np.searchsorted(edges[1:-1], s, side="right")
        return np.array([f"q{i + 1}" for i in idx]), edges
    raise ValueError(f"unknown binning strategy '{strategy}', expected 'median' or 'quantile'")


def bin_crosstab(labels, groups):
    """Contingency table of score bins (columns) against group labels (rows)."""
    return pd.crosstab(pd.Series(groups, name="group"), pd.Series(labels, name="bin"))


# Distributions --------------------------------------------------------------------------------------------------------
def group_distribution(df, bins=50):
    """
    Per-group histograms of `df.score` over shared edges spanning the observed range.

    `df` needs `group_label` and `score` columns; rows without a label or score are ignored. Returns a long DataFrame
    (group, bin, left, right, count), groups in sorted order.
    """
    df = df.dropna(subset=["score", "group_label"])
    df = df[df["group_label"].astype(str) != ""]
    if df.empty:
        raise DegenerateInputError("no labelled scores to build group distributions from")
    edges = np.histogram_bin_edges(df["score"].to_numpy(np.float64), bins=bins)
    rows = []
    for group, g in df.groupby("group_label", sort=True):
        counts, _ = np.histogram(g["score"].to_numpy(np.float64), bins=edges)
        rows += [(group, i, edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts)]
    return pd.DataFrame(rows, columns=["group", "bin", "left", "right", "count"])
