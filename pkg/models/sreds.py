# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Skin Reflectance Estimate based on Dichromatic Separation (SREDS).

Every skin patch is reduced to a DiffuseFeature (see utils/dichromatic.py). Kernel PCA with an RBF kernel over the
training features learns a skin-tone gradient; a patch scores by projecting its feature on the first kernel principal
component, and a face scores by averaging its region projections.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist, squareform

from models.common import check_fields, check_vector, load_json, save_json
from utils import DegenerateInputError, ModelFormatError
from utils.dichromatic import extract_diffuse
from utils.general import LOGGER, colorstr

SREDS_VERSION = 1
MAX_ANCHORS = 2000
MIN_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class SredsModel:
    """KPCA state needed to project unseen DiffuseFeatures onto the first component."""

    anchors: np.ndarray  # M x 3 training DiffuseFeatures
    gamma: float  # RBF bandwidth, k(x, y) = exp(-gamma * |x - y|^2)
    row_means: np.ndarray  # M, column means of the training kernel
    grand_mean: float  # mean of the training kernel
    alpha: np.ndarray  # M, first eigenvector / sqrt(eigenvalue)
    eigenvalue: float
    sign: int
    seed: int
    trained_on: str
    version: int = SREDS_VERSION

    def __post_init__(self):
        """Checks shapes and positivity constraints."""
        m = len(self.anchors)
        if m < 2 or np.shape(self.anchors) != (m, 3):
            raise ModelFormatError(f"SREDS anchors must be M x 3 with M >= 2, got shape {np.shape(self.anchors)}")
        if np.shape(self.row_means) != (m,) or np.shape(self.alpha) != (m,):
            raise ModelFormatError(
                f"SREDS row_means {np.shape(self.row_means)} / alpha {np.shape(self.alpha)} do not match {m} anchors"
            )
        if not (self.gamma > 0 and self.eigenvalue > 0 and np.isfinite(self.alpha).all()):
            raise ModelFormatError("SREDS model needs gamma > 0, eigenvalue > 0 and finite alpha")
        if self.sign not in (1, -1):
            raise ModelFormatError(f"SREDS sign must be +1 or -1, got {self.sign}")

    @property
    def anchor_scores(self):
        """Projections of the training anchors (zero mean by double-centring)."""
        return np.array([project_sreds(self, a) for a in self.anchors])


def median_gamma(anchors):
    """Median heuristic bandwidth 1 / (2 * median^2) over pairwise anchor distances (ignoring zero distances)."""
    d = pdist(anchors)
    d = d[d > 0]
    if not len(d):
        raise DegenerateInputError("all SREDS features are identical; kernel is degenerate")
    return 1 / (2 * np.median(d) ** 2)


def subsample(features, max_anchors=MAX_ANCHORS, seed=0):
    """Keeps at most `max_anchors` rows via a seeded shuffle; retained rows keep their original order."""
    n = len(features)
    if n <= max_anchors:
        return features
    keep = np.sort(np.random.default_rng(seed).permutation(n)[:max_anchors])
    return features[keep]


def fit_sreds(features, max_anchors=MAX_ANCHORS, gamma=None, seed=0, dataset_name=""):
    """
    Fits a SredsModel on DiffuseFeatures (n x 3), n >= 2.

    The RBF kernel over the (subsampled) anchors is double-centred and its leading eigenpair kept. The eigenvector is
    canonicalised so that its largest-magnitude entry is positive; `sign` then orients anchor scores to correlate
    positively with the anchors' luminance proxy (sum of feature entries).
    """
    X = np.asarray(features, dtype=np.float64).reshape(-1, 3)
    if len(X) < 2:
        raise DegenerateInputError(f"SREDS needs >= 2 features, got {len(X)}")
    X = subsample(X, max_anchors, seed)
    gamma = median_gamma(X) if gamma is None else float(gamma)
    if gamma <= 0:
        raise ValueError(f"--gamma must be > 0, got {gamma}")

    K = np.exp(-gamma * squareform(pdist(X, "sqeuclidean")))
    row_means = K.mean(0)
    grand_mean = K.mean()
    Kc = K - row_means[None, :] - row_means[:, None] + grand_mean
    vals, vecs = linalg.eigh(Kc)
    lam, v = vals[-1], vecs[:, -1]
    if lam <= MIN_EIGENVALUE:
        raise DegenerateInputError(f"degenerate SREDS kernel, leading eigenvalue {lam:.3g} <= {MIN_EIGENVALUE}")
    v = v if v[np.argmax(np.abs(v))] > 0 else -v
    alpha = v / np.sqrt(lam)

    scores = Kc @ alpha
    lum = X.sum(1)
    sign = -1 if scores @ (lum - lum.mean()) < 0 else 1
    model = SredsModel(X, gamma, row_means, float(grand_mean), alpha, float(lam), sign, int(seed), dataset_name)
    LOGGER.info(f"{colorstr('SREDS: ')}fitted on {len(X)} '{dataset_name}' anchors, gamma={gamma:.5g}, λ1={lam:.5g}")
    return model


def project_sreds(model, f):
    """Returns sign * <centred kernel vector k(f, anchors), alpha> using the stored centring statistics."""
    k = np.exp(-model.gamma * cdist(np.asarray(f, dtype=np.float64).reshape(1, 3), model.anchors, "sqeuclidean")[0])
    kc = k - k.mean() - model.row_means + model.grand_mean
    return float(model.sign * kc @ model.alpha)


def face_sreds(model, patches, seed=0, iters=500, tol=1e-6):
    """Averages project_sreds over the DiffuseFeatures of 1-3 PixelPatches."""
    features = [extract_diffuse(p, seed=seed, iters=iters, tol=tol) for p in patches]
    return mean_projection(model, features)


def mean_projection(model, features):
    """Averages project_sreds over per-region DiffuseFeatures."""
    if not len(features):
        raise DegenerateInputError("face SREDS needs at least one usable region")
    return math.fsum(project_sreds(model, f) for f in features) / len(features)


def save_sreds(model, path):
    """Writes a SredsModel as a versioned JSON document."""
    return save_json(
        path,
        {
            "kind": "sreds",
            "version": model.version,
            "trained_on": model.trained_on,
            "seed": model.seed,
            "gamma": model.gamma,
            "eigenvalue": model.eigenvalue,
            "sign": model.sign,
            "grand_mean": model.grand_mean,
            "row_means": model.row_means.tolist(),
            "alpha": model.alpha.tolist(),
            "anchors": model.anchors.tolist(),
        },
    )


def load_sreds(path):
    """Reads a SredsModel, raising ModelVersionError on version mismatch and ModelFormatError on inconsistencies."""
    d = load_json(path, kind="sreds", version=SREDS_VERSION)
    keys = "anchors", "gamma", "row_means", "grand_mean", "alpha", "eigenvalue", "sign", "seed", "trained_on"
    check_fields(d, keys, path)
    if not isinstance(d["anchors"], list) or not isinstance(d["row_means"], list):
        raise ModelFormatError(f"{path}: 'anchors' and 'row_means' must be lists")
    m = len(d["row_means"])
    if len(d["anchors"]) != m:
        raise ModelFormatError(f"{path}: {len(d['anchors'])} anchor rows but {m} row means")
    try:
        return SredsModel(
            anchors=np.array([check_vector(a, 3, "anchors", path) for a in d["anchors"]]).reshape(-1, 3),
            gamma=float(d["gamma"]),
            row_means=np.array(check_vector(d["row_means"], m, "row_means", path)),
            grand_mean=float(d["grand_mean"]),
            alpha=np.array(check_vector(d["alpha"], m, "alpha", path)),
            eigenvalue=float(d["eigenvalue"]),
            sign=int(d["sign"]),
            seed=int(d["seed"]),
            trained_on=str(d["trained_on"]),
            version=d["version"],
        )
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: {e}") from e
