# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Dichromatic separation of skin patches.

A patch in linear RGB is a 3 x N matrix V. Under the dichromatic reflection model every pixel is a non-negative mix of
a body (diffuse, pigment-coloured) reflection colour and an interface (specular, illuminant-coloured) reflection
colour, so V is factorised as V ~ W H with W 3 x 2 and H 2 x N, both non-negative.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from utils import DegenerateInputError
from utils.colorspace import srgb_to_linear

EPS = 1e-12  # multiplicative-update denominator guard
ILLUMINANT = np.ones(3) / np.sqrt(3)  # reference illuminant direction (near-white studio light)
ANGLE_TIE = 1e-6  # radians


@dataclass
class DichromaticDecomposition:
    """Rank-2 non-negative factorisation of a patch with its columns labelled diffuse / specular."""

    basis: np.ndarray  # W, 3 x 2, columns sum to 1
    activations: np.ndarray  # H, 2 x N
    diffuse_index: int = 1
    specular_index: int = 0
    recon_rel_error: float = 0.0
    history: List[float] = field(default_factory=list)  # objective ||V - WH||_F^2, start then each accepted update

    @property
    def diffuse_feature(self):
        """Mean diffuse radiance per pixel: the diffuse colour column scaled by its mean activation."""
        d = self.diffuse_index
        return self.basis[:, d] * self.activations[d].mean()


def _normalize(W, H):
    """Rescales W columns to unit L1 norm, compensating on the rows of H so that W @ H is unchanged."""
    s = W.sum(0)
    s = np.where(s > 0, s, 1.0)
    return W / s, H * s[:, None]


def _cone_start(V, W0):
    """
    Warm start (W, H) from the cone of pixel directions, or None when the pixels share a single direction.

    The pixels of a rank-2 patch lie in a plane through the origin, and W H reproduces them exactly whenever cone(W)
    in that plane contains every pixel. The near-achromatic start column W0[:, 0] is projected into the plane and kept
    when it is non-negative and falls outside the pixel cone; otherwise it is replaced by the nearer extreme pixel. The
    other column is the extreme pixel on the far side. H is the clipped in-plane solution.
    """
    if V.shape[1] < 2:
        return None
    U = np.linalg.svd(V, full_matrices=False)[0][:, :2]
    if U[:, 0].sum() < 0:
        U[:, 0] = -U[:, 0]  # Perron direction, non-negative plane coordinates
    P = U.T @ V
    cols = np.flatnonzero(P[0] > 0)
    if len(cols) == 0:
        return None
    theta = np.arctan2(P[1, cols], P[0, cols])
    lo, hi = cols[np.argmin(theta)], cols[np.argmax(theta)]
    q = U.T @ W0[:, 0]
    w, t = U @ q, np.arctan2(q[1], q[0])
    if q[0] > 0 and w.min() >= 0 and not theta.min() <= t <= theta.max():
        far = lo if t > theta.max() else hi
        W, spread = np.stack((w, V[:, far]), 1), abs(t - np.arctan2(P[1, far], P[0, far]))
    else:
        near, far = (hi, lo) if abs(t - theta.max()) <= abs(t - theta.min()) else (lo, hi)
        W, spread = V[:, [near, far]], theta.max() - theta.min()
    if spread <= ANGLE_TIE:
        return None
    W = W / W.sum(0)
    return W, np.linalg.solve(U.T @ W, P).clip(0)


def nnmf(V, iters=500, tol=1e-6, seed=0, min_pixels=1):
    """
    Factorises a non-negative 3 x N matrix as V ~ W H (rank 2) with Frobenius multiplicative updates.

    W starts from a near-achromatic column (1/3 plus seeded uniform noise in [0, 0.05]) and the patch's mean
    chromaticity; H starts from seeded uniform [0, 1] draws scaled by the mean pixel L1 magnitude. When the pixels span
    two directions the start is moved onto the pixel cone (see _cone_start), which makes exact rank-2 patches exact
    before the first update; the multiplicative updates then refine it. The start is homogeneous in V.

    Iteration stops after `iters` updates, when the relative objective decrease falls below `tol`, or when an update
    would raise the objective (round-off at convergence), in which case that update is discarded. W columns are
    rescaled to unit L1 after every update with the compensating scaling folded into H.

    Returns:
        (W, H, history): factors and the objective ||V - WH||_F^2 at the start and after every accepted update
        (monotone non-increasing).
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != 3:
        raise ValueError(f"V must be 3 x N, got shape {V.shape}")
    if not np.isfinite(V).all() or (V < 0).any():
        raise ValueError("V must be finite and non-negative")
    n = V.shape[1]
    if n < max(min_pixels, 1):
        raise DegenerateInputError(f"{n} pixels < minimum {min_pixels} for factorisation")
    total = V.sum()
    if total <= 0:
        raise DegenerateInputError("all-zero patch cannot be factorised")

    rng = np.random.default_rng(seed)
    W = np.empty((3, 2))
    W[:, 0] = 1 / 3 + rng.uniform(0, 0.05, 3)
    W[:, 1] = V.sum(1) / total  # mean chromaticity
    H = rng.uniform(0, 1, (2, n)) * (total / n)
    W, H = _normalize(*(_cone_start(V, W) or (W, H)))

    history = [float(np.sum((V - W @ H) ** 2))]
    for _ in range(iters):
        Hn = H * (W.T @ V) / (W.T @ W @ H + EPS)
        Wn = W * (V @ Hn.T) / (W @ (Hn @ Hn.T) + EPS)
        Wn, Hn = _normalize(Wn, Hn)
        obj = float(np.sum((V - Wn @ Hn) ** 2))
        prev = history[-1]
        if obj > prev:
            break
        W, H = Wn, Hn
        history.append(obj)
        if prev <= 0 or (prev - obj) / prev < tol:
            break
    return W, H, history


def classify_bases(W):
    """
    Labels the two columns of W as (diffuse_index, specular_index).

    The specular column is the one with the smaller angle to the illuminant direction (1, 1, 1)/sqrt(3); when both
    angles agree within 1e-6 rad, column 0 is specular.
    """
    W = np.asarray(W, dtype=np.float64)
    norms = np.linalg.norm(W, axis=0)
    if (norms == 0).any():
        raise DegenerateInputError(f"zero column in basis {W.T.tolist()}")
    angles = np.arccos(np.clip(ILLUMINANT @ W / norms, -1, 1))
    specular = 0 if abs(angles[0] - angles[1]) < ANGLE_TIE else int(np.argmin(angles))
    return 1 - specular, specular


def canonical_order(V):
    """Sorts the columns of a 3 x N matrix lexicographically by (R, G, B) so downstream sums ignore pixel order."""
    return V[:, np.lexsort(V[::-1])]


def decompose(V, iters=500, tol=1e-6, seed=0, min_pixels=1):
    """Runs nnmf on the canonically ordered columns of V and labels its bases; returns a DichromaticDecomposition."""
    V = canonical_order(np.asarray(V, dtype=np.float64))
    W, H, history = nnmf(V, iters=iters, tol=tol, seed=seed, min_pixels=min_pixels)
    d, s = classify_bases(W)
    norm = np.linalg.norm(V)
    err = np.linalg.norm(V - W @ H) / norm if norm > 0 else 0.0
    return DichromaticDecomposition(W, H, d, s, float(err), history)


def diffuse_feature(V, seed=0, iters=500, tol=1e-6, min_pixels=1):
    """Returns the 3-vector DiffuseFeature of a linear-RGB 3 x N matrix V."""
    return decompose(V, iters=iters, tol=tol, seed=seed, min_pixels=min_pixels).diffuse_feature


def extract_diffuse(patch, seed=0, iters=500, tol=1e-6, min_pixels=1):
    """Returns the DiffuseFeature of a PixelPatch: 8-bit sRGB pixels are linearised, factorised and labelled."""
    return diffuse_feature(srgb_to_linear(patch.pixels).T, seed=seed, iters=iters, tol=tol, min_pixels=min_pixels)
