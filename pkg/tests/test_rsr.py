# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license

import json

import numpy as np
import pytest

from conftest import constant_patch
from models.rsr import RsrModel, face_mean_rgb, fit_rsr, load_rsr, save_rsr, score_rsr
from utils import DegenerateInputError, ModelFormatError, ModelVersionError
from utils.colorspace import srgb_to_linear

U = np.array([1.0, 2.0, 3.0]) / np.sqrt(14)
C = np.array([0.4, 0.3, 0.2])


def test_face_mean_rgb():
    np.testing.assert_allclose(face_mean_rgb([constant_patch((188, 188, 188))]), srgb_to_linear([188] * 3))
    a, b = constant_patch((100, 100, 100), n=10), constant_patch((200, 150, 120), n=30)
    flat = srgb_to_linear(np.concatenate([a.pixels, b.pixels])).mean(0)
    np.testing.assert_allclose(face_mean_rgb([a, b]), flat)
    with pytest.raises(DegenerateInputError):
        face_mean_rgb([])


def test_fit_rsr_collinear():
    faces = [C + t * U for t in (-1, 0, 1)]
    model = fit_rsr(faces, "line")
    assert abs(np.dot(model.direction, U)) > 1 - 1e-9
    np.testing.assert_allclose(model.mean_rgb, C, atol=1e-12)
    assert model.trained_on == "line"
    assert score_rsr(model, model.mean_rgb) == 0
    step = np.asarray(model.mean_rgb) + np.asarray(model.direction)
    assert score_rsr(model, step) == pytest.approx(model.sign * 1.0)


def test_fit_rsr_orientation_and_centering():
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 1, 50)
    faces = 0.1 + t[:, None] * np.array([0.6, 0.45, 0.35]) + rng.normal(0, 0.005, (50, 3))
    model = fit_rsr(faces)
    scores = np.array([score_rsr(model, f) for f in faces])
    assert abs(scores.mean()) < 1e-9
    assert np.corrcoef(scores, faces.sum(1))[0, 1] > 0.99
    assert model.direction[np.argmax(np.abs(model.direction))] > 0


def test_fit_rsr_two_faces():
    a, b = np.array([0.2, 0.2, 0.2]), np.array([0.5, 0.4, 0.3])
    model = fit_rsr([a, b])
    d = (b - a) / np.linalg.norm(b - a)
    assert abs(np.dot(model.direction, d)) > 1 - 1e-9
    assert score_rsr(model, b) > score_rsr(model, a)


def test_fit_rsr_errors():
    with pytest.raises(DegenerateInputError, match=">= 2 faces"):
        fit_rsr([C])
    with pytest.raises(DegenerateInputError, match="zero variance"):
        fit_rsr([C, C, C])


@pytest.mark.parametrize("scale", [1.0, 0.5, 1.7])
def test_fit_rsr_affine_equivariant(scale):
    rng = np.random.default_rng(3)
    faces = rng.uniform(0.05, 0.6, (40, 3))
    shift = np.array([0.1, -0.02, 0.05])
    a, b = fit_rsr(faces), fit_rsr(faces * scale + shift)
    np.testing.assert_allclose(b.mean_rgb, np.asarray(a.mean_rgb) * scale + shift, atol=1e-12)
    np.testing.assert_allclose(b.direction, a.direction, atol=1e-9)
    sa = [score_rsr(a, f) for f in faces]
    sb = [score_rsr(b, f * scale + shift) for f in faces]
    np.testing.assert_allclose(sb, np.multiply(sa, scale), atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_fit_rsr_matches_covariance_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 101))
    faces = rng.uniform(0, 1, (n, 3)) * rng.uniform(0.2, 1, 3)
    mean = faces.sum(0) / n
    cov = np.zeros((3, 3))
    for f in faces:
        cov += np.outer(f - mean, f - mean)
    vals, vecs = np.linalg.eig(cov / (n - 1))
    oracle = np.real(vecs[:, np.argmax(np.real(vals))])
    oracle /= np.linalg.norm(oracle)
    d = np.asarray(fit_rsr(faces).direction)
    assert abs(np.linalg.norm(d) - 1) < 1e-9
    np.testing.assert_allclose(d * np.sign(d @ oracle), oracle, atol=1e-8)


def test_rsr_model_validation():
    with pytest.raises(ModelFormatError):
        RsrModel((0, 0, 0), (1.0, 1.0, 0.0), 1, "x")
    with pytest.raises(ModelFormatError):
        RsrModel((0, 0, 0), (1.0, 0.0, 0.0), 0, "x")


def test_rsr_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    model = fit_rsr(rng.uniform(0, 1, (20, 3)), "rand", normalization_applied=True)
    f = save_rsr(model, tmp_path / "rsr.json")
    assert load_rsr(f) == model


def test_rsr_load_errors(tmp_path):
    f = save_rsr(fit_rsr([C - U, C + U], "x"), tmp_path / "rsr.json")
    doc = json.loads(f.read_text())
    doc["version"] = 99
    (tmp_path / "v99.json").write_text(json.dumps(doc))
    with pytest.raises(ModelVersionError, match="version 99"):
        load_rsr(tmp_path / "v99.json")
    (tmp_path / "cut.json").write_text(f.read_text()[:40])
    with pytest.raises(ModelFormatError, match="malformed"):
        load_rsr(tmp_path / "cut.json")
    doc["version"], doc["kind"] = 1, "sreds"
    (tmp_path / "kind.json").write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="expected a 'rsr' model"):
        load_rsr(tmp_path / "kind.json")
