# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license

import numpy as np
import pytest

from conftest import constant_patch
from models.ita import face_ita, ita_map, patch_ita, region_ita, smooth_ita
from utils import DegenerateInputError
from utils.colorspace import lab_ita, srgb_to_lab
from utils.dataloaders import PixelPatch


def grid(h, w):
    ys, xs = np.mgrid[:h, :w]
    return np.stack((xs.ravel(), ys.ravel()), 1)


def test_ita_map_constant_patch():
    rgb = (200, 160, 130)
    L, _, b = srgb_to_lab(rgb)
    values = ita_map(constant_patch(rgb))
    assert np.allclose(values, lab_ita(L, b))
    assert np.ptp(values) == 0


def test_ita_map_gray_is_plus_90():
    assert (ita_map(constant_patch((200, 200, 200))) == 90).all()


def test_ita_map_is_pixelwise():
    patch = PixelPatch([[200, 160, 130], [90, 60, 40]], [[0, 0], [1, 0]])
    lab = srgb_to_lab(patch.pixels)
    np.testing.assert_array_equal(ita_map(patch), lab_ita(lab[:, 0], lab[:, 2]))


def test_smooth_ita_hand_box_filter():
    values = np.zeros(9)
    values[4] = 9.0  # centre of a 3x3 patch
    out = smooth_ita(values, grid(3, 3), kernel=3)
    assert out[4] == pytest.approx(1.0)
    assert out[0] == pytest.approx(9 / 4)  # corner window holds 4 members
    assert out[1] == pytest.approx(9 / 6)  # edge window holds 6 members


def test_smooth_ita_identity_and_fixed_point():
    rng = np.random.default_rng(0)
    values, coords = rng.uniform(-90, 90, 25), grid(5, 5)
    np.testing.assert_array_equal(smooth_ita(values, coords, kernel=1), values)
    np.testing.assert_allclose(smooth_ita(np.full(25, 33.0), coords, kernel=5), 33.0)


def test_smooth_ita_irregular_support():
    coords = np.array([[0, 0], [1, 0], [5, 5]])  # isolated pixel keeps its value
    out = smooth_ita(np.array([10.0, 20.0, 70.0]), coords, kernel=3)
    np.testing.assert_allclose(out, [15.0, 15.0, 70.0])


@pytest.mark.parametrize("kernel", [0, 2, 4, -1])
def test_smooth_ita_rejects_even_kernel(kernel):
    with pytest.raises(ValueError, match="odd"):
        smooth_ita(np.zeros(4), grid(2, 2), kernel=kernel)


def test_region_ita_modes():
    assert region_ita(np.full(10, 45.0)) == pytest.approx(45.0, abs=0.5)
    assert region_ita([10.2] * 5 + [20.4] * 3) == 10.5
    assert region_ita([10.2] * 4 + [20.4] * 4) == 10.5  # ties go to the lower bin
    assert region_ita([90.0, 90.0]) == 89.5
    with pytest.raises(DegenerateInputError):
        region_ita([])


def test_face_ita():
    assert face_ita([30, 40, 50]) == 40
    assert face_ita([45]) == 45
    assert face_ita([0, 90]) == 45
    assert face_ita([10.5, 20.5, 31.5]) == face_ita([31.5, 10.5, 20.5])
    with pytest.raises(DegenerateInputError):
        face_ita([])


def test_patch_ita_lighter_is_higher():
    assert patch_ita(constant_patch((230, 190, 170))) > patch_ita(constant_patch((120, 80, 60)))
