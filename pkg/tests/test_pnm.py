import numpy as np
import pytest

from walkseg import pnm
from walkseg.errors import DataFormatError


def test_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    image = np.round(rng.uniform(0, 1, (5, 7, 3)) * 255) / 255
    path = tmp_path / "img.ppm"
    pnm.write_ppm(path, image)
    np.testing.assert_allclose(pnm.read_ppm(path), image, atol=1e-9)


def test_pgm_roundtrip(tmp_path):
    labels = np.random.default_rng(1).integers(0, 5, (6, 4))
    path = tmp_path / "map.pgm"
    pnm.write_pgm(path, labels)
    np.testing.assert_array_equal(pnm.read_pgm(path), labels)


def test_header_comments_are_skipped(tmp_path):
    path = tmp_path / "img.ppm"
    raster = bytes(range(12))
    path.write_bytes(b"P6\n# a comment\n2 2\n# another\n255\n" + raster)
    image = pnm.read_ppm(path)
    assert image.shape == (2, 2, 3)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "img.ppm"
    path.write_bytes(b"P3\n2 2\n255\n" + bytes(12))
    with pytest.raises(DataFormatError):
        pnm.read_ppm(path)


def test_truncated_raster_rejected(tmp_path):
    path = tmp_path / "img.ppm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
    with pytest.raises(DataFormatError):
        pnm.read_ppm(path)


def test_unsupported_maxval_rejected(tmp_path):
    path = tmp_path / "img.ppm"
    path.write_bytes(b"P6\n2 2\n65535\n" + bytes(24))
    with pytest.raises(DataFormatError):
        pnm.read_ppm(path)


def test_out_of_range_labels_rejected(tmp_path):
    with pytest.raises(DataFormatError):
        pnm.write_pgm(tmp_path / "bad.pgm", np.full((2, 2), 300))
