"""Unit tests for the NIfTI-1 reader/writer."""

import nibabel as nib
import numpy as np
import pytest

from src.parsers import is_nifti
from src.parsers.nifti_parser import NiftiParser, NiftiParserError, read_volume, write_volume


def _scaled_int16_file(path, stored: int = 10, slope: float = 2.0, inter: float = 1.0):
    """Hand-built single-file NIfTI with int16 storage and a scaling pair."""
    hdr = nib.Nifti1Header()
    hdr.set_data_shape((4, 3, 2))
    hdr.set_data_dtype(np.int16)
    hdr.set_zooms((1.0, 2.0, 3.0))
    hdr.set_slope_inter(slope, inter)
    hdr["vox_offset"] = 352
    data = np.full((4, 3, 2), stored, dtype=np.int16)
    with open(path, "wb") as f:
        hdr.write_to(f)
        f.write(b"\x00" * (352 - f.tell()))
        f.write(data.tobytes(order="F"))
    return path


class TestNiftiParser:
    """Test cases for NiftiParser class."""

    def test_parse_nonexistent_file(self):
        with pytest.raises(FileNotFoundError):
            NiftiParser().parse("/nonexistent/volume.nii")

    def test_float32_round_trip(self, tmp_path):
        data = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7
        path = write_volume(tmp_path / "v.nii", data, (2.5, 1.0, 0.5))
        volume = read_volume(path)
        assert volume.data.shape == (2, 3, 4)
        assert np.array_equal(volume.data, data)
        assert volume.spacing == (2.5, 1.0, 0.5)

    def test_four_dimensional_channel_first(self, tmp_path):
        data = np.random.default_rng(0).random((4, 2, 3, 5)).astype(np.float32)
        volume = read_volume(write_volume(tmp_path / "dwi.nii", data, (3.0, 2.0, 2.0)))
        assert volume.data.shape == (4, 2, 3, 5)
        assert np.array_equal(volume.data[2], data[2])

    def test_gzip_round_trip(self, tmp_path):
        data = np.ones((2, 2, 2), dtype=np.float64) * 3.25
        path = write_volume(tmp_path / "v.nii.gz", data, (1.0, 1.0, 1.0))
        assert is_nifti(path)
        assert np.array_equal(read_volume(path).data, data)

    def test_bool_mask_stored_as_uint8(self, tmp_path):
        mask = np.zeros((2, 3, 3), dtype=bool)
        mask[1, 1, 1] = True
        volume = read_volume(write_volume(tmp_path / "mask.nii", mask, (1.0, 1.0, 1.0)))
        assert volume.data.dtype == np.uint8
        assert np.array_equal(volume.data > 0, mask)

    def test_disk_order_is_x_fastest(self, tmp_path):
        data = np.zeros((2, 3, 4), dtype=np.float32)
        data[1, 2, 3] = 5.0
        path = write_volume(tmp_path / "v.nii", data, (1.0, 1.0, 1.0))
        assert np.asanyarray(nib.load(str(path)).dataobj)[3, 2, 1] == 5.0

    def test_slope_and_intercept_applied(self, tmp_path):
        volume = read_volume(_scaled_int16_file(tmp_path / "scaled.nii"))
        assert volume.data.shape == (2, 3, 4)
        np.testing.assert_allclose(volume.data, 21.0)
        assert volume.spacing == (3.0, 2.0, 1.0)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.nii"
        path.write_bytes(b"\x00" * 400)
        with pytest.raises(NiftiParserError, match="bad magic at offset 344"):
            read_volume(path)

    def test_truncated_data(self, tmp_path):
        path = write_volume(tmp_path / "v.nii", np.ones((4, 4, 4), dtype=np.float32), (1.0, 1.0, 1.0))
        path.write_bytes(path.read_bytes()[:-40])
        with pytest.raises(NiftiParserError, match="truncated data, voxel block starts at offset 352 and needs 256 bytes"):
            read_volume(path)

    def test_header_offset_survives_load(self, tmp_path):
        path = write_volume(tmp_path / "v.nii", np.ones((2, 2, 2), dtype=np.float32), (1.0, 1.0, 1.0))
        assert int(nib.load(str(path)).dataobj.offset) == 352
        assert path.stat().st_size == 352 + 8 * 4

    def test_unsupported_write_dtype(self, tmp_path):
        with pytest.raises(NiftiParserError, match="cannot write dtype"):
            write_volume(tmp_path / "v.nii", np.ones((2, 2, 2), dtype=np.int64), (1.0, 1.0, 1.0))

    def test_two_dimensional_write_rejected(self, tmp_path):
        with pytest.raises(NiftiParserError, match="3D or 4D"):
            write_volume(tmp_path / "v.nii", np.ones((2, 2), dtype=np.float32), (1.0, 1.0, 1.0))

    def test_failed_write_leaves_no_partial_file(self, tmp_path):
        with pytest.raises(NiftiParserError):
            write_volume(tmp_path / "v.nii", np.ones((2, 2, 2), dtype=np.complex64), (1.0, 1.0, 1.0))
        assert list(tmp_path.iterdir()) == []


def test_is_nifti_on_short_file(tmp_path):
    path = tmp_path / "short.nii"
    path.write_bytes(b"n+1\x00")
    assert not is_nifti(path)
