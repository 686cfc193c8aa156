"""NIfTI-1 volume reader/writer.

Arrays are exchanged in (z, y, x) order, with the b-value channel first for
4D data, and spacing is (dz, dy, dx) in mm. On disk NIfTI stores x fastest,
so both directions simply reverse the axes.
"""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import nibabel as nib
import numpy as np
from nibabel.filebasedimages import ImageFileError

from src.parsers import is_nifti
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)

SUPPORTED_DTYPES = (np.dtype(np.uint8), np.dtype(np.int16), np.dtype(np.float32), np.dtype(np.float64))


class NiftiParserError(PipelineDataError):
    """Exception raised when a NIfTI file cannot be read or written."""


@dataclass(frozen=True, eq=False)
class Volume:
    data: np.ndarray  # (z, y, x) or (b, z, y, x)
    spacing: tuple[float, float, float]  # (dz, dy, dx) mm


class NiftiParser:
    """Reads NIfTI-1 single-file volumes (``.nii`` / ``.nii.gz``)."""

    def parse(self, file_path: str | Path) -> Volume:
        """Load a 3D or 4D volume with scl_slope/scl_inter applied.

        Raises:
            FileNotFoundError: If the file does not exist
            NiftiParserError: Bad magic, unsupported datatype or truncated data
        """
        path = Path(file_path)
        if not path.exists():
            raise FileNotFoundError(f"NIfTI file not found: {path}")
        if not is_nifti(path):
            raise NiftiParserError(f"{path}: bad magic at offset 344, not a NIfTI-1 single file")
        try:
            img = nib.load(str(path))
        except (ImageFileError, OSError, EOFError, ValueError) as exc:
            raise NiftiParserError(f"{path}: {exc}") from exc
        if not isinstance(img, nib.Nifti1Image):
            raise NiftiParserError(f"{path}: expected NIfTI-1, got {type(img).__name__}")

        header = img.header
        dtype = header.get_data_dtype().newbyteorder("=")
        if dtype not in SUPPORTED_DTYPES:
            raise NiftiParserError(f"{path}: unsupported datatype {dtype} (header offset 70)")
        ndim = int(header["dim"][0])
        if ndim not in (3, 4):
            raise NiftiParserError(f"{path}: expected a 3D or 4D volume, dim[0]={ndim} (header offset 40)")
        offset = int(img.dataobj.offset)
        self._check_length(path, header, dtype, offset)

        try:
            data = np.asanyarray(img.dataobj)
        except (OSError, EOFError, ValueError) as exc:
            raise NiftiParserError(f"{path}: cannot read voxel data at offset {offset}: {exc}") from exc
        zooms = header.get_zooms()[:3]
        spacing = tuple(float(z) for z in zooms[::-1])
        return Volume(np.ascontiguousarray(data.T), spacing)

    @staticmethod
    def _check_length(path: Path, header, dtype: np.dtype, offset: int) -> None:
        # nibabel zeroes vox_offset on load; the proxy keeps the on-disk value
        if path.suffix == ".gz":
            return
        expected = offset + int(np.prod(header.get_data_shape())) * dtype.itemsize
        actual = path.stat().st_size
        if actual < expected:
            raise NiftiParserError(
                f"{path}: truncated data, voxel block starts at offset {offset} and needs "
                f"{expected - offset} bytes, file ends at {actual}"
            )


def read_volume(path: str | Path) -> Volume:
    return NiftiParser().parse(path)


def write_volume(path: str | Path, data: np.ndarray, spacing: tuple[float, float, float]) -> Path:
    """Write ``data`` unscaled in its own dtype; the file is replaced atomically."""
    path = Path(path)
    data = np.asarray(data)
    if data.dtype == np.bool_:
        data = data.astype(np.uint8)
    if data.dtype.newbyteorder("=") not in SUPPORTED_DTYPES:
        raise NiftiParserError(f"cannot write dtype {data.dtype}; use one of {[str(d) for d in SUPPORTED_DTYPES]}")
    if data.ndim not in (3, 4):
        raise NiftiParserError(f"only 3D or 4D volumes can be written, got {data.ndim}D")

    dz, dy, dx = (float(s) for s in spacing)
    img = nib.Nifti1Image(np.ascontiguousarray(data.T), affine=np.diag([dx, dy, dz, 1.0]))
    header = img.header
    header.set_data_dtype(data.dtype)
    header.set_zooms((dx, dy, dz) + ((1.0,) if data.ndim == 4 else ()))
    header.set_xyzt_units("mm")

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix="".join(path.suffixes) or ".nii")
    os.close(fd)
    try:
        nib.save(img, tmp)
        os.replace(tmp, path)
    except Exception:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug("wrote %s %s", path, data.shape)
    return path
