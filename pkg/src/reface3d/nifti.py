"""NIfTI-1 volume reading/writing and canonical reorientation.

Implements the single-file (.nii / .nii.gz) flavour of the NIfTI-1 format:
348-byte header, optional gzip container, little- or big-endian files
auto-detected from the dim[0] field. Voxel data is decoded to float32 with
scl_slope/scl_inter applied, so downstream code always sees real-valued
intensities in a plain array indexed [x, y, z] (x fastest on disk).
"""

from __future__ import annotations

import gzip
import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateAffine,
    IoError,
    ObliqueAffineWarning,
    ParseError,
    TruncatedFile,
    UnsupportedDatatype,
)

HEADER_SIZE = 348
VOX_OFFSET = 352  # header + 4 pad bytes, standard for single-file .nii
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# datatype code -> numpy dtype character (endianness prefixed at use site)
DTYPE_CODES = {
    2: "u1",    # uint8
    4: "i2",    # int16
    8: "i4",    # int32
    16: "f4",   # float32
    64: "f8",   # float64
}
BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}

# (name, offset, struct format) for every field we read or patch.
# Offsets per the NIfTI-1 standard; the full header is exactly 348 bytes.
_FIELDS = {
    "sizeof_hdr": (0, "i"),
    "dim": (40, "8h"),
    "datatype": (70, "h"),
    "bitpix": (72, "h"),
    "pixdim": (76, "8f"),
    "vox_offset": (108, "f"),
    "scl_slope": (112, "f"),
    "scl_inter": (116, "f"),
    "qform_code": (252, "h"),
    "sform_code": (254, "h"),
    "quatern_b": (256, "f"),
    "quatern_c": (260, "f"),
    "quatern_d": (264, "f"),
    "qoffset_x": (268, "f"),
    "qoffset_y": (272, "f"),
    "qoffset_z": (276, "f"),
    "srow_x": (280, "4f"),
    "srow_y": (296, "4f"),
    "srow_z": (312, "4f"),
    "magic": (344, "4s"),
}

# world axes are RAS+: x -> Right, y -> Anterior, z -> Superior
_AXIS_LETTERS = (("R", "L"), ("A", "P"), ("S", "I"))

# target orientation: axis0 -> +y (A), axis1 -> +z (S), axis2 -> -x (L)
_ASL_ORNT = ((1, 1), (2, 1), (0, -1))


@dataclass(frozen=True)
class NiftiImage:
    """A 3D volume plus the header facts needed to write it back.

    `data` is float32 with shape `dims`, indexed [x, y, z]; `affine` maps
    homogeneous voxel indices to world mm (RAS+). Instances are immutable,
    safe to share between threads.
    """

    dims: tuple[int, int, int]
    voxel_size: tuple[float, float, float]
    affine: np.ndarray
    datatype_code: int
    data: np.ndarray
    scl_slope: float = 1.0
    scl_inter: float = 0.0
    raw_header: bytes | None = None

    @property
    def orientation(self) -> str:
        """Three-letter nearest-axis code (e.g. 'RAS', 'ASL')."""
        return orientation_code(self.affine)

    def with_data(self, data: np.ndarray) -> "NiftiImage":
        """Same geometry/header, new voxel grid of identical shape."""
        data = np.asarray(data, dtype=np.float32)
        if data.shape != tuple(self.dims):
            raise ValueError(f"shape {data.shape} != dims {self.dims}")
        return replace(self, data=data)


def _unpack(header: bytes, name: str, endian: str):
    off, fmt = _FIELDS[name]
    vals = struct.unpack_from(endian + fmt, header, off)
    return vals[0] if len(vals) == 1 else vals


def _detect_endianness(header: bytes) -> str:
    for endian in ("<", ">"):
        dim0 = struct.unpack_from(endian + "h", header, 40)[0]
        if 1 <= dim0 <= 7:
            return endian
    raise ParseError("cannot determine byte order: dim[0] not in [1, 7] either way")


def _quaternion_affine(hdr: bytes, endian: str) -> np.ndarray:
    b = _unpack(hdr, "quatern_b", endian)
    c = _unpack(hdr, "quatern_c", endian)
    d = _unpack(hdr, "quatern_d", endian)
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    pixdim = _unpack(hdr, "pixdim", endian)
    qfac = -1.0 if pixdim[0] == -1.0 else 1.0
    scales = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac])
    aff = np.eye(4)
    aff[:3, :3] = rot * scales
    aff[:3, 3] = [
        _unpack(hdr, "qoffset_x", endian),
        _unpack(hdr, "qoffset_y", endian),
        _unpack(hdr, "qoffset_z", endian),
    ]
    return aff


def _header_affine(hdr: bytes, endian: str) -> np.ndarray:
    # qform preferred when coded, then sform, then plain pixdim scaling
    if _unpack(hdr, "qform_code", endian) > 0:
        return _quaternion_affine(hdr, endian)
    if _unpack(hdr, "sform_code", endian) > 0:
        aff = np.eye(4)
        aff[0] = _unpack(hdr, "srow_x", endian)
        aff[1] = _unpack(hdr, "srow_y", endian)
        aff[2] = _unpack(hdr, "srow_z", endian)
        return aff
    pixdim = _unpack(hdr, "pixdim", endian)
    return np.diag([pixdim[1], pixdim[2], pixdim[3], 1.0])


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_nifti(path) -> NiftiImage:
    """Read a .nii or .nii.gz file into a NiftiImage.

    Raises ParseError for malformed headers, UnsupportedDatatype for
    datatype codes outside {uint8, int16, int32, float32, float64} and
    TruncatedFile when the data section is shorter than dims require.
    """
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    with _open_maybe_gzip(path) as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    hdr = raw[:HEADER_SIZE]

    endian = _detect_endianness(hdr)
    if _unpack(hdr, "sizeof_hdr", endian) != HEADER_SIZE:
        raise ParseError(f"{path}: sizeof_hdr != {HEADER_SIZE}")
    magic = _unpack(hdr, "magic", endian)
    if magic not in (MAGIC_SINGLE, MAGIC_PAIR):
        raise ParseError(f"{path}: bad magic {magic!r}")

    dim = _unpack(hdr, "dim", endian)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise ParseError(f"{path}: dim[0]={ndim} outside [1, 7]")
    if any(d > 1 for d in dim[4 : 1 + ndim]):
        raise ParseError(f"{path}: only 3-D volumes are supported, got dim={dim[: ndim + 1]}")
    dims = tuple(int(dim[1 + i]) if i < ndim else 1 for i in range(3))
    if any(d < 1 for d in dims):
        raise ParseError(f"{path}: non-positive dimension in {dims}")

    datatype = _unpack(hdr, "datatype", endian)
    if datatype not in DTYPE_CODES:
        raise UnsupportedDatatype(f"{path}: datatype code {datatype}")
    dtype = np.dtype(endian + DTYPE_CODES[datatype])

    vox_offset = int(_unpack(hdr, "vox_offset", endian))
    if magic == MAGIC_PAIR:  # header-only .hdr has data at 0 in the .img; not split here
        vox_offset = max(vox_offset, HEADER_SIZE)
    nvox = dims[0] * dims[1] * dims[2]
    nbytes = nvox * dtype.itemsize
    if len(raw) < vox_offset + nbytes:
        raise TruncatedFile(
            f"{path}: need {vox_offset + nbytes} bytes for {dims} {dtype.name}, have {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype=dtype, count=nvox, offset=vox_offset)
    data = flat.reshape(dims, order="F").astype(np.float32)

    slope = float(_unpack(hdr, "scl_slope", endian))
    inter = float(_unpack(hdr, "scl_inter", endian))
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        data = data * np.float32(slope) + np.float32(inter)

    affine = _header_affine(hdr, endian)
    if abs(np.linalg.det(affine[:3, :3])) <= 1e-12:
        raise DegenerateAffine(f"{path}: singular voxel-to-world affine")
    pixdim = _unpack(hdr, "pixdim", endian)
    voxel_size = tuple(float(abs(p)) for p in pixdim[1:4])

    return NiftiImage(
        dims=dims,
        voxel_size=voxel_size,
        affine=affine,
        datatype_code=int(datatype),
        data=data,
        scl_slope=slope,
        scl_inter=inter,
        raw_header=hdr if endian == "<" else None,
    )


def _pack_into(buf: bytearray, name: str, *values) -> None:
    off, fmt = _FIELDS[name]
    struct.pack_into("<" + fmt, buf, off, *values)


def _build_header(img: NiftiImage) -> bytes:
    buf = bytearray(img.raw_header) if img.raw_header is not None else bytearray(HEADER_SIZE)
    _pack_into(buf, "sizeof_hdr", HEADER_SIZE)
    _pack_into(buf, "dim", 3, *img.dims, 1, 1, 1, 1)
    _pack_into(buf, "datatype", img.datatype_code)
    _pack_into(buf, "bitpix", BITPIX[img.datatype_code])
    _pack_into(buf, "pixdim", 1.0, *img.voxel_size, 0.0, 0.0, 0.0, 0.0)
    _pack_into(buf, "vox_offset", float(VOX_OFFSET))
    _pack_into(buf, "scl_slope", img.scl_slope)
    _pack_into(buf, "scl_inter", img.scl_inter)
    # the affine goes out through the sform; any stale qform is disabled
    _pack_into(buf, "qform_code", 0)
    _pack_into(buf, "sform_code", 2)
    for name in ("quatern_b", "quatern_c", "quatern_d", "qoffset_x", "qoffset_y", "qoffset_z"):
        _pack_into(buf, name, 0.0)
    aff = np.asarray(img.affine, dtype=np.float64)
    _pack_into(buf, "srow_x", *aff[0])
    _pack_into(buf, "srow_y", *aff[1])
    _pack_into(buf, "srow_z", *aff[2])
    _pack_into(buf, "magic", MAGIC_SINGLE)
    return bytes(buf)


def write_nifti(img: NiftiImage, path) -> None:
    """Write a NiftiImage as little-endian .nii (or .nii.gz by extension).

    Intensity scaling is inverted before encoding, so a subsequent
    read_nifti reproduces the in-memory voxel values (exactly for integer
    datatypes; float payloads pass through bit-for-bit).
    """
    path = Path(path)
    data = np.asfortranarray(img.data, dtype=np.float32)
    slope, inter = img.scl_slope, img.scl_inter
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        raw = (data - np.float32(inter)) / np.float32(slope)
    else:
        raw = data
    dtype = np.dtype("<" + DTYPE_CODES[img.datatype_code])
    if dtype.kind in "ui":
        raw = np.rint(raw)
    payload = raw.astype(dtype).tobytes(order="F")

    blob = _build_header(img) + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + payload
    try:
        if path.suffix == ".gz":
            # fileobj + pinned mtime: no filename/timestamp in the gzip header,
            # so identical volumes produce identical bytes
            with open(path, "wb") as raw_fh:
                with gzip.GzipFile(fileobj=raw_fh, mode="wb", mtime=0, filename="") as fh:
                    fh.write(blob)
        else:
            path.write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def io_orientation(affine: np.ndarray) -> list[tuple[int, int]]:
    """Nearest world axis and sign for each voxel axis.

    Greedy assignment over the absolute direction cosines guarantees a
    bijection even for slightly oblique affines.
    """
    rot = np.asarray(affine, dtype=np.float64)[:3, :3]
    if abs(np.linalg.det(rot)) <= 1e-12:
        raise DegenerateAffine("singular affine")
    cos = rot / np.linalg.norm(rot, axis=0, keepdims=True)
    off_axis = np.sort(np.abs(cos), axis=0)[1].max()
    if off_axis > 0.2:
        warnings.warn(
            f"affine is notably oblique (off-axis cosine {off_axis:.3f}); "
            "reorientation permutes/flips voxels without resampling",
            ObliqueAffineWarning,
            stacklevel=2,
        )
    ornt: list[tuple[int, int] | None] = [None, None, None]
    order = np.argsort(np.abs(cos).ravel())[::-1]
    used_vox, used_world = set(), set()
    for flat in order:
        world, vox = divmod(int(flat), 3)
        if vox in used_vox or world in used_world:
            continue
        ornt[vox] = (world, 1 if cos[world, vox] >= 0 else -1)
        used_vox.add(vox)
        used_world.add(world)
        if len(used_vox) == 3:
            break
    return ornt  # type: ignore[return-value]


def orientation_code(affine: np.ndarray) -> str:
    return "".join(
        _AXIS_LETTERS[world][0 if sign > 0 else 1] for world, sign in io_orientation(affine)
    )


def reorient_asl(img: NiftiImage) -> NiftiImage:
    """Permute/flip voxel axes so the orientation code becomes 'ASL'.

    World coordinates of every voxel are preserved: the affine absorbs the
    inverse of the index transform. Voxel values are only rearranged, never
    interpolated.
    """
    current = io_orientation(img.affine)
    perm, flips = [], []
    for want_world, want_sign in _ASL_ORNT:
        j = next(i for i, (w, _) in enumerate(current) if w == want_world)
        perm.append(j)
        flips.append(current[j][1] != want_sign)
    if perm == [0, 1, 2] and not any(flips):
        return img

    data = np.transpose(img.data, perm)
    mapping = np.zeros((4, 4))
    mapping[3, 3] = 1.0
    for new_ax, old_ax in enumerate(perm):
        if flips[new_ax]:
            data = np.flip(data, axis=new_ax)
            mapping[old_ax, new_ax] = -1.0
            mapping[old_ax, 3] = img.dims[old_ax] - 1
        else:
            mapping[old_ax, new_ax] = 1.0
    new_affine = img.affine @ mapping

    return NiftiImage(
        dims=tuple(int(img.dims[p]) for p in perm),
        voxel_size=tuple(float(img.voxel_size[p]) for p in perm),
        affine=new_affine,
        datatype_code=img.datatype_code,
        data=np.ascontiguousarray(data),
        scl_slope=img.scl_slope,
        scl_inter=img.scl_inter,
        raw_header=img.raw_header,
    )


def make_image(
    data: np.ndarray,
    affine: np.ndarray | None = None,
    voxel_size: tuple[float, float, float] = (1.0, 1.0, 1.0),
    datatype_code: int = 16,
) -> NiftiImage:
    """Convenience constructor for volumes created in code."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 3:
        raise ValueError("expected a 3-D array")
    if affine is None:
        affine = np.diag([voxel_size[0], voxel_size[1], voxel_size[2], 1.0])
    else:
        affine = np.asarray(affine, dtype=np.float64)
        voxel_size = tuple(float(n) for n in np.linalg.norm(affine[:3, :3], axis=0))
    return NiftiImage(
        dims=tuple(int(d) for d in data.shape),
        voxel_size=voxel_size,
        affine=affine,
        datatype_code=datatype_code,
        data=data,
    )
