import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import nifti_fixture_bytes, nifti_qform_bytes
from reface3d.errors import (
    DegenerateAffine,
    IoError,
    ObliqueAffineWarning,
    ParseError,
    TruncatedFile,
    UnsupportedDatatype,
)
from reface3d.nifti import make_image, orientation_code, read_nifti, reorient_asl, write_nifti

DTYPE_RANGES = {2: (0, 255), 4: (-30000, 30000), 8: (-100000, 100000)}


def write_fixture(tmp_path, name, blob):
    path = tmp_path / name
    path.write_bytes(blob)
    return path


class TestRead:
    def test_uint8_values_and_indexing(self, tmp_path):
        data = np.arange(64, dtype=np.uint8).reshape((4, 4, 4), order="F")
        path = write_fixture(tmp_path, "a.nii", nifti_fixture_bytes(data, 2))
        img = read_nifti(path)
        assert img.dims == (4, 4, 4)
        assert img.data.size == 64
        # x-fastest layout: linear index 1 + 4*2 + 16*3 = 57
        assert img.data[1, 2, 3] == 57
        assert img.datatype_code == 2

    def test_slope_inter_applied(self, tmp_path):
        data = np.full((2, 2, 2), 5, dtype=np.int16)
        path = write_fixture(tmp_path, "b.nii", nifti_fixture_bytes(data, 4, slope=2.0, inter=10.0))
        img = read_nifti(path)
        assert np.all(img.data == 20.0)

    def test_bad_sizeof_hdr(self, tmp_path):
        data = np.zeros((2, 2, 2), dtype=np.uint8)
        path = write_fixture(tmp_path, "c.nii", nifti_fixture_bytes(data, 2, sizeof_hdr=347))
        with pytest.raises(ParseError):
            read_nifti(path)

    def test_bad_magic(self, tmp_path):
        data = np.zeros((2, 2, 2), dtype=np.uint8)
        path = write_fixture(tmp_path, "d.nii", nifti_fixture_bytes(data, 2, magic=b"xxx\x00"))
        with pytest.raises(ParseError):
            read_nifti(path)

    def test_unsupported_datatype(self, tmp_path):
        data = np.zeros((2, 2, 2), dtype=np.uint8)
        blob = bytearray(nifti_fixture_bytes(data, 2))
        struct.pack_into("<h", blob, 70, 128)  # RGB24
        path = write_fixture(tmp_path, "e.nii", bytes(blob))
        with pytest.raises(UnsupportedDatatype):
            read_nifti(path)

    def test_truncated_payload(self, tmp_path):
        data = np.zeros((4, 4, 4), dtype=np.uint8)
        blob = nifti_fixture_bytes(data, 2)
        path = write_fixture(tmp_path, "f.nii", blob[:-10])
        with pytest.raises(TruncatedFile):
            read_nifti(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_nifti(tmp_path / "missing.nii")

    def test_big_endian_detected(self, tmp_path):
        data = np.arange(8, dtype=np.int16).reshape((2, 2, 2), order="F")
        path = write_fixture(tmp_path, "be.nii", nifti_fixture_bytes(data, 4, endian=">"))
        img = read_nifti(path)
        assert np.array_equal(img.data.ravel(order="F"), np.arange(8))

    def test_gzip_transparent(self, tmp_path):
        data = np.arange(27, dtype=np.uint8).reshape((3, 3, 3), order="F")
        blob = gzip.compress(nifti_fixture_bytes(data, 2))
        path = write_fixture(tmp_path, "g.nii.gz", blob)
        img = read_nifti(path)
        assert np.array_equal(img.data, data)

    def test_qform_preferred_and_decoded(self, tmp_path):
        data = np.zeros((3, 3, 3), dtype=np.float32)
        # identity rotation, pure translation
        blob = nifti_qform_bytes(data, quaternion=(0.0, 0.0, 0.0), offset=(10.0, -4.0, 2.5))
        path = write_fixture(tmp_path, "q.nii", blob)
        img = read_nifti(path)
        expected = np.eye(4)
        expected[:3, 3] = (10.0, -4.0, 2.5)
        assert np.allclose(img.affine, expected, atol=1e-6)

    def test_qform_qfac_flips_z(self, tmp_path):
        data = np.zeros((3, 3, 3), dtype=np.float32)
        blob = nifti_qform_bytes(data, quaternion=(0, 0, 0), offset=(0, 0, 0), qfac=-1.0)
        img = read_nifti(write_fixture(tmp_path, "qf.nii", blob))
        assert img.affine[2, 2] == -1.0


class TestWrite:
    def test_roundtrip_bytes_identical(self, tmp_path):
        data = np.arange(64, dtype=np.uint8).reshape((4, 4, 4), order="F")
        path = write_fixture(tmp_path, "rt.nii", nifti_fixture_bytes(data, 2))
        img = read_nifti(path)
        out = tmp_path / "rt_out.nii"
        write_nifti(img, out)
        # data section must be byte-identical
        assert out.read_bytes()[352:] == path.read_bytes()[352:]

    def test_float32_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        img = make_image(rng.normal(size=(5, 6, 7)).astype(np.float32))
        out = tmp_path / "f.nii"
        write_nifti(img, out)
        back = read_nifti(out)
        assert np.array_equal(back.data, img.data)

    def test_file_size_256_cubed_float32(self, tmp_path):
        img = make_image(np.zeros((256, 256, 256), dtype=np.float32))
        out = tmp_path / "big.nii"
        write_nifti(img, out)
        assert out.stat().st_size == 352 + 256**3 * 4

    def test_gzip_write_deterministic(self, tmp_path):
        img = make_image(np.ones((4, 4, 4), dtype=np.float32))
        a, b = tmp_path / "a.nii.gz", tmp_path / "b.nii.gz"
        write_nifti(img, a)
        write_nifti(img, b)
        assert a.read_bytes() == b.read_bytes()
        assert np.array_equal(read_nifti(a).data, img.data)

    def test_unwritable_path(self, tmp_path):
        img = make_image(np.ones((2, 2, 2), dtype=np.float32))
        with pytest.raises(IoError):
            write_nifti(img, tmp_path / "no" / "such" / "dir.nii")

    @settings(max_examples=40, deadline=None)
    @given(
        dims=st.tuples(*[st.integers(1, 6)] * 3),
        dtype_code=st.sampled_from([2, 4, 8, 16, 64]),
        seed=st.integers(0, 2**31),
    )
    def test_roundtrip_property(self, tmp_path_factory, dims, dtype_code, seed):
        rng = np.random.default_rng(seed)
        if dtype_code in DTYPE_RANGES:
            lo, hi = DTYPE_RANGES[dtype_code]
            data = rng.integers(lo, hi, size=dims).astype(np.float32)
        else:
            data = rng.normal(size=dims).astype(np.float32)
        img = make_image(data, datatype_code=dtype_code)
        path = tmp_path_factory.mktemp("rt") / "x.nii"
        write_nifti(img, path)
        back = read_nifti(path)
        assert back.dims == img.dims
        assert back.datatype_code == img.datatype_code
        assert np.allclose(back.affine, img.affine, atol=1e-6)
        assert np.array_equal(back.data, img.data)


def permuted_affine(perm, signs, dims):
    """Axis-aligned affine sending voxel axes to the given world axes/signs."""
    aff = np.zeros((4, 4))
    aff[3, 3] = 1.0
    for vox, (world, sign) in enumerate(zip(perm, signs)):
        aff[world, vox] = sign
        if sign < 0:
            aff[world, 3] = dims[vox] - 1
    return aff


class TestReorient:
    def test_already_asl_is_identity(self):
        dims = (4, 5, 6)
        aff = permuted_affine((1, 2, 0), (1, 1, -1), dims)
        img = make_image(np.random.default_rng(0).normal(size=dims).astype(np.float32), affine=aff)
        assert img.orientation == "ASL"
        out = reorient_asl(img)
        assert out.orientation == "ASL"
        assert np.array_equal(out.data, img.data)

    def test_idempotent(self):
        img = make_image(np.random.default_rng(1).normal(size=(4, 5, 6)).astype(np.float32))
        once = reorient_asl(img)
        twice = reorient_asl(once)
        assert np.array_equal(once.data, twice.data)
        assert np.allclose(once.affine, twice.affine)

    @settings(max_examples=25, deadline=None)
    @given(
        perm=st.permutations([0, 1, 2]),
        signs=st.tuples(*[st.sampled_from([-1, 1])] * 3),
        seed=st.integers(0, 2**31),
    )
    def test_world_consistency_and_multiset(self, perm, signs, seed):
        dims = (4, 5, 6)
        aff = permuted_affine(perm, signs, dims)
        rng = np.random.default_rng(seed)
        # unique values make world-position lookup unambiguous
        data = rng.permutation(np.arange(np.prod(dims), dtype=np.float32)).reshape(dims)
        img = make_image(data, affine=aff)
        out = reorient_asl(img)
        assert out.orientation == "ASL"
        assert np.array_equal(np.sort(out.data.ravel()), np.sort(data.ravel()))
        for _ in range(10):
            idx = tuple(rng.integers(0, d) for d in dims)
            world_in = img.affine @ np.array([*idx, 1.0])
            loc = np.argwhere(out.data == data[idx])[0]
            world_out = out.affine @ np.array([*loc, 1.0])
            assert np.allclose(world_in, world_out, atol=1e-6)

    def test_ras_ramp_matches_through_world(self):
        dims = (6, 6, 6)
        rng = np.random.default_rng(7)
        data = rng.permutation(np.arange(216, dtype=np.float32)).reshape(dims)
        img = make_image(data)  # identity affine = RAS
        out = reorient_asl(img)
        assert out.orientation == "ASL"
        for _ in range(10):
            idx = tuple(rng.integers(0, 6, size=3))
            world = img.affine @ np.array([*idx, 1.0])
            loc = np.argwhere(out.data == data[idx])[0]
            assert np.allclose(out.affine @ np.array([*loc, 1.0]), world, atol=1e-6)

    def test_degenerate_affine_rejected(self):
        img = make_image(np.ones((2, 2, 2), dtype=np.float32))
        bad = np.eye(4)
        bad[0, 0] = 0.0
        object.__setattr__(img, "affine", bad)
        with pytest.raises(DegenerateAffine):
            reorient_asl(img)

    def test_oblique_warning(self):
        aff = np.eye(4)
        aff[:3, 0] = (0.9, 0.44, 0.0)  # ~26 degrees off-axis
        img = make_image(np.ones((3, 3, 3), dtype=np.float32), affine=aff)
        with pytest.warns(ObliqueAffineWarning):
            reorient_asl(img)

    def test_orientation_code_ras(self):
        assert orientation_code(np.eye(4)) == "RAS"
