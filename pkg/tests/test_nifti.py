import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bratsfuse.errors import (
    BadHeader,
    BadMagic,
    InvalidLabel,
    TruncatedFile,
    UnsupportedDtype,
    UnsupportedEncoding,
)
from bratsfuse.nifti import (
    load_probmap,
    read_labelmap,
    read_nifti,
    save_probmap,
    write_nifti,
)
from bratsfuse.volume import LabelMap, ProbMap, Volume


def build_fixture(shape, spacing, datatype, payload, vox_offset=352.0, magic=b"n+1\x00"):
    """Hand-assemble a NIfTI-1 byte stream from the standard's constants."""
    bitpix = {2: 8, 4: 16, 16: 32}[datatype]
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, *shape, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, datatype, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, *spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, vox_offset)
    hdr[344:348] = magic
    body = b"\x00" * (int(vox_offset) - 348)
    return bytes(hdr) + body + payload


class TestRead:
    def test_fixture_parses(self):
        payload = np.arange(8, dtype="<f4").tobytes()
        raw = build_fixture((2, 2, 2), (1.0, 2.0, 3.0), 16, payload)
        v = read_nifti(raw)
        assert v.shape == (2, 2, 2)
        assert v.spacing == (1.0, 2.0, 3.0)
        # x-fastest on disk: linear element 1 is voxel (1, 0, 0)
        assert v.data[1, 0, 0] == 1.0

    def test_minimal_single_voxel(self):
        raw = build_fixture((1, 1, 1), (1.0, 1.0, 1.0), 16, np.zeros(1, "<f4").tobytes())
        v = read_nifti(raw)
        assert v.shape == (1, 1, 1)
        assert v.data[0, 0, 0] == 0.0

    def test_label_3_rejected_for_labelmap(self):
        payload = np.array([3], dtype="u1").tobytes()
        raw = build_fixture((1, 1, 1), (1.0, 1.0, 1.0), 2, payload)
        read_nifti(raw)  # fine as a plain volume
        with pytest.raises(InvalidLabel):
            read_labelmap(raw)

    def test_bad_magic(self):
        raw = build_fixture((1, 1, 1), (1.0, 1.0, 1.0), 2, b"\x00", magic=b"ni1\x00")
        with pytest.raises(BadMagic):
            read_nifti(raw)

    def test_not_nifti_at_all(self):
        with pytest.raises(BadMagic):
            read_nifti(b"\x00" * 400)

    def test_unsupported_dtype(self):
        raw = build_fixture((1, 1, 1), (1.0, 1.0, 1.0), 2, b"\x00")
        raw = raw[:70] + struct.pack("<h", 64) + raw[72:]  # float64 code
        with pytest.raises(UnsupportedDtype):
            read_nifti(raw)

    def test_truncated_header(self):
        with pytest.raises(TruncatedFile):
            read_nifti(b"\x00" * 100)

    def test_truncated_data(self):
        raw = build_fixture((2, 2, 2), (1.0, 1.0, 1.0), 16, b"\x00\x00\x00\x00")
        with pytest.raises(TruncatedFile):
            read_nifti(raw)

    def test_gzip_rejected(self):
        raw = build_fixture((1, 1, 1), (1.0, 1.0, 1.0), 2, b"\x00")
        with pytest.raises(UnsupportedEncoding):
            read_nifti(gzip.compress(raw))

    def test_big_endian_rejected(self):
        raw = bytearray(400)
        struct.pack_into(">i", raw, 0, 348)
        with pytest.raises(UnsupportedEncoding):
            read_nifti(bytes(raw))

    def test_nifti2_rejected(self):
        raw = bytearray(600)
        struct.pack_into("<i", raw, 0, 540)
        with pytest.raises(UnsupportedEncoding):
            read_nifti(bytes(raw))

    def test_non_3d_rejected(self):
        payload = np.zeros(1, "<f4").tobytes()
        raw = bytearray(build_fixture((1, 1, 1), (1.0, 1.0, 1.0), 16, payload))
        struct.pack_into("<8h", raw, 40, 4, 1, 1, 1, 1, 1, 1, 1)
        with pytest.raises(BadHeader):
            read_nifti(bytes(raw))


class TestWrite:
    def test_labelmap_byte_layout(self):
        raw = write_nifti(LabelMap(np.zeros((2, 2, 2), dtype=np.uint8)))
        assert len(raw) == 352 + 8
        assert struct.unpack_from("<i", raw, 0)[0] == 348
        assert raw[344:348] == b"n+1\x00"
        assert struct.unpack_from("<f", raw, 108)[0] == 352.0
        assert struct.unpack_from("<h", raw, 70)[0] == 2  # uint8
        assert raw[352:] == b"\x00" * 8

    def test_pixdim_fields(self):
        raw = write_nifti(Volume(np.zeros((1, 1, 1)), spacing=(1.0, 1.0, 1.0)))
        pixdim = struct.unpack_from("<8f", raw, 76)
        assert pixdim[1:4] == (1.0, 1.0, 1.0)

    def test_volume_written_as_float32(self):
        raw = write_nifti(Volume(np.zeros((1, 1, 1), dtype=np.float64)))
        assert struct.unpack_from("<h", raw, 70)[0] == 16

    def test_data_order_x_fastest(self):
        data = np.zeros((2, 1, 1), dtype=np.float32)
        data[1, 0, 0] = 5.0
        raw = write_nifti(Volume(data))
        vals = np.frombuffer(raw[352:], dtype="<f4")
        assert vals.tolist() == [0.0, 5.0]

    def test_origin_roundtrip(self):
        v = Volume(np.zeros((1, 1, 1)), origin=(1.5, -2.0, 3.25))
        assert read_nifti(write_nifti(v)).origin == (1.5, -2.0, 3.25)


@settings(max_examples=50, deadline=None)
@given(
    shape=st.tuples(*(st.integers(1, 8),) * 3),
    dtype=st.sampled_from(["uint8", "int16", "float32"]),
    seed=st.integers(0, 2**32 - 1),
    spacing=st.tuples(*(st.floats(0.25, 8.0, width=32),) * 3),
)
def test_roundtrip_bit_exact(shape, dtype, seed, spacing):
    rng = np.random.default_rng(seed)
    if dtype == "uint8":
        data = rng.integers(0, 256, size=shape).astype(np.uint8)
    elif dtype == "int16":
        data = rng.integers(-(2**15), 2**15, size=shape).astype(np.int16)
    else:
        data = rng.random(shape, dtype=np.float32)
    v = Volume(data, spacing=spacing)
    back = read_nifti(write_nifti(v))
    assert back.shape == v.shape
    assert back.spacing == v.spacing
    assert np.array_equal(back.data, v.data)


def test_labelmap_roundtrip_bit_exact(rng):
    labels = np.array([0, 1, 2, 4], dtype=np.uint8)[rng.integers(0, 4, size=(5, 4, 3))]
    m = LabelMap(labels, spacing=(0.5, 1.0, 2.0))
    back = read_labelmap(write_nifti(m))
    assert np.array_equal(back.data, m.data)
    assert back.data.dtype == np.uint8
    assert back.spacing == m.spacing


def test_probmap_manifest_roundtrip(tmp_path, rng):
    raw = rng.random((4, 3, 4, 5))
    raw /= raw.sum(axis=0, keepdims=True)
    pm = ProbMap(raw, spacing=(1.0, 1.5, 2.0))
    manifest = save_probmap(pm, tmp_path, "case")
    assert manifest.name == "case.json"
    back = load_probmap(manifest)
    assert back.shape == pm.shape
    assert back.spacing == pm.spacing
    # float32 storage: values agree to float32 resolution
    assert np.abs(back.data - pm.data).max() < 1e-6
    assert np.abs(back.data.sum(axis=0) - 1.0).max() <= 1e-6
