import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracemda import data_io
from tracemda.exceptions import DataFormatError
from tracemda.mda import LabeledDataset


def idx_bytes(type_code, dims, payload):
    return bytes([0, 0, type_code, len(dims)]) + struct.pack(f">{len(dims)}I", *dims) + payload


class TestIdx:
    def test_hand_built_fixture(self, tmp_path):
        # two 2x3 images and their labels, written byte by byte
        pixels = bytes(range(12))
        (tmp_path / "img").write_bytes(idx_bytes(0x08, (2, 2, 3), pixels))
        (tmp_path / "lab").write_bytes(idx_bytes(0x08, (2,), bytes([7, 1])))
        ds = data_io.load_idx(tmp_path / "img", tmp_path / "lab")
        assert ds.X.shape == (2, 3, 2)
        np.testing.assert_allclose(ds.X[:, :, 1], np.arange(6, 12).reshape(2, 3) / 255)
        np.testing.assert_array_equal(ds.labels, [7, 1])

    def test_round_trip_and_gzip(self, tmp_path):
        a = np.arange(24, dtype=np.uint8).reshape(4, 2, 3)
        data_io.write_idx(tmp_path / "a.idx", a)
        np.testing.assert_array_equal(data_io.read_idx(tmp_path / "a.idx"), a)
        with gzip.open(tmp_path / "a.idx.gz", "wb") as fh:
            fh.write(data_io.encode_idx(a))
        np.testing.assert_array_equal(data_io.read_idx(tmp_path / "a.idx.gz"), a)
        assert data_io.encode_idx(a)[:4] == b"\x00\x00\x08\x03"

    def test_big_endian_wide_types(self):
        raw = idx_bytes(0x0C, (2,), struct.pack(">2i", 1, -300))
        np.testing.assert_array_equal(data_io.parse_idx(raw), [1, -300])

    @pytest.mark.parametrize(
        "raw,msg",
        [
            (b"\x00\x00", "header"),
            (b"\x01\x00\x08\x01" + b"\x00\x00\x00\x01" + b"\x05", "magic"),
            (b"\x00\x00\x07\x01" + b"\x00\x00\x00\x01" + b"\x05", "magic"),
            (b"\x00\x00\x08\x02\x00\x00\x00\x02", "dimension"),
            (idx_bytes(0x08, (4,), b"\x01\x02"), "truncated"),
            (idx_bytes(0x08, (1,), b"\x01\x02"), "trailing"),
        ],
    )
    def test_malformed(self, raw, msg):
        with pytest.raises(DataFormatError, match=msg):
            data_io.parse_idx(raw)

    def test_expected_magic(self):
        with pytest.raises(DataFormatError, match="expected"):
            data_io.parse_idx(idx_bytes(0x08, (1,), b"\x01"), data_io.IDX_IMAGES_MAGIC)

    def test_count_mismatch(self, tmp_path):
        data_io.write_idx(tmp_path / "img", np.zeros((3, 2, 2), np.uint8))
        data_io.write_idx(tmp_path / "lab", np.zeros(2, np.uint8))
        with pytest.raises(DataFormatError):
            data_io.load_idx(tmp_path / "img", tmp_path / "lab")


class TestContainer:
    def test_header_layout(self):
        raw = data_io.encode_container(np.array([[1.0, 2.0]]))
        assert raw[:4] == b"TTEN" and raw[4:7] == bytes([1, 1, 2])
        assert struct.unpack("<QQQ", raw[7:31]) == (1, 2, 16)
        assert struct.unpack("<2d", raw[31:]) == (1.0, 2.0)

    def test_round_trip_large(self, tmp_path, rng):
        T = rng.standard_normal((60, 60, 3, 5))
        data_io.save_container(tmp_path / "t.tten", T)
        back = data_io.load_container(tmp_path / "t.tten")
        assert back.shape == T.shape
        assert np.array_equal(back, T)

    @pytest.mark.parametrize("cut", [3, 10, 40])
    def test_truncated(self, cut):
        raw = data_io.encode_container(np.ones((2, 2)))
        with pytest.raises(DataFormatError):
            data_io.decode_container(raw[: len(raw) - cut])

    def test_bad_fields(self):
        raw = bytearray(data_io.encode_container(np.ones(3)))
        for pos, val in ((0, ord("X")), (4, 2), (5, 7), (6, 0)):
            bad = bytearray(raw)
            bad[pos] = val
            with pytest.raises(DataFormatError):
                data_io.decode_container(bytes(bad))
        with pytest.raises(DataFormatError):
            data_io.decode_container(bytes(raw) + b"\x00")


@settings(max_examples=40, deadline=None)
@given(shape=st.lists(st.integers(1, 4), min_size=1, max_size=4), seed=st.integers(0, 2**32 - 1))
def test_container_property(shape, seed):
    T = np.random.default_rng(seed).standard_normal(shape)
    assert np.array_equal(data_io.decode_container(data_io.encode_container(T)), T)


class TestCsv:
    def test_labels_round_trip(self, tmp_path):
        data_io.save_labels_csv(tmp_path / "l.csv", np.array([3, 0, 2]))
        assert (tmp_path / "l.csv").read_text().splitlines()[0] == "index,label"
        np.testing.assert_array_equal(data_io.load_labels_csv(tmp_path / "l.csv"), [3, 0, 2])

    def test_labels_malformed(self, tmp_path):
        p = tmp_path / "l.csv"
        p.write_text("idx,lab\n0,1\n")
        with pytest.raises(DataFormatError):
            data_io.load_labels_csv(p)
        p.write_text("index,label\n0,a\n")
        with pytest.raises(DataFormatError):
            data_io.load_labels_csv(p)
        p.write_text("index,label\n0,1\n2,1\n")
        with pytest.raises(DataFormatError):
            data_io.load_labels_csv(p)

    def test_feature_csv(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("a,b,c,d,label\n1,2,3,4,0\n5,6,7,8,1\n")
        ds = data_io.load_feature_csv(p, (2, 2))
        assert ds.X.shape == (2, 2, 2)
        np.testing.assert_array_equal(ds.X[:, :, 1], [[5, 6], [7, 8]])
        with pytest.raises(DataFormatError):
            data_io.load_feature_csv(p, (3, 2))


class TestSplit:
    labels = np.repeat(np.arange(4), 10)

    def test_stratified_counts(self):
        tr, te = data_io.split_indices(self.labels, data_io.SplitSpec(train_per_class=6, test_per_class=3))
        assert np.all(np.bincount(self.labels[tr]) == 6)
        assert np.all(np.bincount(self.labels[te]) == 3)
        assert not set(tr) & set(te)

    def test_remainder_goes_to_test(self):
        tr, te = data_io.split_indices(self.labels, data_io.SplitSpec(train_per_class=7))
        assert len(tr) == 28 and len(te) == 12

    def test_fraction(self):
        tr, te = data_io.split_indices(self.labels, data_io.SplitSpec(train_fraction=0.25))
        assert len(tr) == 10 and len(te) == 30

    def test_determinism(self):
        spec = data_io.SplitSpec(train_per_class=5, seed=11)
        a = data_io.split_indices(self.labels, spec)
        b = data_io.split_indices(self.labels, spec)
        c = data_io.split_indices(self.labels, data_io.SplitSpec(train_per_class=5, seed=12))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert not np.array_equal(a[0], c[0])

    def test_infeasible(self):
        with pytest.raises(ValueError):
            data_io.split_indices(self.labels, data_io.SplitSpec(train_per_class=8, test_per_class=3))
        with pytest.raises(ValueError):
            data_io.split_indices(self.labels, data_io.SplitSpec(train_per_class=10))
        with pytest.raises(ValueError):
            data_io.SplitSpec(train_per_class=3, train_fraction=0.5)

    def test_split_dataset(self, rng):
        ds = LabeledDataset(rng.standard_normal((2, 3, 40)), self.labels)
        tr, te = data_io.split(ds, data_io.SplitSpec(train_per_class=6, seed=1))
        assert tr.X.shape == (2, 3, 24) and te.n == 16


class TestSynthetic:
    def test_shape_and_determinism(self):
        spec = data_io.SynthSpec(n_classes=4, per_class=5, feature_shape=(3, 2), seed=9)
        a, b = data_io.synth_gaussian_classes(spec), data_io.synth_gaussian_classes(spec)
        assert a.X.shape == (3, 2, 20)
        np.testing.assert_array_equal(np.bincount(a.labels), [5] * 4)
        assert np.array_equal(a.X, b.X)

    def test_noise_free_means(self):
        spec = data_io.SynthSpec(n_classes=3, per_class=2, feature_shape=(2, 2), separation=2.0, noise=0.0)
        ds = data_io.synth_gaussian_classes(spec)
        for j in range(3):
            expected = np.zeros(4)
            expected[j] = 2.0
            Xj = ds.X[..., ds.labels == j].reshape(4, -1)
            np.testing.assert_allclose(Xj, np.tile(expected[:, None], (1, 2)))

    def test_validation(self):
        with pytest.raises(ValueError):
            data_io.SynthSpec(n_classes=1)
        with pytest.raises(ValueError):
            data_io.SynthSpec(noise=-1)
