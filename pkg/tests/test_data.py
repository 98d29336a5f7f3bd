import gzip
import struct

import numpy as np
import pytest

from isingdragon.data import (IDXFormatError, Dataset, load_mnist, make_splits, make_subset,
                              read_idx_images, read_idx_labels, synthetic_digits, write_idx)


def write_pair(tmp_path, n=30, side=4, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, (n, side, side), dtype=np.uint8)
    labels = (np.arange(n) % 10).astype(np.uint8)
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx(images, labels, ip, lp)
    return images, labels, ip, lp


class TestIDX:
    def test_header_fields(self, tmp_path):
        _, _, ip, lp = write_pair(tmp_path, n=12, side=5)
        raw = ip.read_bytes()
        assert struct.unpack(">IIII", raw[:16]) == (0x803, 12, 5, 5)
        assert struct.unpack(">II", lp.read_bytes()[:8]) == (0x801, 12)

    def test_round_trip_and_scaling(self, tmp_path):
        images, labels, ip, lp = write_pair(tmp_path)
        images[0, 0, :2] = (0, 255)
        write_idx(images, labels, ip, lp)
        ds = load_mnist(ip, lp)
        assert ds.X.shape == (30, 16)
        assert ds.X[0, 0] == 0.0 and ds.X[0, 1] == 1.0
        assert np.array_equal(ds.X, images.reshape(30, -1) / 255.0)
        assert np.array_equal(ds.y, labels)

    def test_gzip(self, tmp_path):
        images, labels, ip, lp = write_pair(tmp_path)
        gz = tmp_path / "img.idx.gz"
        gz.write_bytes(gzip.compress(ip.read_bytes()))
        assert np.array_equal(read_idx_images(gz), images.reshape(30, -1))

    def test_bad_magic(self, tmp_path):
        _, _, ip, _ = write_pair(tmp_path)
        raw = bytearray(ip.read_bytes())
        raw[3] = 0x01
        ip.write_bytes(bytes(raw))
        with pytest.raises(IDXFormatError, match="offset 0"):
            read_idx_images(ip)

    def test_truncated_pixels(self, tmp_path):
        _, _, ip, _ = write_pair(tmp_path)
        ip.write_bytes(ip.read_bytes()[:100])
        with pytest.raises(IDXFormatError, match="offset 100"):
            read_idx_images(ip)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "x"
        p.write_bytes(b"\x00\x00\x08")
        with pytest.raises(IDXFormatError, match="offset"):
            read_idx_labels(p)

    def test_label_out_of_range(self, tmp_path):
        _, labels, _, lp = write_pair(tmp_path)
        raw = bytearray(lp.read_bytes())
        raw[8 + 4] = 11
        lp.write_bytes(bytes(raw))
        with pytest.raises(IDXFormatError, match="offset 12"):
            read_idx_labels(lp)

    def test_count_mismatch(self, tmp_path):
        images, labels, ip, lp = write_pair(tmp_path)
        write_idx(images, labels[:-1], ip, lp)
        with pytest.raises(IDXFormatError, match="count mismatch"):
            load_mnist(ip, lp)


class TestSubsets:
    def source(self, per_class=20):
        rng = np.random.default_rng(0)
        y = np.repeat(np.arange(10), per_class)
        return Dataset(rng.random((len(y), 4)), rng.permutation(y))

    @pytest.mark.parametrize("per_class,total", [(10, 100), (5, 50)])
    def test_counts(self, per_class, total):
        sub = make_subset(self.source(), per_class, 0)
        assert len(sub) == total and np.all(sub.class_counts == per_class)

    def test_same_seed_identical(self):
        a = make_subset(self.source(), 7, 3)
        b = make_subset(self.source(), 7, 3)
        assert np.array_equal(a.ids, b.ids) and a.hash == b.hash

    def test_splits_disjoint(self):
        train, test = make_splits(self.source(), 12, 8, 1)
        assert not set(train.ids.tolist()) & set(test.ids.tolist())
        assert train.split == "train" and test.split == "test"

    def test_insufficient_names_class(self):
        y = np.repeat(np.arange(10), 5)
        y[0] = 1  # class 0 now has 4 members
        ds = Dataset(np.zeros((50, 2)), y)
        with pytest.raises(ValueError, match="class 0"):
            make_subset(ds, 5, 0)

    def test_exclusion_exhausts(self):
        src = self.source(10)
        with pytest.raises(ValueError):
            make_splits(src, 8, 3, 0)

    def test_pixel_range(self):
        with pytest.raises(ValueError):
            Dataset(np.full((2, 2), 1.5), [0, 1])


class TestSynthetic:
    def test_shape_and_balance(self):
        ds = synthetic_digits(5, 0)
        assert ds.X.shape == (50, 64) and np.all(ds.class_counts == 5)
        assert set(np.unique(ds.X)) <= {0.0, 1.0}

    def test_prototypes_shared_across_seeds(self):
        a = synthetic_digits(1, 0, flip_prob=0.0)
        b = synthetic_digits(1, 9, flip_prob=0.0)
        assert np.array_equal(a.X, b.X)

    def test_flip_rate(self):
        clean = synthetic_digits(200, 0, flip_prob=0.0)
        noisy = synthetic_digits(200, 0, flip_prob=0.1)
        assert np.mean(clean.X != noisy.X) == pytest.approx(0.1, abs=0.01)

    def test_deterministic(self):
        assert synthetic_digits(3, 4).hash == synthetic_digits(3, 4).hash
        assert synthetic_digits(3, 4).hash != synthetic_digits(3, 5).hash
