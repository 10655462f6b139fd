import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wireless_dsgd.data import (Dataset, load_idx, partition_noniid, synth_dataset, write_idx)
from wireless_dsgd.errors import FormatError, PartitionError
from wireless_dsgd.learner import accuracy, loss_and_grad, param_dim


def idx_bytes(magic, dims, payload):
    return b"".join(int(v).to_bytes(4, "big") for v in (magic, *dims)) + bytes(payload)


@pytest.fixture
def idx_pair(tmp_path):
    pixels = (np.arange(4 * 28 * 28) % 256).astype(np.uint8)
    labels = [3, 0, 9, 3]
    img, lbl = tmp_path / "img.idx", tmp_path / "lbl.idx"
    img.write_bytes(idx_bytes(0x803, (4, 28, 28), pixels))
    lbl.write_bytes(idx_bytes(0x801, (4,), labels))
    return img, lbl, pixels, labels


class TestIdx:
    def test_fixture(self, idx_pair):
        img, lbl, pixels, labels = idx_pair
        data = load_idx(img, lbl)
        assert len(data) == 4 and data.dim == 784
        assert data.features.min() >= 0 and data.features.max() <= 1
        assert data.features[0, 255] == 1.0 and data.features[0, 1] == pytest.approx(1 / 255)
        np.testing.assert_array_equal(data.labels, labels)

    def test_writer_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        px = rng.integers(0, 256, (5, 3, 2), dtype=np.uint8)
        write_idx(px, [1, 2, 3, 4, 5], tmp_path / "i", tmp_path / "l")
        data = load_idx(tmp_path / "i", tmp_path / "l")
        np.testing.assert_allclose(data.features * 255, px.reshape(5, 6))

    def test_count_mismatch(self, idx_pair, tmp_path):
        img, _, _, _ = idx_pair
        bad = tmp_path / "short.idx"
        bad.write_bytes(idx_bytes(0x801, (3,), [0, 1, 2]))
        with pytest.raises(FormatError):
            load_idx(img, bad)

    def test_empty_file(self, idx_pair, tmp_path):
        empty = tmp_path / "empty"
        empty.write_bytes(b"")
        with pytest.raises(FormatError) as info:
            load_idx(empty, idx_pair[1])
        assert info.value.offset == 0

    def test_bad_magic(self, idx_pair, tmp_path):
        bad = tmp_path / "bad"
        bad.write_bytes(idx_bytes(0x802, (4, 28, 28), b""))
        with pytest.raises(FormatError):
            load_idx(bad, idx_pair[1])

    def test_truncated(self, idx_pair, tmp_path):
        img, lbl, _, _ = idx_pair
        cut = tmp_path / "cut"
        cut.write_bytes(img.read_bytes()[:-10])
        with pytest.raises(FormatError) as info:
            load_idx(cut, lbl)
        assert info.value.offset == 16 + 4 * 784 - 10


def train_softmax(data, iters=300, lr=0.5):
    theta = np.zeros(param_dim(data.dim, data.num_classes))
    for _ in range(iters):
        _, g = loss_and_grad(theta, data.features, data.labels, data.num_classes)
        theta -= lr * g
    return theta


class TestSynthetic:
    def test_deterministic(self):
        a, b = synth_dataset(7), synth_dataset(7)
        np.testing.assert_array_equal(a.features, b.features)
        assert not np.array_equal(a.features, synth_dataset(8).features)

    def test_shared_geometry(self):
        a = synth_dataset(7, spread=0.0)
        b = synth_dataset(7, spread=0.0, sample_seed=99)
        np.testing.assert_array_equal(a.features, b.features)

    def test_separable_limit(self):
        data = synth_dataset(1, spread=0.0, n_per_class=20)
        assert accuracy(train_softmax(data, iters=200), data) == 1.0

    def test_centralized_accuracy(self):
        train = synth_dataset(2)
        test = synth_dataset(2, n_per_class=100, sample_seed=3)
        theta = np.zeros(param_dim(20, 10))
        rng = np.random.default_rng(0)
        for t in range(3000):
            idx = rng.choice(len(train), 32, replace=False)
            _, g = loss_and_grad(theta, train.features[idx], train.labels[idx], 10)
            theta -= 0.05 / (1 + t / 500) * g
        assert accuracy(theta, test) >= 0.9


class TestPartition:
    def setup_method(self):
        self.data = synth_dataset(0, n_per_class=200)

    def test_exclusion_sizes(self):
        part = partition_noniid(1, self.data, 8, 400)
        assert all(2 <= len(ex) <= 4 for ex in part.excluded)

    def test_even_split(self):
        part = partition_noniid(1, self.data, 8, 160, min_excluded=2, max_excluded=2)
        for i in range(8):
            counts = np.bincount(part.shard(self.data, i).labels, minlength=10)
            assert sorted(counts[counts > 0]) == [20] * 8

    def test_remainder_round_robin(self):
        part = partition_noniid(1, self.data, 8, 161, min_excluded=2, max_excluded=2)
        for i in range(8):
            counts = np.bincount(part.shard(self.data, i).labels, minlength=10)
            included = [c for c in range(10) if c not in part.excluded[i]]
            assert counts[included[0]] == 21
            assert all(counts[c] == 20 for c in included[1:])

    @given(seed=st.integers(0, 10**6), K=st.integers(1, 12), budget=st.integers(1, 1000))
    @settings(max_examples=40, deadline=None)
    def test_properties(self, seed, K, budget):
        part = partition_noniid(seed, self.data, K, budget)
        again = partition_noniid(seed, self.data, K, budget)
        for i in range(K):
            shard = part.shard(self.data, i)
            assert len(shard) == budget
            assert len(np.unique(part.indices[i])) == budget
            counts = np.bincount(shard.labels, minlength=10)
            assert not any(counts[c] for c in part.excluded[i])
            kept = [counts[c] for c in range(10) if c not in part.excluded[i]]
            assert max(kept) - min(kept) <= 1
            np.testing.assert_array_equal(part.indices[i], again.indices[i])

    def test_starved_class(self):
        with pytest.raises(PartitionError) as info:
            partition_noniid(1, self.data, 2, 2000)
        assert info.value.starved_class in range(10)
