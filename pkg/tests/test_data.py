"""Dataset loading, synthetic generation, normalization and sampling."""

import numpy as np
import pytest

from cyclenas import data as dt
from cyclenas.data import (
    SideStream,
    SyntheticTask,
    UnpairedDataset,
    epoch_permutation,
    generate_synthetic,
    load_unpaired,
    sample_pair,
)


@pytest.fixture
def png_dirs(tmp_path):
    rng = np.random.default_rng(0)
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    for d, n in ((dir_a, 4), (dir_b, 4)):
        for i in range(n):
            img = dt.quantize(rng.uniform(-1, 1, (3, 32, 32)))
            dt.save_png(d / f"img{i}.png", img)
    return dir_a, dir_b


class TestNormalization:
    def test_endpoints(self):
        u8 = np.array([[[0, 255, 128]]], dtype=np.uint8)
        x = dt.normalize_pixels(u8)
        assert x[0, 0, 0] == -1.0
        assert x[0, 0, 1] == 1.0
        assert x[0, 0, 2] == pytest.approx(2 * 128 / 255 - 1)
        assert x[0, 0, 2] == pytest.approx(0.00392, abs=1e-5)

    def test_round_trip_identity_on_grid(self):
        rng = np.random.default_rng(1)
        x = dt.quantize(rng.uniform(-1, 1, (3, 8, 8)))
        back = dt.normalize_pixels(dt.denormalize_pixels(x))
        np.testing.assert_allclose(back, x, atol=1.0 / 510)

    def test_values_bounded(self):
        task = SyntheticTask("color_swap", 16, 4, 4, seed=3)
        ds = generate_synthetic(task)
        for img in ds.side_a + ds.side_b:
            assert img.min() >= -1.0 and img.max() <= 1.0


class TestLoadUnpaired:
    def test_loads_folders(self, png_dirs):
        ds = load_unpaired(*png_dirs)
        assert ds.n_a == 4 and ds.n_b == 4
        assert ds.image_shape == (3, 32, 32)

    def test_imbalance_preserved(self, tmp_path):
        rng = np.random.default_rng(2)
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        for d, n in ((dir_a, 20), (dir_b, 8)):
            for i in range(n):
                dt.save_png(d / f"{i:03d}.png", dt.quantize(rng.uniform(-1, 1, (3, 8, 8))))
        ds = load_unpaired(dir_a, dir_b)
        assert (ds.n_a, ds.n_b) == (20, 8)

    def test_png_round_trip_exact(self, tmp_path):
        img = dt.quantize(np.random.default_rng(5).uniform(-1, 1, (3, 16, 16)))
        dt.save_png(tmp_path / "x.png", img)
        np.testing.assert_array_equal(dt.load_png(tmp_path / "x.png"), img)

    def test_empty_directory_rejected(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        with pytest.raises(ValueError, match="no PNG"):
            load_unpaired(tmp_path / "a", tmp_path / "b")

    def test_mixed_dimensions_rejected_with_filename(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        dt.save_png(dir_a / "ok.png", np.zeros((3, 8, 8)))
        dt.save_png(dir_a / "zz_bad.png", np.zeros((3, 16, 16)))
        dt.save_png(dir_b / "ok.png", np.zeros((3, 8, 8)))
        with pytest.raises(ValueError, match="zz_bad"):
            load_unpaired(dir_a, dir_b)

    def test_undecodable_file_rejected_with_filename(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        (dir_a / "broken.png").write_bytes(b"this is not a png")
        dt.save_png(dir_b / "ok.png", np.zeros((3, 8, 8)))
        with pytest.raises(ValueError, match="broken.png"):
            load_unpaired(dir_a, dir_b)

    def test_lexicographic_order(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        for name, value in (("b.png", 0.5), ("a.png", -0.5)):
            img = dt.quantize(np.full((3, 8, 8), value))
            dt.save_png(dir_a / name, img)
        dt.save_png(dir_b / "x.png", np.zeros((3, 8, 8)))
        ds = load_unpaired(dir_a, dir_b)
        assert ds.side_a[0].mean() < 0 < ds.side_a[1].mean()


class TestSynthetic:
    def test_color_swap_red_gap(self):
        ds = generate_synthetic(SyntheticTask("color_swap", 32, 16, 16, seed=7))
        red_a = np.mean([img[0].mean() for img in ds.side_a])
        red_b = np.mean([img[0].mean() for img in ds.side_b])
        assert red_a - red_b > 0.3

    def test_texture_asymmetry(self):
        ds = generate_synthetic(SyntheticTask("texture_asym", 32, 8, 8, seed=7))

        def lap_energy(side):
            vals = []
            for img in side:
                lap = (img[:, 1:-1, 2:] + img[:, 1:-1, :-2] + img[:, 2:, 1:-1]
                       + img[:, :-2, 1:-1] - 4 * img[:, 1:-1, 1:-1])
                vals.append(np.abs(lap).mean())
            return np.mean(vals)

        assert lap_energy(ds.side_b) > 2 * lap_energy(ds.side_a)

    def test_deterministic_under_seed(self):
        task = SyntheticTask("color_swap", 16, 4, 4, seed=11)
        d1, d2 = generate_synthetic(task), generate_synthetic(task)
        for x, y in zip(d1.side_a + d1.side_b, d2.side_a + d2.side_b):
            assert np.array_equal(x, y)

    def test_counts_respected(self):
        ds = generate_synthetic(SyntheticTask("color_swap", 16, 5, 9, seed=0))
        assert (ds.n_a, ds.n_b) == (5, 9)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError, match="image_size"):
            SyntheticTask("color_swap", 4, 4, 4, seed=0)
        with pytest.raises(ValueError, match="at least 2"):
            SyntheticTask("color_swap", 16, 1, 4, seed=0)
        with pytest.raises(ValueError, match="unknown synthetic"):
            SyntheticTask("noise", 16, 4, 4, seed=0)


class TestDatasetInvariants:
    def test_nonempty_sides_required(self):
        with pytest.raises(ValueError, match="non-empty"):
            UnpairedDataset(side_a=[], side_b=[np.zeros((3, 8, 8))])

    def test_uniform_shape_required(self):
        with pytest.raises(ValueError, match="shape"):
            UnpairedDataset(side_a=[np.zeros((3, 8, 8)), np.zeros((3, 4, 4))],
                            side_b=[np.zeros((3, 8, 8))])


class TestSampling:
    def test_cycling_counts(self):
        ds = UnpairedDataset(side_a=[np.full((3, 8, 8), i) for i in range(3)],
                             side_b=[np.full((3, 8, 8), i) for i in range(5)])
        perm_a = epoch_permutation(0, "a", 0, ds.n_a)
        perm_b = epoch_permutation(0, "b", 0, ds.n_b)
        seen_a, seen_b = [], []
        for it in range(max(ds.n_a, ds.n_b)):
            a, b = sample_pair(ds, (perm_a, perm_b), it)
            seen_a.append(int(a[0, 0, 0]))
            seen_b.append(int(b[0, 0, 0]))
        assert sorted(set(seen_b)) == [0, 1, 2, 3, 4]          # each b exactly once
        counts = np.bincount(seen_a, minlength=3)
        assert sorted(counts.tolist()) == [1, 2, 2]            # ceil/floor of 5/3

    def test_same_seed_same_sequence(self):
        p1 = epoch_permutation(4, "a", 2, 10)
        p2 = epoch_permutation(4, "a", 2, 10)
        assert np.array_equal(p1, p2)

    def test_epochs_advance_permutations(self):
        perms = [epoch_permutation(4, "a", e, 50) for e in range(4)]
        assert any(not np.array_equal(perms[0], p) for p in perms[1:])

    def test_side_stream_visits_subset_only(self):
        stream = SideStream([3, 5, 9], seed=0, label="a1")
        seen = {stream.index_at(0, it) for it in range(12)}
        assert seen == {3, 5, 9}

    def test_empty_stream_rejected(self):
        with pytest.raises(ValueError, match="no indices"):
            SideStream([], seed=0, label="x")
