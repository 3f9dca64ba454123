import numpy as np
import pytest

from meandim import RandomStream
from meandim.nn import (
    ArchiveError,
    COMBINED,
    PixelHistogramSet,
    build_histograms,
    load_archive,
    read_idx_images,
    read_idx_labels,
    write_idx_images,
    write_idx_labels,
)


class TestIdx:
    def test_round_trip(self, tmp_path):
        gen = RandomStream(1).generator
        images = gen.integers(0, 256, (5, 4, 4)).astype(np.uint8)
        labels = np.array([0, 1, 2, 1, 0], dtype=np.uint8)
        write_idx_images(tmp_path / "imgs", images)
        write_idx_labels(tmp_path / "lbls", labels)
        assert np.array_equal(read_idx_images(tmp_path / "imgs"), images)
        assert np.array_equal(read_idx_labels(tmp_path / "lbls"), labels)

    def test_gzip_transparent(self, tmp_path):
        import gzip

        images = np.zeros((2, 3, 3), dtype=np.uint8)
        write_idx_images(tmp_path / "imgs", images)
        raw = (tmp_path / "imgs").read_bytes()
        (tmp_path / "imgs.gz").write_bytes(gzip.compress(raw))
        assert np.array_equal(read_idx_images(tmp_path / "imgs.gz"), images)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"\x00" * 20)
        with pytest.raises(ArchiveError):
            read_idx_images(tmp_path / "bad")

    def test_count_mismatch(self, tmp_path):
        write_idx_images(tmp_path / "imgs", np.zeros((3, 2, 2), dtype=np.uint8))
        write_idx_labels(tmp_path / "lbls", np.zeros(2, dtype=np.uint8))
        with pytest.raises(ArchiveError, match="mismatch"):
            load_archive(tmp_path / "imgs", tmp_path / "lbls")

    def test_csv_fallback(self, tmp_path):
        rows = ["3," + ",".join(["0"] * 3 + ["255"] + ["0"] * 0)]
        # one 2x2 image: label 3, pixels 0,0,0,255
        (tmp_path / "data.csv").write_text("3,0,0,0,255\n7,255,255,255,255\n")
        images, labels = load_archive(tmp_path / "data.csv")
        assert images.shape == (2, 2, 2)
        assert labels.tolist() == [3, 7]
        assert images[0, 1, 1] == 1.0 and images[0, 0, 0] == 0.0

    def test_csv_non_square(self, tmp_path):
        (tmp_path / "data.csv").write_text("1,0,0,0\n")
        with pytest.raises(ArchiveError):
            load_archive(tmp_path / "data.csv")

    def test_unreadable(self, tmp_path):
        with pytest.raises(ArchiveError):
            load_archive(tmp_path / "missing", tmp_path / "missing2")


class TestBuildHistograms:
    def test_black_and_white_pair(self):
        images = np.stack([np.zeros((3, 3)), np.ones((3, 3))])
        labels = np.array([0, 1])
        hs = build_histograms(images, labels, levels=2)
        combined = hs.probs[COMBINED]
        assert combined.shape == (9, 2)
        assert np.allclose(combined, 0.5)
        assert np.allclose(hs.probs[0][:, 0], 1.0)
        assert np.allclose(hs.probs[1][:, 1], 1.0)

    def test_missing_class_errors_on_request_only(self):
        images = np.stack([np.zeros((2, 2)), np.ones((2, 2))])
        labels = np.array([0, 1])
        hs = build_histograms(images, labels)
        assert 5 in hs.metadata["missing_classes"]
        hs.input_model(0)  # fine
        with pytest.raises(KeyError):
            hs.input_model(5)

    def test_mean_intensity_ordering(self):
        gen = RandomStream(2).generator
        bright = gen.random((30, 4, 4)) * 0.5 + 0.5
        dim = gen.random((30, 4, 4)) * 0.3
        images = np.concatenate([bright, dim])
        labels = np.array([0] * 30 + [1] * 30)
        hs = build_histograms(images, labels, levels=64)
        assert hs.pixel_means(1).sum() < hs.pixel_means(0).sum()

    def test_sampler_reproduces_source_means(self):
        gen = RandomStream(3).generator
        images = gen.random((50, 3, 3))
        labels = np.zeros(50, dtype=int)
        hs = build_histograms(images, labels, levels=128)
        model = hs.input_model(0, mode="atoms")
        draws = model.sample(40_000, RandomStream(4))
        source = hs.pixel_means(0)
        se = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - source) < 4 * se + 1e-3)

    def test_atoms_mode_reproduces_gray_levels(self):
        images = np.stack([np.full((2, 2), 3 / 15), np.full((2, 2), 7 / 15)])
        labels = np.array([0, 0])
        hs = build_histograms(images, labels, levels=16)
        draws = hs.input_model(0, mode="atoms").sample(500, RandomStream(5))
        assert set(np.round(np.unique(draws), 9)) <= {round(3 / 15, 9), round(7 / 15, 9)}

    def test_validation(self):
        with pytest.raises(ValueError):
            build_histograms(np.zeros((0, 2, 2)), np.zeros(0, dtype=int))
        with pytest.raises(ValueError):
            build_histograms(np.zeros((2, 2, 2)), np.zeros(3, dtype=int))
        with pytest.raises(ValueError):
            build_histograms(np.full((1, 2, 2), 1.5), np.zeros(1, dtype=int))

    def test_mdhs_round_trip(self, tmp_path, fixture_histograms):
        paths = fixture_histograms.save(tmp_path)
        again = PixelHistogramSet.load(paths)
        assert again.pixels == fixture_histograms.pixels
        for key in fixture_histograms.available():
            assert np.allclose(again.probs[key], fixture_histograms.probs[key])


class TestFixtureHistograms:
    def test_eleven_sets(self, fixture_histograms):
        keys = fixture_histograms.available()
        assert COMBINED in keys
        assert len(keys) == 11

    def test_probabilities_normalized(self, fixture_histograms):
        for key in fixture_histograms.available():
            sums = fixture_histograms.probs[key].sum(axis=1)
            assert np.all(np.abs(sums - 1.0) < 1e-9)
