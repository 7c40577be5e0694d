import numpy as np
import pytest

from models.dataio import (
    Partition,
    ReidDataset,
    generate_synthetic,
    load_dataset,
    parse_filename,
    read_ppm,
    resize,
    resize_dataset,
    save_dataset,
    write_ppm,
)
from models.utils import ConfigurationError, DataError


class TestSynthetic:
    def test_layout(self, tiny_dataset):
        assert tiny_dataset.image_shape == (3, 64, 32)
        assert len(tiny_dataset.train) == 16
        assert len(tiny_dataset.query) == 6
        assert len(tiny_dataset.gallery) == 6
        assert tiny_dataset.num_train_ids == 4
        assert set(tiny_dataset.train.ids.tolist()) == {1, 2, 3, 4}
        assert set(tiny_dataset.query.ids.tolist()) == {5, 6, 7}

    def test_pixels_in_unit_range(self, tiny_dataset):
        images = tiny_dataset.train.images
        assert images.dtype == np.float32
        assert images.min() >= 0.0 and images.max() <= 1.0

    def test_every_query_has_cross_camera_match(self, default_dataset):
        gallery = default_dataset.gallery
        for pid, cam in zip(default_dataset.query.ids, default_dataset.query.cams):
            assert np.any((gallery.ids == pid) & (gallery.cams != cam))

    def test_deterministic(self):
        a = generate_synthetic(n_train_ids=2, n_test_ids=1, views_per_id=4, n_cams=2, seed=9)
        b = generate_synthetic(n_train_ids=2, n_test_ids=1, views_per_id=4, n_cams=2, seed=9)
        np.testing.assert_array_equal(a.train.images, b.train.images)
        np.testing.assert_array_equal(a.gallery.images, b.gallery.images)

    def test_seed_changes_pixels(self):
        a = generate_synthetic(n_train_ids=2, n_test_ids=1, views_per_id=4, n_cams=2, seed=1)
        b = generate_synthetic(n_train_ids=2, n_test_ids=1, views_per_id=4, n_cams=2, seed=2)
        assert not np.array_equal(a.train.images, b.train.images)

    def test_same_identity_is_closer_than_others(self, default_dataset):
        train = default_dataset.train
        features = train.pixel_features()
        sq = np.sum(features**2, axis=1)
        distances = sq[:, None] + sq[None] - 2 * features @ features.T
        same = train.ids[:, None] == train.ids[None]
        np.fill_diagonal(same, False)
        assert distances[same].mean() < distances[train.ids[:, None] != train.ids[None]].mean()

    @pytest.mark.parametrize(
        'kwargs,message',
        [
            ({'views_per_id': 5, 'n_cams': 4}, 'need at least 6'),
            ({'n_cams': 1}, 'at least 2 cameras'),
            ({'n_test_ids': 0}, 'train and test identities'),
            ({'dims': (4, 32)}, 'too small'),
        ],
    )
    def test_infeasible(self, kwargs, message):
        with pytest.raises(ConfigurationError, match=message):
            generate_synthetic(**kwargs)


class TestPartition:
    def test_file_names(self, tiny_dataset):
        names = tiny_dataset.query.file_names()
        assert names[0] == '0005_c1_0000.ppm'
        assert all(parse_filename(n)[0] == pid for n, pid in zip(names, tiny_dataset.query.ids))

    def test_length_mismatch(self):
        with pytest.raises(DataError, match='disagree'):
            Partition(images=np.zeros((2, 3, 8, 8)), ids=np.array([1]), cams=np.array([1, 1]), views=np.array([0, 1]))

    def test_training_labels_are_contiguous(self, tiny_dataset):
        training_set, classes = tiny_dataset.train.training_set()
        np.testing.assert_array_equal(classes, [1, 2, 3, 4])
        np.testing.assert_array_equal(classes[training_set.labels], tiny_dataset.train.ids)

    def test_overlapping_ids_rejected(self, tiny_dataset):
        dataset = ReidDataset(train=tiny_dataset.query, query=tiny_dataset.query, gallery=tiny_dataset.gallery)
        with pytest.raises(DataError, match='overlap'):
            dataset.validate()

    def test_query_without_cross_camera_match(self, tiny_dataset):
        gallery = tiny_dataset.gallery
        keep = gallery.cams == 1
        same_cam = Partition(gallery.images[keep], gallery.ids[keep], gallery.cams[keep], gallery.views[keep])
        dataset = ReidDataset(train=tiny_dataset.train, query=tiny_dataset.query, gallery=same_cam)
        with pytest.raises(DataError, match='cross-camera'):
            dataset.validate()


class TestFiles:
    @pytest.mark.parametrize(
        'name,expected',
        [('0012_c3_0005.ppm', (12, 3, 5)), ('0000_c1_0000.ppm', (0, 1, 0)), ('7_c10_42.ppm', (7, 10, 42))],
    )
    def test_parse_filename(self, name, expected):
        assert parse_filename(name) == expected

    @pytest.mark.parametrize('name', ['0012_3_0005.ppm', '0012_c3_0005.png', 'abc_c1_0001.ppm', '0001_c0_0001.ppm'])
    def test_malformed_filename(self, name):
        with pytest.raises(DataError):
            parse_filename(name)

    def test_ppm_quantizes_to_8_bits(self, rng, tmp_path):
        img = rng.random((3, 10, 6)).astype(np.float32)
        write_ppm(tmp_path / 'x.ppm', img)
        assert (tmp_path / 'x.ppm').read_bytes()[:2] == b'P6'
        back = read_ppm(tmp_path / 'x.ppm')
        assert back.shape == (3, 10, 6)
        np.testing.assert_allclose(back, img, atol=0.5 / 255 + 1e-6)

    def test_read_rejects_other_formats(self, tmp_path):
        path = tmp_path / 'x.ppm'
        path.write_bytes(b'P3\n1 1\n255\n0 0 0\n')
        with pytest.raises(DataError, match='P6'):
            read_ppm(path)

    def test_dataset_round_trip(self, tiny_dataset, tmp_path):
        save_dataset(tiny_dataset, tmp_path, workers=2)
        loaded = load_dataset(tmp_path, workers=2)
        for name in ('train', 'query', 'gallery'):
            original, back = getattr(tiny_dataset, name), getattr(loaded, name)
            np.testing.assert_array_equal(back.ids, original.ids)
            np.testing.assert_array_equal(back.cams, original.cams)
            np.testing.assert_allclose(back.images, original.images, atol=0.5 / 255 + 1e-6)

    def test_missing_partition(self, tiny_dataset, tmp_path):
        save_dataset(tiny_dataset, tmp_path)
        for path in (tmp_path / 'gallery').iterdir():
            path.unlink()
        (tmp_path / 'gallery').rmdir()
        with pytest.raises(DataError, match='missing partition'):
            load_dataset(tmp_path)


class TestResize:
    def test_corners_are_kept(self, rng):
        img = rng.random((3, 12, 7)).astype(np.float32)
        out = resize(img, (30, 16))
        assert out.shape == (3, 30, 16)
        assert out.dtype == np.float32
        for y, x, sy, sx in [(0, 0, 0, 0), (0, -1, 0, -1), (-1, 0, -1, 0), (-1, -1, -1, -1)]:
            np.testing.assert_allclose(out[:, y, x], img[:, sy, sx], rtol=1e-6)

    def test_same_size_is_identity(self, rng):
        img = rng.random((3, 8, 5))
        np.testing.assert_allclose(resize(img, (8, 5)), img)

    def test_linear_ramp_stays_linear(self):
        ramp = np.tile(np.arange(5, dtype=np.float64), (1, 3, 1))
        out = resize(ramp, (3, 9))
        np.testing.assert_allclose(out[0, 0], np.linspace(0, 4, 9))

    def test_bad_target(self):
        with pytest.raises(ConfigurationError):
            resize(np.zeros((3, 4, 4)), (0, 4))

    def test_dataset_resize_keeps_labels(self, tiny_dataset):
        resized = resize_dataset(tiny_dataset, (32, 16))
        assert resized.image_shape == (3, 32, 16)
        assert len(resized.query) == len(tiny_dataset.query)
        np.testing.assert_array_equal(resized.gallery.views, tiny_dataset.gallery.views)
        np.testing.assert_allclose(resized.train.images[0], resize(tiny_dataset.train.images[0], (32, 16)))
        resized.validate()

    def test_dataset_resize_to_own_dims_is_a_no_op(self, tiny_dataset):
        assert resize_dataset(tiny_dataset, (64, 32)) is tiny_dataset
