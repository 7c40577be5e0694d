import numpy as np
import pytest

from models.densenet_backbone import densenet121, mini_densenet
from models.ensemble import (
    BaseLearnerOutput,
    BaselineConfig,
    EnsembleConfig,
    EnsembleModel,
    TapLayout,
    backward_and_partition,
    baseline_forward,
    build_model,
    ensemble_loss,
    group_widths,
    load_checkpoint,
    model_grad_check,
    save_checkpoint,
    split_channel_groups,
)
from models.tensor_autodiff import Mode
from models.tensor_autodiff.functional import softmax_cross_entropy
from models.utils import ConfigurationError, DataError, build_config


@pytest.fixture
def images(rng):
    return rng.random((3, 3, 64, 32), dtype=np.float32)


class TestEnsembleConfig:
    @pytest.mark.parametrize('learners,embedding_dim', [(8, 512), (4, 1024), (2, 2048)])
    def test_total_width_pairings(self, learners, embedding_dim):
        config = EnsembleConfig(backbone=densenet121(), learners_per_family=learners, embedding_dim=embedding_dim)
        assert config.num_heads * config.embedding_dim == 8192

    def test_default_attach_spreads_over_block4(self):
        config = EnsembleConfig(backbone=densenet121(), learners_per_family=8, embedding_dim=512)
        assert config.attach_indices() == (2, 4, 6, 8, 10, 12, 14, 16)

    def test_attach_rounds_up(self):
        config = EnsembleConfig(backbone=densenet121(), learners_per_family=3)
        assert config.attach_indices() == (6, 11, 16)

    def test_spatial_head_shapes(self, mini_config):
        assert mini_config.head_input_shapes() == [
            (12, 4, 2),
            (12, 4, 2),
            (12, 4, 2),
            (12, 4, 2),
            (32, 2, 1),
            (40, 2, 1),
            (48, 2, 1),
            (56, 2, 1),
        ]

    def test_compact_head_shapes(self):
        config = EnsembleConfig(learners_per_family=4, tap_layout=TapLayout.COMPACT)
        assert config.head_input_shapes() == [(6, 2, 1)] * 4 + [(8, 2, 1)] * 4

    def test_densenet121_spatial_flatten_dims(self):
        config = EnsembleConfig(backbone=densenet121(), learners_per_family=8, embedding_dim=512)
        dims = config.flatten_dims()
        assert dims[:8] == [128 * 24 * 8] * 8
        assert dims[8] == (512 + 2 * 32) * 12 * 4
        assert dims[-1] == 1024 * 12 * 4

    @pytest.mark.parametrize(
        'overrides,message',
        [
            ({'block4_attach': (1, 2, 4)}, 'needs 4 entries'),
            ({'block4_attach': (1, 3, 3, 4)}, 'strictly increasing'),
            ({'block4_attach': (1, 2, 3, 3)}, 'strictly increasing'),
            ({'block4_attach': (0, 1, 2, 4)}, 'must lie in'),
            ({'block4_attach': (2, 3, 4, 5)}, 'must lie in'),
            ({'learners_per_family': 49, 'block4_attach': None}, 'cannot split 48'),
            ({'embedding_dim': 0}, 'embedding_dim'),
            ({'num_classes': 1}, 'num_classes'),
            ({'heads': 8}, 'heads'),
        ],
    )
    def test_invalid_configs(self, overrides, message):
        with pytest.raises(ConfigurationError, match=message):
            build_config(EnsembleConfig, {'learners_per_family': 4, **overrides})

    def test_attach_must_end_at_last_layer(self):
        with pytest.raises(ConfigurationError, match='end at 4'):
            build_config(EnsembleConfig, learners_per_family=2, block4_attach=(1, 3))

    def test_group_widths_remainder_goes_last(self):
        assert group_widths(10, 3) == [3, 3, 4]
        assert sum(group_widths(1024, 8)) == 1024


class TestSplitChannelGroups:
    def test_contiguous_groups(self):
        x = np.arange(2 * 10 * 2 * 2, dtype=np.float32).reshape(2, 10, 2, 2)
        groups = split_channel_groups(x, 3)
        assert [g.shape[1] for g in groups] == [3, 3, 4]
        np.testing.assert_array_equal(np.concatenate(groups, axis=1), x)

    @pytest.mark.parametrize('groups', [0, 11])
    def test_bad_group_count(self, groups):
        with pytest.raises(ConfigurationError):
            split_channel_groups(np.zeros((1, 10, 2, 2)), groups)


class TestEnsembleModel:
    def test_forward_shapes(self, mini_config, images, rng):
        model = EnsembleModel(mini_config, rng)
        outputs = model.forward(images, Mode.TRAIN)
        assert len(outputs) == 8
        for output in outputs:
            assert output.embedding.shape == (3, 16)
            assert output.logits.shape == (3, 5)
            assert np.all(np.abs(output.embedding) < 1.0)

    def test_backward_returns_input_gradient(self, mini_config, images, rng):
        model = EnsembleModel(mini_config, rng)
        loss = ensemble_loss(model.forward(images, Mode.TRAIN), np.array([0, 1, 2]))
        assert model.backward(loss.grad_logits).shape == images.shape

    def test_backward_needs_one_gradient_per_head(self, mini_config, images, rng):
        model = EnsembleModel(mini_config, rng)
        loss = ensemble_loss(model.forward(images, Mode.TRAIN), np.array([0, 1, 2]))
        with pytest.raises(ConfigurationError, match='expected 8'):
            model.backward(loss.grad_logits[:-1])

    def test_wrong_input_dims(self, mini_config, rng):
        model = EnsembleModel(mini_config, rng)
        with pytest.raises(ConfigurationError):
            model.forward(np.zeros((1, 3, 32, 32), dtype=np.float32), Mode.EVAL)

    @pytest.mark.parametrize('seed', range(5))
    def test_heads_differ_at_init(self, mini_config, images, seed):
        outputs = build_model('ensemble', mini_config, seed=seed).forward(images, Mode.TRAIN)
        embeddings = [output.embedding for output in outputs]
        for i in range(len(embeddings)):
            for j in range(i + 1, len(embeddings)):
                gap = np.abs(embeddings[i] - embeddings[j]).max()
                assert gap > 1e-2 * np.abs(embeddings[i]).max(), (i, j)

    def test_head_parameter_names(self, mini_config, rng):
        model = EnsembleModel(mini_config, rng)
        names = model.head_parameter_names(5)
        assert names and all(name.startswith('head5.') for name in names)


class TestLosses:
    def test_total_is_sum_of_heads(self, mini_config, images, rng):
        model = EnsembleModel(mini_config, rng)
        loss = ensemble_loss(model.forward(images, Mode.TRAIN), np.array([0, 3, 4]))
        assert loss.per_head.shape == (8, 3)
        np.testing.assert_allclose(loss.total, loss.per_head.sum(axis=0), rtol=1e-6)
        # near-zero head init: every head starts at log(C)
        np.testing.assert_allclose(loss.mean_per_head, np.log(5), rtol=1e-2)

    def test_weights_scale_heads(self, mini_config, images, rng):
        model = EnsembleModel(mini_config, rng)
        outputs = model.forward(images, Mode.TRAIN)
        weights = [0.5] * 4 + [2.0] * 4
        loss = ensemble_loss(outputs, np.array([0, 3, 4]), weights)
        expected = 0.5 * loss.per_head[:4].sum(axis=0) + 2.0 * loss.per_head[4:].sum(axis=0)
        np.testing.assert_allclose(loss.total, expected, rtol=1e-6)

    def test_weight_count_mismatch(self, mini_config, images, rng):
        outputs = EnsembleModel(mini_config, rng).forward(images, Mode.TRAIN)
        with pytest.raises(ConfigurationError, match='3 head weights for 8 heads'):
            ensemble_loss(outputs, np.array([0, 1, 2]), [1.0, 1.0, 1.0])

    def test_empty_outputs(self):
        with pytest.raises(ConfigurationError):
            ensemble_loss([], np.array([0]))

    def test_single_head_is_plain_cross_entropy(self, rng):
        logits = rng.standard_normal((4, 6))
        labels = np.array([0, 5, 2, 2])
        loss = ensemble_loss([BaseLearnerOutput(embedding=np.zeros((4, 3)), logits=logits)], labels)
        expected, grad = softmax_cross_entropy(logits, labels)
        assert loss.per_head.shape == (1, 4)
        np.testing.assert_allclose(loss.total, expected)
        assert loss.mean_total == pytest.approx(expected.mean())
        np.testing.assert_allclose(loss.grad_logits[0], grad / 4)

    def test_shared_gradient_is_sum_of_head_gradients(self, images):
        config = EnsembleConfig(learners_per_family=2, embedding_dim=8, num_classes=3, head_init_std=0.1)
        model = EnsembleModel(config, np.random.default_rng(5), dtype=np.float64)
        x, labels = images.astype(np.float64), np.array([0, 1, 2])

        joint = backward_and_partition(model, ensemble_loss(model.forward(x, Mode.TRAIN), labels))
        summed = {name: np.zeros_like(g) for name, g in joint.shared.items()}
        for only in range(model.num_heads):
            weights = [1.0 if i == only else 0.0 for i in range(model.num_heads)]
            alone = backward_and_partition(model, ensemble_loss(model.forward(x, Mode.TRAIN), labels, weights))
            for name, g in alone.shared.items():
                summed[name] += g
            for name, g in alone.heads[only].items():
                np.testing.assert_allclose(g, joint.heads[only][name], rtol=0, atol=1e-12)

        for name, g in joint.shared.items():
            assert np.max(np.abs(g - summed[name])) <= 1e-10, name

    @pytest.mark.parametrize('only', [0, 3, 4, 7])
    def test_partition_isolates_heads(self, mini_config, images, rng, only):
        model = EnsembleModel(mini_config, rng)
        weights = [1.0 if i == only else 0.0 for i in range(8)]
        loss = ensemble_loss(model.forward(images, Mode.TRAIN), np.array([0, 1, 2]), weights)
        gradients = backward_and_partition(model, loss)

        assert len(gradients.heads) == 8
        for index, head in enumerate(gradients.heads):
            assert set(head) == set(model.head_parameter_names(index))
            total = sum(float(np.abs(g).sum()) for g in head.values())
            assert (total > 0) == (index == only)
        assert any(np.abs(g).sum() > 0 for g in gradients.shared.values())
        assert all(name.startswith('backbone.') for name in gradients.shared)


class TestGradients:
    @pytest.mark.parametrize('layout', list(TapLayout))
    def test_whole_model(self, layout):
        config = EnsembleConfig(learners_per_family=2, embedding_dim=8, num_classes=3, tap_layout=layout)
        report = model_grad_check(config, seed=0)
        assert report.max_rel_error <= 1e-4, report.errors

    def test_heads_keep_configured_init(self, mini_config):
        report = model_grad_check(mini_config, seed=1, head_init_std=None, max_entries=1)
        assert report.checked_entries > 0


class TestCheckpoint:
    def test_round_trip_preserves_eval_outputs(self, mini_config, images, tmp_path):
        model = build_model('ensemble', mini_config, seed=4)
        model.forward(images, Mode.TRAIN)
        before = model.forward(images, Mode.EVAL)

        save_checkpoint(tmp_path / 'model.ckpt', model)
        restored = load_checkpoint(tmp_path / 'model.ckpt')
        after = restored.forward(images, Mode.EVAL)

        assert restored.config == mini_config
        for a, b in zip(before, after):
            np.testing.assert_array_equal(a.embedding, b.embedding)
            np.testing.assert_array_equal(a.logits, b.logits)

    def test_trailing_bytes_rejected(self, mini_config, tmp_path):
        path = tmp_path / 'model.ckpt'
        save_checkpoint(path, build_model('ensemble', mini_config, seed=0))
        with open(path, 'ab') as fh:
            fh.write(b'\x00')
        with pytest.raises(DataError, match='trailing bytes'):
            load_checkpoint(path)

    def test_truncated_checkpoint(self, mini_config, tmp_path):
        path = tmp_path / 'model.ckpt'
        save_checkpoint(path, build_model('ensemble', mini_config, seed=0))
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_unknown_kind(self, mini_config):
        with pytest.raises(DataError, match='unknown model kind'):
            build_model('resnet', mini_config, seed=0)

    def test_build_from_dict(self):
        model = build_model('baseline', {'num_classes': 4}, seed=0)
        assert model.config.num_classes == 4
        assert model.kind == 'baseline'


class TestBaseline:
    def test_shapes(self, images, rng):
        config = BaselineConfig(backbone=mini_densenet(), num_classes=5)
        model = build_model('baseline', config, seed=0)
        embedding, logits = baseline_forward(images, model, Mode.TRAIN)
        assert embedding.shape == (3, 56)
        assert logits.shape == (3, 5)
        assert model.embedding_dims == [56]
        loss = ensemble_loss(model.forward(images, Mode.TRAIN), np.array([0, 1, 2]))
        assert model.backward(loss.grad_logits).shape == images.shape

    def test_pooled_features_are_non_negative(self, images):
        model = build_model('baseline', BaselineConfig(num_classes=3), seed=0)
        model.forward(images, Mode.TRAIN)
        embedding, _ = baseline_forward(images, model, Mode.EVAL)
        assert np.all(embedding >= 0)

    def test_single_gradient_only(self, images):
        model = build_model('baseline', BaselineConfig(num_classes=3), seed=0)
        loss = ensemble_loss(model.forward(images, Mode.TRAIN), np.array([0, 1, 2]))
        with pytest.raises(ConfigurationError, match='one head'):
            model.backward(loss.grad_logits * 2)
