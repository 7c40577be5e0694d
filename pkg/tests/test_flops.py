import pytest

from app.cli.profiles import PROFILES
from models.densenet_backbone import densenet121, mini_densenet
from models.ensemble import BaselineConfig, EnsembleConfig, TapLayout
from models.flops import LayerCostSpec, baseline_ensemble_curve, count_baseline, count_layer, count_model, output_shape
from models.utils import ConfigurationError


def densenet121_backbone_macs() -> int:
    """Hand walk of DenseNet121 at 3x384x128 with the block dims written out."""
    total = 64 * 3 * 7 * 7 * 192 * 64
    channels = 64
    for size, (h, w) in zip((6, 12, 24, 16), ((96, 32), (48, 16), (24, 8), (12, 4))):
        for _ in range(size):
            total += 128 * channels * h * w + 32 * 128 * 9 * h * w
            channels += 32
        if (h, w) != (12, 4):
            total += (channels // 2) * channels * h * w
            channels //= 2
    return total


@pytest.fixture
def full_ensemble():
    return EnsembleConfig(backbone=densenet121(), learners_per_family=8, embedding_dim=512, num_classes=751)


@pytest.fixture
def full_baseline():
    return BaselineConfig(backbone=densenet121(), embedding_dim=1024, num_classes=751)


class TestLayerCosts:
    def test_conv(self):
        spec = LayerCostSpec(kind='conv2d', out_channels=8, kernel=3, pad=1)
        assert output_shape(spec, (3, 10, 10)) == (8, 10, 10)
        assert count_layer(spec, (3, 10, 10)) == 8 * 3 * 9 * 100

    def test_strided_conv_floors(self):
        spec = LayerCostSpec(kind='conv2d', out_channels=4, kernel=7, stride=2, pad=3)
        assert output_shape(spec, (3, 65, 33)) == (4, 33, 17)

    def test_linear_counts_flattened_input(self):
        assert count_layer(LayerCostSpec(kind='linear', out_features=5), (2, 3, 4)) == 5 * 24

    @pytest.mark.parametrize('kind', ['batchnorm', 'relu', 'tanh', 'avgpool2d', 'global_avg_pool', 'flatten'])
    def test_free_layers(self, kind):
        assert count_layer(LayerCostSpec(kind=kind, kernel=2, stride=2), (4, 6, 6)) == 0

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match='unknown layer kind'):
            output_shape(LayerCostSpec(kind='maxpool'), (1, 2, 2))

    def test_kernel_too_large(self):
        with pytest.raises(ConfigurationError):
            output_shape(LayerCostSpec(kind='conv2d', out_channels=1, kernel=5), (1, 3, 3))


class TestFullScale:
    def test_backbone_matches_hand_walk(self, full_ensemble, full_baseline):
        expected = densenet121_backbone_macs()
        assert count_model(full_ensemble).shared_macs == expected
        assert count_baseline(full_baseline).shared_macs == expected

    def test_baseline_near_2_82_g(self, full_baseline):
        report = count_baseline(full_baseline)
        assert report.total_gmacs == pytest.approx(2.82, rel=0.05)
        assert report.head_macs == 1024 * 1024

    def test_compact_ensemble_near_2_85_g(self):
        profile = PROFILES['densenet121-compact']
        assert profile.tap_layout is TapLayout.COMPACT
        config = EnsembleConfig(
            backbone=profile.backbone,
            learners_per_family=profile.learners_per_family,
            embedding_dim=profile.embedding_dim,
            tap_layout=profile.tap_layout,
        )
        report = count_model(config)
        assert report.total_gmacs == pytest.approx(2.85, rel=0.05)
        assert report.shared_fraction >= 0.98
        assert report.head_macs == 512 * (8 * 64 * 12 * 4 + 8 * 32 * 12 * 4)

    def test_spatial_ensemble_heads(self, full_ensemble):
        report = count_model(full_ensemble)
        block3 = 8 * 128 * 24 * 8
        block4 = sum((512 + 32 * i) * 12 * 4 for i in range(2, 17, 2))
        assert report.head_macs == 512 * (block3 + block4)
        assert report.total_gmacs == pytest.approx(3.03, abs=0.01)
        assert 0.9 < report.shared_fraction < 0.93

    def test_head_subset(self, full_ensemble):
        all_heads = count_model(full_ensemble)
        first = count_model(full_ensemble, head_subset=[0])
        last = count_model(full_ensemble, head_subset=[15])
        assert first.shared_macs == all_heads.shared_macs
        assert first.head_macs == 512 * 128 * 24 * 8
        assert last.head_macs == 512 * 1024 * 12 * 4

    def test_head_subset_out_of_range(self, full_ensemble):
        with pytest.raises(ConfigurationError, match='head 16'):
            count_model(full_ensemble, head_subset=[16])

    def test_modules(self, full_ensemble):
        modules = count_model(full_ensemble).by_module()
        assert {'stem', 'block1', 'block4', 'transition3', 'head0', 'head15'} <= set(modules)
        assert 'transition4' not in modules
        operators = count_model(full_ensemble).by_operator()
        assert operators['avgpool2d'] == 0 and operators['flatten'] == 0


class TestMini:
    def test_mini_heads_are_counted(self, mini_config):
        report = count_model(mini_config)
        assert report.head_macs == 16 * sum(mini_config.flatten_dims())
        assert 0.0 < report.shared_fraction < 1.0

    def test_mini_baseline_pools_56_channels(self):
        report = count_baseline(BaselineConfig(backbone=mini_densenet(), embedding_dim=64, num_classes=20))
        assert report.head_macs == 56 * 64


class TestCurve:
    def test_members_scale_linearly(self, full_ensemble, full_baseline):
        rows = baseline_ensemble_curve(4, full_baseline, full_ensemble, m_max=2)
        baseline = [r for r in rows if r.family == 'baseline-ensemble']
        ensemble = [r for r in rows if r.family == 'ensemble-of-ensembles']
        assert [r.members for r in baseline] == [1, 2, 3, 4]
        assert [r.members for r in ensemble] == [1, 2]
        assert baseline[3].gmacs == pytest.approx(4 * baseline[0].gmacs)
        assert ensemble[1].gmacs == pytest.approx(2 * count_model(full_ensemble).total_gmacs)

    def test_needs_at_least_one_member(self, full_ensemble, full_baseline):
        with pytest.raises(ConfigurationError):
            baseline_ensemble_curve(0, full_baseline, full_ensemble)


class TestScaling:
    def test_pointwise_conv_at_block4_resolution(self):
        spec = LayerCostSpec(kind='conv2d', out_channels=32, kernel=1, pad=0)
        assert count_layer(spec, (128, 12, 4)) == 196_608

    def test_doubling_area_doubles_every_conv(self, mini_config):
        tall = EnsembleConfig(
            backbone=mini_densenet(input_shape=(3, 128, 32)), learners_per_family=4, embedding_dim=16, num_classes=5
        )
        small, large = count_model(mini_config), count_model(tall)
        assert [r.name for r in small.records] == [r.name for r in large.records]
        for a, b in zip(small.records, large.records):
            if a.name.startswith('stem'):
                continue
            assert b.macs == 2 * a.macs, a.name
        assert large.total_macs == 2 * small.total_macs
