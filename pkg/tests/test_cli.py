import csv
import json
import re

import pytest

from app.cli import ExperimentConfig, load_experiment_config, main, write_experiment_config
from app.cli.commands import fit_to_dataset, parse_heads
from models.dataio import Partition, ReidDataset
from models.utils import ConfigurationError

TINY_INI = """
[data]
n_train_ids = 4
n_test_ids = 3
views_per_id = 4
n_cams = 2

[model]
learners_per_family = 2
embedding_dim = 8

[train]
batch_size = 4
epochs = 2
checkpoint_every = 1
"""


@pytest.fixture
def tiny_ini(tmp_path):
    path = tmp_path / 'tiny.ini'
    path.write_text(TINY_INI)
    return path


class TestParseHeads:
    @pytest.mark.parametrize('value', [None, 'all', ' ALL '])
    def test_all(self, value):
        assert parse_heads(value) is None

    def test_list(self):
        assert parse_heads('0,3, 5') == [0, 3, 5]

    @pytest.mark.parametrize('value', ['a,b', '-1', ',', '1.5'])
    def test_invalid(self, value):
        with pytest.raises(ConfigurationError):
            parse_heads(value)


class TestExperimentConfig:
    def test_defaults_follow_mini_profile(self):
        config = ExperimentConfig()
        ensemble = config.ensemble_config(num_classes=20)
        assert ensemble.num_heads == 8 and ensemble.embedding_dim == 64
        assert ensemble.backbone.input_shape == (3, 64, 32)
        train = config.train_config()
        assert (train.lr0, train.batch_size, train.epochs, train.decay_epoch) == (0.05, 8, 30, 24)

    def test_epoch_override_moves_decay(self):
        config = ExperimentConfig().with_overrides(train={'epochs': 10})
        assert config.train_config().decay_epoch == 8

    def test_explicit_decay_wins(self):
        config = ExperimentConfig().with_overrides(train={'epochs': 10, 'decay_epoch': 3})
        assert config.train_config().decay_epoch == 3

    def test_no_random_erasing(self):
        config = ExperimentConfig().with_overrides(augmentation={'random_erasing': False})
        assert not config.train_config().augmentation.random_erasing.enabled

    def test_file_values(self, tiny_ini):
        config = load_experiment_config(tiny_ini)
        assert config.data.n_cams == 2
        assert config.ensemble_config(num_classes=4).num_heads == 4
        assert config.train_config().batch_size == 4

    def test_written_config_reloads(self, tiny_ini, tmp_path):
        config = load_experiment_config(tiny_ini).with_overrides(
            model={'block4_attach': (2, 4)}, eval={'metrics': ('hamming',)}
        )
        write_experiment_config(tmp_path / 'out.ini', config, seed=7, command='train')
        text = (tmp_path / 'out.ini').read_text()
        assert '[run]' in text and 'block4_attach = 2,4' in text
        reloaded = load_experiment_config(tmp_path / 'out.ini')
        assert reloaded.run.seed == 7 and reloaded.run.command == 'train'
        assert reloaded.model.block4_attach == (2, 4)
        assert reloaded.eval.metrics == ('hamming',)
        assert reloaded.ensemble_config(4) == config.ensemble_config(4)

    @pytest.mark.parametrize(
        'text,message',
        [
            ('[bogus]\nx = 1\n', 'bogus'),
            ('[train]\nlearning_rate = 0.1\n', 'learning_rate'),
            ('[model]\nprofile = huge\n', 'profile'),
            ('no section header\n', 'cannot read'),
        ],
    )
    def test_rejected_files(self, tmp_path, text, message):
        path = tmp_path / 'bad.ini'
        path.write_text(text)
        with pytest.raises(ConfigurationError, match=message):
            load_experiment_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match='cannot read'):
            load_experiment_config(tmp_path / 'absent.ini')

    def test_full_profile_resizes_images(self, tiny_dataset):
        config = ExperimentConfig().with_overrides(model={'profile': 'densenet121'})
        fitted, dataset = fit_to_dataset(config, tiny_dataset)
        assert fitted.densenet_config().input_shape == (3, 384, 128)
        assert dataset.image_shape == (3, 384, 128)
        for name in ('train', 'query', 'gallery'):
            before, after = getattr(tiny_dataset, name), getattr(dataset, name)
            assert after.ids.tolist() == before.ids.tolist() and after.cams.tolist() == before.cams.tolist()
            assert 0.0 <= after.images.min() and after.images.max() <= 1.0

    def test_full_profile_needs_rgb_images(self, tiny_dataset):
        grey = ReidDataset(
            *(
                Partition(part.images[:, :1], part.ids, part.cams, part.views)
                for part in (tiny_dataset.train, tiny_dataset.query, tiny_dataset.gallery)
            )
        )
        config = ExperimentConfig().with_overrides(model={'profile': 'densenet121'})
        with pytest.raises(ConfigurationError, match='expects'):
            fit_to_dataset(config, grey)

    def test_mini_profile_adopts_image_dims(self, tiny_dataset):
        config = ExperimentConfig().with_overrides(data={'height': 128, 'width': 64})
        fitted, dataset = fit_to_dataset(config, tiny_dataset)
        assert fitted.densenet_config().input_shape == (3, 64, 32)
        assert dataset is tiny_dataset


class TestExitCodes:
    def test_unknown_command(self):
        assert main(['bogus']) == 1

    def test_missing_required_argument(self):
        assert main(['eval']) == 1

    def test_missing_dataset(self, tmp_path):
        assert main(['train', '--data', str(tmp_path / 'nowhere'), '--out', str(tmp_path / 'out')]) == 2

    def test_missing_features(self, tmp_path):
        assert main(['eval', '--features', str(tmp_path)]) == 2

    def test_heads_on_baseline(self):
        assert main(['flops', '--model', 'baseline', '--heads', '0']) == 1


class TestFlopsCommand:
    def test_compact_profile_total(self, capsys):
        assert main(['flops', '--profile', 'densenet121-compact']) == 0
        out = capsys.readouterr().out
        total = float(re.search(r'([\d.]+) GMACs per image', out).group(1))
        assert total == pytest.approx(2.85, rel=0.05)
        assert 'transition3' in out

    def test_csv_and_curve(self, tmp_path, capsys):
        path = tmp_path / 'layers.csv'
        assert main(['flops', '--csv', str(path), '--curve', '3']) == 0
        rows = list(csv.DictReader(path.read_text().splitlines()))
        assert rows[0]['name'] == 'stem.conv'
        assert any(r['name'] == 'head7.embed' and r['shared'] == '0' for r in rows)
        curve = list(csv.DictReader((tmp_path / 'layers_curve.csv').read_text().splitlines()))
        assert len(curve) == 6
        echoed = load_experiment_config(tmp_path / 'experiment.ini')
        assert echoed.run.command == 'flops' and echoed.model.profile == 'mini'


class TestGradCheckCommand:
    def test_primitives_only(self, tmp_path, capsys):
        code = main(['grad-check', '--seeds', '1', '--model-seeds', '0', '--out', str(tmp_path)])
        assert code == 0
        rows = list(csv.DictReader((tmp_path / 'grad_check.csv').read_text().splitlines()))
        assert len(rows) == 12
        assert all(r['passed'] == '1' for r in rows)


class TestPipeline:
    def test_gen_train_extract_eval(self, tmp_path, tiny_ini, capsys):
        data, run, features = tmp_path / 'data', tmp_path / 'run', tmp_path / 'features'
        common = ['--config', str(tiny_ini), '--data', str(data)]

        assert main(['gen-data', *common, '--seed', '2']) == 0
        assert (data / 'experiment.ini').is_file()
        assert len(list((data / 'query').iterdir())) == 6
        assert 'raw-pixel euclidean' in capsys.readouterr().out

        assert main(['train', *common, '--out', str(run), '--seed', '1']) == 0
        for name in ('train_log.csv', 'epoch001.ckpt', 'epoch002.ckpt', 'final.ckpt', 'experiment.ini'):
            assert (run / name).is_file()
        assert len((run / 'train_log.csv').read_text().splitlines()) == 3
        assert load_experiment_config(run / 'experiment.ini').run.seed == 1

        checkpoint = str(run / 'final.ckpt')
        assert main(['extract', *common, '--checkpoint', checkpoint, '--checkpoint', checkpoint]) == 1
        assert main(['extract', *common, '--checkpoint', checkpoint, '--out', str(features)]) == 0
        layout = json.loads((features / 'heads.json').read_text())
        assert layout['head_dims'] == [8, 8, 8, 8]
        for name in ('query.feat', 'gallery.feat', 'query.codes', 'gallery.codes'):
            assert (features / name).is_file()

        assert main(['eval', *common, '--features', str(features), '--metric', 'both']) == 0
        for name in ('cmc_real_euclidean.csv', 'cmc_real_hamming.csv', 'ranking_real_euclidean.csv'):
            assert (features / name).is_file()
        report = list(csv.DictReader((features / 'head_report.csv').read_text().splitlines()))
        assert len(report) == 2 * (4 + 1 + 4 + 1)

        assert main(['eval', *common, '--features', str(features), '--input', 'codes', '--heads', '1,3']) == 0
        assert (features / 'cmc_codes_euclidean.csv').is_file()
        assert 'on codes' in capsys.readouterr().out

    def test_combined_checkpoints(self, tmp_path, tiny_ini):
        data, run, features = tmp_path / 'data', tmp_path / 'run', tmp_path / 'features'
        common = ['--config', str(tiny_ini), '--data', str(data)]
        assert main(['gen-data', *common]) == 0
        assert main(['train', *common, '--out', str(run), '--model', 'baseline', '--epochs', '1']) == 0
        checkpoint = str(run / 'final.ckpt')
        args = ['extract', *common, '--checkpoint', checkpoint, '--checkpoint', checkpoint, '--combine']
        assert main([*args, '--out', str(features)]) == 0
        assert json.loads((features / 'heads.json').read_text())['head_dims'] == [56, 56]


@pytest.mark.slow
class TestSeedGrid:
    def test_ensemble_beats_its_heads_and_codes_track_floats(self, tmp_path):
        data, out = tmp_path / 'data', tmp_path / 'sweep'
        assert main(['gen-data', '--data', str(data)]) == 0
        assert main(['sweep', '--grid', 'seed', '--data', str(data), '--out', str(out), '--workers', '5']) == 0
        rows = list(csv.DictReader((out / 'sweep_seed.csv').read_text().splitlines()))
        assert len(rows) == 5

        full = [float(r['map_euclidean']) for r in rows]
        mean_head = [float(r['mean_head_map']) for r in rows]
        best_head = [float(r['best_head_map']) for r in rows]
        assert sum(f >= m for f, m in zip(full, mean_head)) >= 4
        assert sum(f >= b for f, b in zip(full, best_head)) >= 3
        # every run has 2L-1 cumulative steps, so the run average is the step fraction
        assert sum(float(r['cumulative_nondecreasing']) for r in rows) / len(rows) >= 0.8

        gaps = [abs(float(r['map_hamming']) - float(r['map_euclidean'])) for r in rows]
        assert sorted(gaps)[len(gaps) // 2] <= 0.10
