"""
Grid sweeps. Every cell trains in its own subdirectory with its own seed, so
cells can run concurrently; the CSV lists rows in grid order regardless.
"""

import csv
import logging
from argparse import Namespace
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from models.dataio import ReidDataset, load_dataset
from models.ensemble import BaselineConfig, EnsembleConfig, build_model
from models.flops import count_baseline, count_model
from models.retrieval import FeatureMatrix, Metric, combine_features, evaluate, extract_features, head_report
from models.trainer import TrainConfig, train
from models.utils.errors import ConfigurationError
from models.utils.validation import build_config

from .commands import CONFIG_FILE, fit_to_dataset, output_dir, parse_heads, resolve_experiment, run_seed
from .experiment import ExperimentConfig, write_experiment_config

logger = logging.getLogger(__name__)

GRIDS = ('seed', 'learners', 'embedding', 'baseline-ensemble', 'ensemble-of-ensembles')
LEARNER_GRID = (2, 4, 8, 16)
EMBEDDING_GRID = (16, 32, 64, 128)
DEFAULT_MEMBERS = 4

COLUMNS = [
    'grid',
    'value',
    'seed',
    'members',
    'num_heads',
    'embedding_dim',
    'rank1_euclidean',
    'map_euclidean',
    'rank1_hamming',
    'map_hamming',
    'gmacs',
    'mean_head_map',
    'best_head_map',
    'cumulative_nondecreasing',
]


@dataclass(frozen=True)
class SweepCell:
    grid: str
    value: int
    seed: int
    kind: str
    config: EnsembleConfig | BaselineConfig

    @property
    def name(self) -> str:
        return f'{self.grid}_{self.value}_s{self.seed}'


@dataclass
class TrainedCell:
    cell: SweepCell
    query: FeatureMatrix
    gallery: FeatureMatrix


def _ensemble_variant(base: EnsembleConfig, learners: int, embedding_dim: int) -> EnsembleConfig:
    data = base.model_dump()
    data.update(learners_per_family=learners, embedding_dim=embedding_dim, block4_attach=None)
    return build_config(EnsembleConfig, data)


def plan_cells(grid: str, values: list[int] | None, seeds: list[int], config: ExperimentConfig, num_classes: int):
    """Cells to train for ``grid``. Member grids train max(values) models per seed and combine prefixes later."""
    base = config.ensemble_config(num_classes=num_classes)
    if grid == 'seed':
        return [SweepCell(grid, seed, seed, 'ensemble', base) for seed in seeds]
    if grid == 'learners':
        total = base.num_heads * base.embedding_dim
        n4 = base.backbone.block_sizes[3]
        candidates = values or [v for v in LEARNER_GRID if v // 2 <= n4 and total % v == 0]
        cells = []
        for heads in candidates:
            if heads % 2 or total % heads:
                raise ConfigurationError(f'ensemble size {heads} must be even and divide the total width {total}')
            variant = _ensemble_variant(base, heads // 2, total // heads)
            cells += [SweepCell(grid, heads, seed, 'ensemble', variant) for seed in seeds]
        return cells
    if grid == 'embedding':
        return [
            SweepCell(grid, h, seed, 'ensemble', _ensemble_variant(base, base.learners_per_family, h))
            for h in values or EMBEDDING_GRID
            for seed in seeds
        ]
    members = max(values) if values else DEFAULT_MEMBERS
    kind = 'baseline' if grid == 'baseline-ensemble' else 'ensemble'
    member_config = config.baseline_config(num_classes=num_classes) if kind == 'baseline' else base
    return [SweepCell(grid, m, seeds[0] + m - 1, kind, member_config) for m in range(1, members + 1)]


def _train_cell(cell: SweepCell, dataset: ReidDataset, train_config: TrainConfig, out: Path) -> TrainedCell:
    cell_dir = out / cell.name
    cell_dir.mkdir(parents=True, exist_ok=True)
    training_set, _ = dataset.train.training_set()
    model = build_model(cell.kind, cell.config, cell.seed)
    cell_train = build_config(TrainConfig, {**train_config.model_dump(), 'seed': cell.seed, 'workers': 1})
    train(model, training_set, cell_train, log_path=cell_dir / 'train_log.csv', checkpoint_dir=cell_dir)
    query, gallery = (
        extract_features(model, part.images, part.ids, part.cams) for part in (dataset.query, dataset.gallery)
    )
    logger.info(f'sweep cell {cell.name} trained')
    return TrainedCell(cell, query, gallery)


def _gmacs(cell: SweepCell) -> float:
    report = count_model(cell.config) if cell.kind == 'ensemble' else count_baseline(cell.config)
    return report.total_gmacs


def score_row(grid: str, value: int, seed: int, members: int, gmacs: float, query, gallery, workers: int) -> dict:
    euclidean = evaluate(query, gallery, Metric.EUCLIDEAN, workers=workers)
    hamming = evaluate(query, gallery, Metric.HAMMING, workers=workers)
    row = {
        'grid': grid,
        'value': value,
        'seed': seed,
        'members': members,
        'num_heads': query.num_heads,
        'embedding_dim': query.head_dims[0],
        'rank1_euclidean': euclidean.rank1,
        'map_euclidean': euclidean.mean_ap,
        'rank1_hamming': hamming.rank1,
        'map_hamming': hamming.mean_ap,
        'gmacs': gmacs,
        'mean_head_map': '',
        'best_head_map': '',
        'cumulative_nondecreasing': '',
    }
    if query.num_heads > 1:
        report = head_report(query, gallery, (Metric.EUCLIDEAN,), workers=workers)
        singles = [s.mean_ap for s in report.select('single', Metric.EUCLIDEAN)]
        cumulative = [s.mean_ap for s in report.select('cumulative', Metric.EUCLIDEAN)]
        steps = np.diff(cumulative)
        row.update(
            mean_head_map=float(np.mean(singles)),
            best_head_map=float(np.max(singles)),
            cumulative_nondecreasing=float(np.mean(steps >= 0)) if steps.size else 1.0,
        )
    return row


def _rows(trained: list[TrainedCell], workers: int) -> list[dict]:
    first = trained[0].cell
    if first.grid not in ('baseline-ensemble', 'ensemble-of-ensembles'):
        return [
            score_row(t.cell.grid, t.cell.value, t.cell.seed, 1, _gmacs(t.cell), t.query, t.gallery, workers)
            for t in trained
        ]
    single = _gmacs(first)
    rows = []
    for m in range(1, len(trained) + 1):
        query = combine_features([t.query for t in trained[:m]])
        gallery = combine_features([t.gallery for t in trained[:m]])
        rows.append(score_row(first.grid, m, first.seed, m, m * single, query, gallery, workers))
    return rows


def cmd_sweep(args: Namespace) -> int:
    if args.grid not in GRIDS:
        raise ConfigurationError(f'unknown grid {args.grid!r}; choose from {", ".join(GRIDS)}')
    config = resolve_experiment(args)
    dataset = load_dataset(config.data.root, workers=config.train.workers)
    config, dataset = fit_to_dataset(config, dataset)
    base_seed = run_seed(args, config)
    count = args.seeds if args.seeds is not None else (5 if args.grid == 'seed' else 1)
    seeds = list(range(base_seed, base_seed + count))
    values = parse_heads(args.values, 'sweep values') if args.values else None

    _, classes = dataset.train.training_set()
    cells = plan_cells(args.grid, values, seeds, config, len(classes))
    out = output_dir(args, config, f'sweep_{args.grid}')
    write_experiment_config(out / CONFIG_FILE, config, base_seed, f'sweep --grid {args.grid}')
    train_config = config.train_config()
    logger.info(f'sweep {args.grid}: {len(cells)} cells on {config.train.workers} workers')

    with ThreadPoolExecutor(max_workers=config.train.workers) as pool:
        trained = list(pool.map(lambda cell: _train_cell(cell, dataset, train_config, out), cells))

    rows = _rows(trained, config.train.workers)
    with open(out / f'sweep_{args.grid}.csv', 'w', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    print(f'[OK] {len(rows)} sweep rows written to {out / f"sweep_{args.grid}.csv"}')
    return 0
