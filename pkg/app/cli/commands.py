import csv
import json
import logging
from argparse import Namespace
from pathlib import Path

import numpy as np

from models.dataio import ReidDataset, generate_synthetic, load_dataset, resize_dataset, save_dataset
from models.ensemble import build_model, load_checkpoint, model_grad_check
from models.flops import baseline_ensemble_curve, count_baseline, count_model
from models.retrieval import (
    BinaryCodeMatrix,
    EvaluationReport,
    FeatureMatrix,
    Metric,
    cmc,
    combine_features,
    evaluate,
    extract_features,
    head_report,
    load_features,
    pack_bits,
    quantize,
    rank_gallery,
    save_features,
    unpack_bits,
    write_cmc_csv,
    write_ranking_csv,
)
from models.tensor_autodiff import grad_check
from models.trainer import train
from models.utils.errors import ConfigurationError, DataError

from .experiment import ExperimentConfig, load_experiment_config, write_experiment_config

logger = logging.getLogger(__name__)

CONFIG_FILE = 'experiment.ini'
HEADS_FILE = 'heads.json'

PRIMITIVE_CASES = [
    ({'kind': 'conv2d', 'out_channels': 4, 'kernel': 3, 'stride': 1, 'pad': 1}, [(2, 3, 5, 5)]),
    ({'kind': 'conv2d', 'out_channels': 3, 'kernel': 3, 'stride': 2, 'pad': 1}, [(2, 2, 7, 6)]),
    ({'kind': 'conv2d', 'out_channels': 5, 'kernel': 1, 'stride': 1, 'pad': 0}, [(3, 4, 3, 3)]),
    ({'kind': 'batchnorm', 'mode': 'train'}, [(4, 3, 3, 3)]),
    ({'kind': 'batchnorm', 'mode': 'eval'}, [(2, 3, 3, 2)]),
    ({'kind': 'relu'}, [(2, 3, 4, 4)]),
    ({'kind': 'tanh'}, [(2, 3, 4, 4)]),
    ({'kind': 'linear', 'out_features': 5}, [(3, 7)]),
    ({'kind': 'avgpool2d', 'window': 2}, [(2, 3, 4, 6)]),
    ({'kind': 'global_avg_pool'}, [(2, 3, 3, 4)]),
    ({'kind': 'concat_channels'}, [(2, 2, 3, 3), (2, 3, 3, 3), (2, 1, 3, 3)]),
    ({'kind': 'softmax_cross_entropy'}, [(4, 6)]),
]
PRIMITIVE_TOLERANCE = 1e-5
MODEL_TOLERANCE = 1e-4


def parse_heads(value: str | None, what: str = 'head list') -> list[int] | None:
    """``all`` (or nothing) -> None; ``0,3,5`` -> [0, 3, 5]."""
    if value is None or value.strip().lower() == 'all':
        return None
    try:
        heads = [int(v) for v in value.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f'{what} must be "all" or comma-separated integers, got {value!r}') from e
    if not heads or min(heads) < 0:
        raise ConfigurationError(f'{what} must hold non-negative integers, got {value!r}')
    return heads


def resolve_experiment(args: Namespace) -> ExperimentConfig:
    config = load_experiment_config(getattr(args, 'config', None))
    overrides = {
        'model': {
            'profile': getattr(args, 'profile', None),
            'kind': getattr(args, 'model', None),
        },
        'train': {
            'epochs': getattr(args, 'epochs', None),
            'workers': getattr(args, 'workers', None),
            'checkpoint_every': getattr(args, 'checkpoint_every', None),
        },
        'augmentation': {'random_erasing': False if getattr(args, 'no_random_erasing', False) else None},
        'data': {'root': getattr(args, 'data', None)},
    }
    return config.with_overrides(**overrides)


def fit_to_dataset(config: ExperimentConfig, dataset: ReidDataset) -> tuple[ExperimentConfig, ReidDataset]:
    """
    The mini profile adopts the dataset's image dims; full profiles keep their
    input dims and get the dataset resized to them.
    """
    channels, height, width = dataset.image_shape
    if config.model.profile == 'mini':
        return config.with_overrides(data={'height': height, 'width': width}), dataset
    expected = config.densenet_config().input_shape
    if expected[0] != channels:
        raise ConfigurationError(
            f'profile {config.model.profile} expects {expected} images, dataset has {dataset.image_shape}'
        )
    return config, resize_dataset(dataset, expected[1:])


def output_dir(args: Namespace, config: ExperimentConfig, command: str) -> Path:
    out = Path(args.out) if getattr(args, 'out', None) else Path(config.output.dir) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_seed(args: Namespace, config: ExperimentConfig) -> int:
    return args.seed if getattr(args, 'seed', None) is not None else config.train.seed


def _pixel_matrix(partition) -> FeatureMatrix:
    pixels = partition.pixel_features()
    return FeatureMatrix(pixels, partition.ids, partition.cams, (pixels.shape[1],))


def cmd_gen_data(args: Namespace) -> int:
    config = resolve_experiment(args)
    config = config.with_overrides(
        data={
            'n_train_ids': args.n_train_ids,
            'n_test_ids': args.n_test_ids,
            'views_per_id': args.views,
            'n_cams': args.cams,
            'height': args.height,
            'width': args.width,
            'seed': args.seed,
        }
    )
    data = config.data
    dataset = generate_synthetic(
        n_train_ids=data.n_train_ids,
        n_test_ids=data.n_test_ids,
        views_per_id=data.views_per_id,
        n_cams=data.n_cams,
        dims=(data.height, data.width),
        seed=data.seed,
    )
    root = Path(data.root)
    save_dataset(dataset, root, workers=config.train.workers)
    write_experiment_config(root / CONFIG_FILE, config, data.seed, 'gen-data')

    raw = evaluate(_pixel_matrix(dataset.query), _pixel_matrix(dataset.gallery), Metric.EUCLIDEAN)
    print(f'[OK] Synthetic dataset written to {root}')
    print(f'raw-pixel euclidean: rank-1 {raw.rank1:.4f} mAP {raw.mean_ap:.4f}')
    return 0


def cmd_train(args: Namespace) -> int:
    config = resolve_experiment(args)
    dataset = load_dataset(config.data.root, workers=config.train.workers)
    config, dataset = fit_to_dataset(config, dataset)
    seed = run_seed(args, config)
    config = config.with_overrides(train={'seed': seed})
    training_set, classes = dataset.train.training_set()

    kind = config.model.kind
    if kind == 'ensemble':
        model_config = config.ensemble_config(num_classes=len(classes))
    else:
        model_config = config.baseline_config(num_classes=len(classes))
    out = output_dir(args, config, 'train')
    write_experiment_config(out / CONFIG_FILE, config, seed, 'train')

    model = build_model(kind, model_config, seed)
    logger.info(f'training {kind} with {model.num_heads} heads on {len(training_set.labels)} images')
    result = train(model, training_set, config.train_config(), log_path=out / 'train_log.csv', checkpoint_dir=out)

    last = result.log[-1]
    print(f'[OK] {kind} trained for {len(result.log)} epochs ({result.steps} steps), final loss {last.total_loss:.4f}')
    print(f'checkpoint: {out / "final.ckpt"}')
    return 0


def _extract_one(path: str, dataset: ReidDataset, heads, batch_size: int) -> tuple[FeatureMatrix, FeatureMatrix]:
    model = load_checkpoint(path)
    expected = model.config.backbone.input_shape
    if expected[0] != dataset.image_shape[0]:
        raise DataError(f'{path}: model expects {expected} images, got {dataset.image_shape}')
    dataset = resize_dataset(dataset, expected[1:])
    query, gallery = (
        extract_features(model, part.images, part.ids, part.cams, head_subset=heads, batch_size=batch_size)
        for part in (dataset.query, dataset.gallery)
    )
    logger.info(f'{path}: {query.num_heads} heads, feature dim {query.dim}')
    return query, gallery


def cmd_extract(args: Namespace) -> int:
    config = resolve_experiment(args)
    checkpoints = args.checkpoint
    if len(checkpoints) > 1 and not args.combine:
        raise ConfigurationError(f'{len(checkpoints)} checkpoints given; pass --combine to concatenate them')
    heads = parse_heads(args.heads)
    dataset = load_dataset(config.data.root, workers=config.train.workers)
    pairs = [_extract_one(path, dataset, heads, args.batch_size) for path in checkpoints]
    query = combine_features([q for q, _ in pairs])
    gallery = combine_features([g for _, g in pairs])

    out = output_dir(args, config, 'features')
    write_experiment_config(out / CONFIG_FILE, config, config.train.seed, 'extract')
    save_features(out / 'query.feat', query)
    save_features(out / 'gallery.feat', gallery)
    save_features(out / 'query.codes', quantize(query))
    save_features(out / 'gallery.codes', quantize(gallery))
    with open(out / HEADS_FILE, 'w', encoding='utf-8') as fh:
        json.dump({'head_dims': list(query.head_dims), 'checkpoints': list(checkpoints)}, fh, indent=2)
    print(f'[OK] {len(query)} query / {len(gallery)} gallery features of dim {query.dim} written to {out}')
    return 0


def _select_code_heads(codes: BinaryCodeMatrix, head_dims: tuple[int, ...], heads: list[int]) -> BinaryCodeMatrix:
    bits = FeatureMatrix(unpack_bits(codes).astype(np.float32), codes.ids, codes.cams, head_dims)
    selected = bits.select_heads(heads)
    return BinaryCodeMatrix(pack_bits(selected.features > 0.5), selected.dim, codes.ids, codes.cams)


def _load_eval_inputs(features_dir: Path, source: str, heads: list[int] | None):
    try:
        with open(features_dir / HEADS_FILE, encoding='utf-8') as fh:
            head_dims = tuple(json.load(fh)['head_dims'])
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise DataError(f'{features_dir / HEADS_FILE}: missing or unreadable head layout') from e
    suffix = 'feat' if source == 'real' else 'codes'
    query, gallery = (load_features(features_dir / f'{name}.{suffix}', head_dims) for name in ('query', 'gallery'))
    if heads is None:
        return query, gallery
    if source == 'real':
        return query.select_heads(heads), gallery.select_heads(heads)
    return _select_code_heads(query, head_dims, heads), _select_code_heads(gallery, head_dims, heads)


def write_head_report_csv(path: Path, rows, head_ids: list[int]) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['kind', 'heads', 'metric', 'rank1', 'rank5', 'rank10', 'mAP'])
        for row in rows:
            writer.writerow(
                [
                    row.kind,
                    ';'.join(str(head_ids[h]) for h in row.heads),
                    row.metric.value,
                    repr(row.rank1),
                    repr(row.rank5),
                    repr(row.rank10),
                    repr(row.mean_ap),
                ]
            )


def cmd_eval(args: Namespace) -> int:
    config = resolve_experiment(args)
    heads = parse_heads(args.heads or config.eval.heads)
    features_dir = Path(args.features)
    query, gallery = _load_eval_inputs(features_dir, args.input, heads)
    if args.metric is None:
        metrics = [Metric(m) for m in config.eval.metrics]
    else:
        metrics = [Metric.EUCLIDEAN, Metric.HAMMING] if args.metric == 'both' else [Metric(args.metric)]
    out = Path(args.out) if args.out else features_dir
    out.mkdir(parents=True, exist_ok=True)
    write_experiment_config(out / CONFIG_FILE, config, config.train.seed, 'eval')
    workers = config.train.workers

    for metric in metrics:
        result = rank_gallery(query, gallery, metric, workers)
        report = EvaluationReport(metric, cmc(result, config.eval.max_rank), len(result.queries), result.skipped)
        write_cmc_csv(out / f'cmc_{args.input}_{metric.value}.csv', report)
        write_ranking_csv(out / f'ranking_{args.input}_{metric.value}.csv', result, top=args.top)
        print(
            f'[OK] {metric.value} on {args.input}: rank-1 {report.rank1:.4f} rank-5 {report.rank5:.4f} '
            f'rank-10 {report.rank10:.4f} mAP {report.mean_ap:.4f} ({report.scored} queries, '
            f'{len(report.skipped)} skipped)'
        )

    if args.input == 'real' and query.num_heads > 1:
        head_ids = sorted(set(heads)) if heads is not None else list(range(query.num_heads))
        report = head_report(query, gallery, tuple(metrics), workers=workers)
        write_head_report_csv(out / 'head_report.csv', report.rows, head_ids)
        for row in report.rows:
            label = ','.join(str(head_ids[h]) for h in row.heads)
            print(f'{row.metric.value:9s} {row.kind:10s} [{label}] rank-1 {row.rank1:.4f} mAP {row.mean_ap:.4f}')
    return 0


def write_layer_csv(path: Path, report) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['name', 'kind', 'output_shape', 'macs', 'shared'])
        for record in report.records:
            shape = 'x'.join(str(s) for s in record.output_shape)
            writer.writerow([record.name, record.kind, shape, record.macs, int(record.shared)])


def cmd_flops(args: Namespace) -> int:
    config = resolve_experiment(args)
    heads = parse_heads(args.heads)
    if config.model.kind == 'ensemble':
        report = count_model(config.ensemble_config(), head_subset=heads)
    else:
        if heads is not None:
            raise ConfigurationError('--heads only applies to ensemble models')
        report = count_baseline(config.baseline_config())
    print(
        f'[OK] {config.model.profile} {config.model.kind}: {report.total_gmacs:.4f} GMACs per image, '
        f'shared {report.shared_macs / 1e9:.4f} G ({report.shared_fraction:.4f}), heads {report.head_macs / 1e9:.4f} G'
    )
    for module, macs in report.by_module().items():
        print(f'  {module:12s} {macs / 1e9:.4f} G')
    if args.csv:
        csv_path = Path(args.csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        write_layer_csv(csv_path, report)
        write_experiment_config(csv_path.parent / CONFIG_FILE, config, config.train.seed, 'flops')

    if args.curve:
        rows = baseline_ensemble_curve(args.curve, config.baseline_config(), config.ensemble_config())
        for row in rows:
            print(f'  {row.family:22s} x{row.members}: {row.gmacs:.4f} G')
        if args.csv:
            curve_path = Path(args.csv).with_name(f'{Path(args.csv).stem}_curve.csv')
            with open(curve_path, 'w', newline='') as fh:
                writer = csv.writer(fh)
                writer.writerow(['family', 'members', 'gmacs'])
                writer.writerows([row.family, row.members, repr(row.gmacs)] for row in rows)
    return 0


def cmd_grad_check(args: Namespace) -> int:
    """Primitive checks over ``--seeds`` seeds per case plus full mini-model checks; exit 1 on any failure."""
    config = resolve_experiment(args)
    rows, failures = [], 0
    for spec, shapes in PRIMITIVE_CASES:
        for seed in range(args.seeds):
            report = grad_check(spec, shapes, seed=seed)
            ok = report.passed(PRIMITIVE_TOLERANCE)
            failures += not ok
            rows.append([spec['kind'], json.dumps(spec, sort_keys=True), seed, repr(report.max_rel_error), int(ok)])

    model_config = config.ensemble_config()
    for seed in range(args.model_seeds):
        report = model_grad_check(model_config, seed=seed, max_entries=args.max_entries)
        ok = report.passed(MODEL_TOLERANCE)
        failures += not ok
        worst = max(report.errors, key=report.errors.get)
        logger.info(f'model seed {seed}: max relative error {report.max_rel_error:.3e} at {worst}')
        rows.append(['ensemble_model', config.model.profile, seed, repr(report.max_rel_error), int(ok)])

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_experiment_config(out / CONFIG_FILE, config, 0, 'grad-check')
        with open(out / 'grad_check.csv', 'w', newline='') as fh:
            writer = csv.writer(fh)
            writer.writerow(['target', 'case', 'seed', 'max_rel_error', 'passed'])
            writer.writerows(rows)

    if failures:
        logger.error(f'{failures} of {len(rows)} gradient checks exceeded tolerance')
        return 1
    print(f'[OK] {len(rows)} gradient checks passed')
    return 0
