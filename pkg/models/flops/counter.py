"""
Static MAC counting by walking the layer shapes implied by a config.

conv: Cout * Cin * kh * kw * Hout * Wout; linear: Dout * Din; normalization,
activations and pooling count as zero.
"""

import logging

from models.densenet_backbone.types import DenseNetConfig
from models.ensemble.types import BaselineConfig, EnsembleConfig
from models.utils.errors import ConfigurationError

from .types import CurveRow, FlopReport, LayerCost, LayerCostSpec

logger = logging.getLogger(__name__)

ZERO_COST_KINDS = {'batchnorm', 'relu', 'tanh', 'avgpool2d', 'global_avg_pool', 'flatten'}


def output_shape(spec: LayerCostSpec, input_shape: tuple[int, ...]) -> tuple[int, ...]:
    if spec.kind == 'conv2d':
        _, h, w = input_shape
        h_out = (h + 2 * spec.pad - spec.kernel) // spec.stride + 1
        w_out = (w + 2 * spec.pad - spec.kernel) // spec.stride + 1
        if h_out < 1 or w_out < 1:
            raise ConfigurationError(f'conv kernel {spec.kernel} does not fit {input_shape}')
        return spec.out_channels, h_out, w_out
    if spec.kind == 'linear':
        return (spec.out_features,)
    if spec.kind == 'avgpool2d':
        c, h, w = input_shape
        return c, (h - spec.kernel) // spec.stride + 1, (w - spec.kernel) // spec.stride + 1
    if spec.kind == 'global_avg_pool':
        return (input_shape[0],)
    if spec.kind == 'flatten':
        flat = 1
        for extent in input_shape:
            flat *= extent
        return (flat,)
    if spec.kind in ZERO_COST_KINDS:
        return tuple(input_shape)
    raise ConfigurationError(f'unknown layer kind {spec.kind!r}')


def count_layer(spec: LayerCostSpec, input_shape: tuple[int, ...]) -> int:
    out = output_shape(spec, input_shape)
    if spec.kind == 'conv2d':
        c_out, h_out, w_out = out
        return c_out * input_shape[0] * spec.kernel * spec.kernel * h_out * w_out
    if spec.kind == 'linear':
        d_in = 1
        for extent in input_shape:
            d_in *= extent
        return spec.out_features * d_in
    return 0


class _Walker:
    def __init__(self, report: FlopReport, shared: bool):
        self.report, self.shared = report, shared

    def add(self, name: str, spec: LayerCostSpec, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        out = output_shape(spec, input_shape)
        self.report.records.append(LayerCost(name, spec.kind, out, count_layer(spec, input_shape), self.shared))
        return out


def _conv(out_channels: int, kernel: int, stride: int = 1, pad: int = 0) -> LayerCostSpec:
    return LayerCostSpec(kind='conv2d', out_channels=out_channels, kernel=kernel, stride=stride, pad=pad)


def _walk_backbone(config: DenseNetConfig, report: FlopReport) -> tuple[int, int, int]:
    walk = _Walker(report, shared=True)
    shape = walk.add('stem.conv', _conv(config.stem_channels, 7, 2, 3), config.input_shape)
    shape = walk.add('stem.pool', LayerCostSpec(kind='avgpool2d', kernel=2, stride=2), shape)
    width = config.bottleneck_factor * config.growth_rate
    for b, size in enumerate(config.block_sizes, start=1):
        for i in range(1, size + 1):
            prefix = f'block{b}.layer{i}.path'
            bottleneck = walk.add(f'{prefix}.conv1', _conv(width, 1), shape)
            new = walk.add(f'{prefix}.conv2', _conv(config.growth_rate, 3, pad=1), bottleneck)
            shape = (shape[0] + new[0], shape[1], shape[2])
        if b < 4:
            compressed = int(config.compression * shape[0])
            shape = walk.add(f'transition{b}.path.conv', _conv(compressed, 1), shape)
            shape = walk.add(f'transition{b}.path.pool', LayerCostSpec(kind='avgpool2d', kernel=2, stride=2), shape)
    return shape


def count_model(config: EnsembleConfig, head_subset=None) -> FlopReport:
    """
    Per-image MACs of the shared backbone plus the embedding layer of each
    selected head (0-based; None = all). Classifiers are training-only and
    not counted.
    """
    report = FlopReport()
    _walk_backbone(config.backbone, report)
    heads = range(config.num_heads) if head_subset is None else sorted(set(head_subset))
    shapes = config.head_input_shapes()
    walk = _Walker(report, shared=False)
    for h in heads:
        if not 0 <= h < config.num_heads:
            raise ConfigurationError(f'head {h} outside [0, {config.num_heads})')
        flat = walk.add(f'head{h}.flatten', LayerCostSpec(kind='flatten'), shapes[h])
        walk.add(f'head{h}.embed', LayerCostSpec(kind='linear', out_features=config.embedding_dim), flat)
    logger.debug(f'{len(list(heads))} heads: {report.total_macs / 1e9:.3f} GMACs, shared {report.shared_fraction:.3f}')
    return report


def count_baseline(config: BaselineConfig) -> FlopReport:
    report = FlopReport()
    shape = _walk_backbone(config.backbone, report)
    walk = _Walker(report, shared=False)
    pooled = walk.add('head0.gap', LayerCostSpec(kind='global_avg_pool'), shape)
    walk.add('head0.embed', LayerCostSpec(kind='linear', out_features=config.embedding_dim), pooled)
    return report


def baseline_ensemble_curve(
    k_max: int, baseline: BaselineConfig, ensemble: EnsembleConfig, m_max: int | None = None
) -> list[CurveRow]:
    """Cost of k independent baseline models and of m independent ensemble models."""
    if k_max < 1:
        raise ConfigurationError(f'k_max must be positive, got {k_max}')
    single = count_baseline(baseline).total_gmacs
    joint = count_model(ensemble).total_gmacs
    rows = [CurveRow('baseline-ensemble', k, k * single) for k in range(1, k_max + 1)]
    rows += [CurveRow('ensemble-of-ensembles', m, m * joint) for m in range(1, (m_max or k_max) + 1)]
    return rows
