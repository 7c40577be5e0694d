import argparse
import logging
import sys

from models.utils.errors import ConfigurationError, DataError

from .commands import cmd_eval, cmd_extract, cmd_flops, cmd_gen_data, cmd_grad_check, cmd_train
from .config import LOG_LEVEL, PROJECT_NAME, VERSION
from .sweep import GRIDS, cmd_sweep

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_DATA = 2


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors surface as ConfigurationError so they share the config exit code."""

    def error(self, message):
        raise ConfigurationError(f'{self.prog}: {message}')


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', help='experiment config file ([section] / key = value)')
    common.add_argument('--out', help='output directory')
    common.add_argument('--data', help='dataset root (train/, query/, gallery/)')
    common.add_argument('--workers', type=int, help='thread pool size (default from config or env)')
    common.add_argument('--log-level', default=LOG_LEVEL)

    parser = ArgumentParser(prog=PROJECT_NAME, description='DenseNet ensemble embeddings for person re-identification')
    parser.add_argument('--version', action='version', version=f'{PROJECT_NAME} {VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-data', parents=[common], help='write a synthetic re-id dataset')
    gen.add_argument('--n-train-ids', type=int)
    gen.add_argument('--n-test-ids', type=int)
    gen.add_argument('--views', type=int, help='views per identity')
    gen.add_argument('--cams', type=int)
    gen.add_argument('--height', type=int)
    gen.add_argument('--width', type=int)
    gen.add_argument('--seed', type=int)
    gen.set_defaults(handler=cmd_gen_data)

    tr = sub.add_parser('train', parents=[common], help='train an ensemble or the IDE baseline')
    tr.add_argument('--model', choices=['ensemble', 'baseline'])
    tr.add_argument('--profile', choices=['mini', 'densenet121', 'densenet121-compact'])
    tr.add_argument('--seed', type=int)
    tr.add_argument('--epochs', type=int)
    tr.add_argument('--checkpoint-every', type=int)
    tr.add_argument('--no-random-erasing', action='store_true')
    tr.set_defaults(handler=cmd_train)

    ex = sub.add_parser('extract', parents=[common], help='write query/gallery features of trained checkpoints')
    ex.add_argument('--checkpoint', action='append', required=True, help='repeat with --combine for an ensemble')
    ex.add_argument('--combine', action='store_true', help='concatenate the features of every checkpoint')
    ex.add_argument('--heads', help='"all" or 0-based head indices, e.g. 0,3,5')
    ex.add_argument('--batch-size', type=int, default=64)
    ex.set_defaults(handler=cmd_extract)

    ev = sub.add_parser('eval', parents=[common], help='rank the gallery and report CMC / mAP')
    ev.add_argument('--features', required=True, help='directory written by extract')
    ev.add_argument('--metric', choices=['euclidean', 'hamming', 'both'])
    ev.add_argument('--input', choices=['real', 'codes'], default='real')
    ev.add_argument('--heads', help='"all" or 0-based head indices')
    ev.add_argument('--top', type=int, help='ranking rows kept per query')
    ev.set_defaults(handler=cmd_eval)

    fl = sub.add_parser('flops', parents=[common], help='static per-image MAC count')
    fl.add_argument('--profile', choices=['mini', 'densenet121', 'densenet121-compact'])
    fl.add_argument('--model', choices=['ensemble', 'baseline'])
    fl.add_argument('--heads', help='"all" or 0-based head indices')
    fl.add_argument('--csv', help='per-layer breakdown CSV (the curve goes next to it)')
    fl.add_argument('--curve', type=int, default=0, help='rows for 1..K independent models')
    fl.set_defaults(handler=cmd_flops)

    gc = sub.add_parser('grad-check', parents=[common], help='finite-difference gradient checks')
    gc.add_argument('--seeds', type=int, default=20)
    gc.add_argument('--model-seeds', type=int, default=2)
    gc.add_argument('--max-entries', type=int, default=3)
    gc.add_argument('--profile', choices=['mini', 'densenet121', 'densenet121-compact'])
    gc.set_defaults(handler=cmd_grad_check)

    sw = sub.add_parser('sweep', parents=[common], help='train and score a grid of cells')
    sw.add_argument('--grid', choices=GRIDS, required=True)
    sw.add_argument('--values', help='comma-separated grid values (ensemble sizes, widths or member counts)')
    sw.add_argument('--seed', type=int)
    sw.add_argument('--seeds', type=int, help='seeds per value (default 5 for the seed grid, else 1)')
    sw.add_argument('--epochs', type=int)
    sw.add_argument('--no-random-erasing', action='store_true')
    sw.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=getattr(args, 'log_level', LOG_LEVEL).upper(),
            format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        )
        return args.handler(args)
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except (DataError, OSError) as e:
        logger.error(str(e))
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
