import logging

import click

from config import RunConfig, env_defaults
from utils import setup_logging

# Import subcommands
from commands.generate import generate_cmd
from commands.partition import partition_cmd
from commands.stats import stats_cmd
from commands.fuse import fuse_cmd
from commands.evaluate import eval_cmd
from commands.efpn_check import efpn_check_cmd
from commands.render import render_cmd
from commands.segment_detections import segment_detections_cmd
from commands.synth import synth_cmd

logger = logging.getLogger(__name__)

# Environment defaults (.env honoured); CLI flags override them
DEFAULTS = env_defaults()


@click.group()
@click.option('--manifest', type=click.Path(dir_okay=False, path_type=str), default=None,
              help='Corpus manifest JSON.')
@click.option('--out', type=click.Path(file_okay=False, path_type=str), default='boxseg_out', show_default=True,
              help='Output directory.')
@click.option('--seed', type=int, default=DEFAULTS['seed'], show_default=True)
@click.option('--workers', type=int, default=DEFAULTS['workers'], show_default=True)
@click.option('--gamma', type=float, default=DEFAULTS['gamma'], show_default=True, help='GrabCut smoothness weight.')
@click.option('--gmm-k', type=int, default=DEFAULTS['gmm_k'], show_default=True, help='Mixture components per side.')
@click.option('--max-iters', type=int, default=DEFAULTS['max_iters'], show_default=True)
@click.option('--validity-iou', type=float, default=DEFAULTS['validity_iou'], show_default=True)
@click.option('--size-area', type=int, default=DEFAULTS['size_area'], show_default=True,
              help='Box area below which an instance is Small.')
@click.pass_context
def cli(ctx, manifest, out, seed, workers, gamma, gmm_k, max_iters, validity_iou, size_area):
    """Box-supervised instance segmentation toolkit"""
    setup_logging(DEFAULTS['log_level'])
    try:
        ctx.obj = RunConfig(
            manifest=manifest,
            out=out,
            seed=seed,
            workers=workers,
            gamma=gamma,
            gmm_k=gmm_k,
            max_iters=max_iters,
            validity_iou=validity_iou,
            size_area=size_area,
            log_level=DEFAULTS['log_level'],
            subcommand=ctx.invoked_subcommand,
        )
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    logger.debug(f"Running {ctx.invoked_subcommand}", extra={'seed': seed, 'workers': workers})


# Register subcommands
cli.add_command(generate_cmd)
cli.add_command(partition_cmd)
cli.add_command(stats_cmd)
cli.add_command(fuse_cmd)
cli.add_command(eval_cmd)
cli.add_command(efpn_check_cmd)
cli.add_command(render_cmd)
cli.add_command(segment_detections_cmd)
cli.add_command(synth_cmd)


if __name__ == '__main__':
    cli()
