import click

from commands.common import command_output
from synthetic_corpus import MANIFEST_NAME, build_corpus


@click.command('synth')
@click.option('--images', 'n_images', type=click.IntRange(min=0), default=4, show_default=True)
@click.option('--size', type=click.IntRange(min=32), default=128, show_default=True)
@click.option('--noise', type=click.FloatRange(min=0.0), default=0.0, show_default=True,
              help='Gaussian pixel noise standard deviation.')
@click.pass_obj
def synth_cmd(config, n_images, size, noise):
    """Write a seeded synthetic corpus (images, ground-truth masks, manifest) to --out"""
    with command_output(config) as staging:
        build_corpus(staging, n_images=n_images, seed=config.seed, size=size, noise=noise)
    click.echo(f"Synthetic corpus written; manifest at {config.out / MANIFEST_NAME}", err=True)
