import logging

import click

from commands.common import MASKS_DIR, OVERLAYS_DIR, command_output, load_corpus, masks_or_empty, require_directory
from mask_store import read_image, render_overlay, write_image

logger = logging.getLogger(__name__)


@click.command('render')
@click.option('--predictions', 'predictions_dir', type=click.Path(file_okay=False), default=None,
              help=f'Prediction directory [default: <out>/{MASKS_DIR}].')
@click.pass_obj
def render_cmd(config, predictions_dir):
    """Overlay PNGs of a prediction directory on the manifest images"""
    manifest = load_corpus(config)
    predictions_dir = require_directory(predictions_dir or config.out / MASKS_DIR, 'predictions')

    with command_output(config) as staging:
        overlay_dir = staging / OVERLAYS_DIR
        overlay_dir.mkdir()
        for record in manifest.records:
            image = read_image(manifest.resolve(record.image_path))
            masks = masks_or_empty(predictions_dir, record.stem)
            write_image(render_overlay(image, masks), overlay_dir / f"{record.stem}.png")
            logger.debug(f"Rendered {len(masks)} masks over {record.stem}")

    click.echo(f"Rendered {len(manifest.records)} overlays", err=True)
