import logging

import click

from commands.common import (
    FUSED_DIR, MASKS_DIR, SMALL_BRANCH_DIR, command_output, masks_or_empty, require_directory, stems_in,
)
from mask_store import mask_filename, save_masks, write_json
from services.pipeline import Branch, route

logger = logging.getLogger(__name__)


@click.command('fuse')
@click.option('--large', 'large_dir', type=click.Path(file_okay=False), default=None,
              help=f'Large-branch predictions [default: <out>/{MASKS_DIR}].')
@click.option('--small', 'small_dir', type=click.Path(file_okay=False), default=None,
              help=f'Small-branch predictions [default: <out>/{SMALL_BRANCH_DIR}].')
@click.pass_obj
def fuse_cmd(config, large_dir, small_dir):
    """Keep Small instances from the small branch and Large ones from the large branch"""
    large_dir = require_directory(large_dir or config.out / MASKS_DIR, 'large-branch predictions')
    small_dir = require_directory(small_dir or config.out / SMALL_BRANCH_DIR, 'small-branch predictions')

    with command_output(config) as staging:
        fused_dir = staging / FUSED_DIR
        fused_dir.mkdir()
        images = []
        counts = {branch.value: 0 for branch in Branch}
        for stem in stems_in(large_dir, small_dir):
            routed = route(masks_or_empty(large_dir, stem), masks_or_empty(small_dir, stem), config.size_area)
            save_masks([r.mask for r in routed], fused_dir, stem)
            images.append({
                'image': stem,
                'instances': [
                    {
                        'index': index,
                        'file': mask_filename(stem, index, r.mask.class_id),
                        'branch': r.branch.value,
                        'source_index': r.source_index,
                    }
                    for index, r in enumerate(routed)
                ],
            })
            for r in routed:
                counts[r.branch.value] += 1

        write_json({'size_area': config.size_area, 'counts': counts, 'images': images}, staging / 'routing.json')

    logger.info("Fusion routing complete", extra={'counts': counts})
    click.echo(f"Fused {sum(counts.values())} masks: {counts['small']} from the small branch, "
               f"{counts['large']} from the large branch", err=True)
