import logging
import shutil

import click

from commands.common import MASKS_DIR, PARTITION_FILE, command_output, load_corpus, require_directory
from mask_store import load_masks, write_json
from services.pipeline import mask_box_iou, partition, size_class

logger = logging.getLogger(__name__)


@click.command('partition')
@click.pass_obj
def partition_cmd(config):
    """Sort generated pseudo-masks into valid/ and invalid/ by mask-box IoU"""
    manifest = load_corpus(config)
    mask_dir = require_directory(config.out / MASKS_DIR, 'generated masks (run generate first)')

    with command_output(config) as staging:
        groups = {'valid': staging / 'valid', 'invalid': staging / 'invalid'}
        for directory in groups.values():
            directory.mkdir()

        images = []
        counts = {'valid': 0, 'invalid': 0}
        for index, record in enumerate(manifest.records):
            masks, entries = load_masks(mask_dir, record.stem)
            if len(masks) != len(record.instances):
                raise ValueError(
                    f"{record.stem}: {len(masks)} stored masks for {len(record.instances)} annotated instances"
                )
            result = partition(list(zip(masks, record.instances)), config.validity_iou)
            valid_ids = {id(mask) for mask, _ in result.valid}

            instances = []
            for mask, entry, box in zip(masks, entries, record.instances):
                group = 'valid' if id(mask) in valid_ids else 'invalid'
                shutil.copyfile(mask_dir / entry.filename, groups[group] / entry.filename)
                counts[group] += 1
                instances.append({
                    'index': entry.index,
                    'file': entry.filename,
                    'class': box.class_id,
                    'box': box.as_list(),
                    'iou': mask_box_iou(mask, box),
                    'valid': group == 'valid',
                    'size': size_class(box, config.size_area).value,
                })
            images.append({'image': record.stem, 'instances': instances})
            logger.debug(f"Partitioned {record.stem}: {len(result.valid)} valid, {len(result.invalid)} invalid")

        write_json({
            'threshold': config.validity_iou,
            'counts': {**counts, 'total': counts['valid'] + counts['invalid']},
            'images': images,
        }, staging / PARTITION_FILE)

    click.echo(f"Partitioned {counts['valid'] + counts['invalid']} masks: "
               f"{counts['valid']} valid, {counts['invalid']} invalid", err=True)
