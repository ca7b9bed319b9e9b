import logging

import click

from commands.common import MASKS_DIR, command_output, load_corpus
from mask_store import save_masks
from services.pipeline import Validity, validity
from task_manager import TaskManager, TaskType

logger = logging.getLogger(__name__)


@click.command('generate')
@click.pass_obj
def generate_cmd(config):
    """GrabCut pseudo-masks for every annotated box in the manifest"""
    manifest = load_corpus(config)

    with command_output(config) as staging:
        manager = TaskManager(manifest, config.grabcut_config(), workers=config.workers)
        manager.create_tasks(TaskType.PSEUDO_MASK)
        manager.run()

        mask_dir = staging / MASKS_DIR
        mask_dir.mkdir()
        valid_count = total = 0
        for image_index, record in enumerate(manifest.records):
            pairs = manager.masks_for_image(image_index)
            flags = [validity(mask, task.box, config.validity_iou) is Validity.VALID for task, mask in pairs]
            extras = [
                {'box': task.box.as_list(), 'iterations_run': task.iterations_run, 'energy_trace': task.energy_trace}
                for task, _ in pairs
            ]
            save_masks([mask for _, mask in pairs], mask_dir, record.stem, flags, extras)
            valid_count += sum(flags)
            total += len(pairs)
            logger.info(
                f"Generated {len(pairs)} pseudo-masks for {record.stem}",
                extra={'image': record.stem, 'energy_traces': [task.energy_trace for task, _ in pairs]},
            )

        manager.save_tasks(staging / 'tasks.json')

    click.echo(f"Generated {total} pseudo-masks for {len(manifest.records)} images "
               f"({valid_count} valid at IoU {config.validity_iou:g})", err=True)
