import logging

import click

from commands.common import SMALL_BRANCH_DIR, command_output, load_corpus
from mask_store import save_masks
from task_manager import TaskManager, TaskType

logger = logging.getLogger(__name__)


@click.command('segment-detections')
@click.pass_obj
def segment_detections_cmd(config):
    """Small-branch masks for the manifest's detections (ellipse when GrabCut fails)"""
    manifest = load_corpus(config)

    with command_output(config) as staging:
        manager = TaskManager(manifest, config.grabcut_config(), workers=config.workers,
                              quality_threshold=config.validity_iou)
        manager.create_tasks(TaskType.SMALL_BRANCH)
        manager.run()

        out_dir = staging / SMALL_BRANCH_DIR
        out_dir.mkdir()
        ellipses = total = 0
        for image_index, record in enumerate(manifest.records):
            pairs = manager.masks_for_image(image_index)
            extras = [{'box': task.box.as_list(), 'used_ellipse': task.used_ellipse} for task, _ in pairs]
            save_masks([mask for _, mask in pairs], out_dir, record.stem, extras=extras)
            ellipses += sum(bool(task.used_ellipse) for task, _ in pairs)
            total += len(pairs)
            logger.info(
                f"Segmented {len(pairs)} detections for {record.stem}",
                extra={'image': record.stem, 'used_ellipse': [task.used_ellipse for task, _ in pairs]},
            )

        manager.save_tasks(staging / 'small_branch_tasks.json')

    click.echo(f"Segmented {total} detections, {ellipses} replaced by ellipses", err=True)
