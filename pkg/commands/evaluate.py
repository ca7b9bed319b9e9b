import json
import logging

import click

from commands.common import FUSED_DIR, command_output, domain_errors, load_corpus, masks_or_empty, require_directory
from mask_store import read_mask, write_json
from services.evaluation import GroundTruthSet, evaluate

logger = logging.getLogger(__name__)


@click.command('eval')
@click.option('--predictions', 'predictions_dir', type=click.Path(file_okay=False), default=None,
              help=f'Prediction directory [default: <out>/{FUSED_DIR}].')
@click.pass_obj
def eval_cmd(config, predictions_dir):
    """mAP^r at IoU 0.5 / 0.75 and ABO against the manifest's ground-truth masks"""
    manifest = load_corpus(config)
    predictions_dir = require_directory(predictions_dir or config.out / FUSED_DIR, 'predictions')

    missing = [
        f"{record.stem}[{i}]"
        for record in manifest.records
        for i in range(len(record.instances))
        if i >= len(record.gt_mask_paths) or not record.gt_mask_paths[i]
    ]
    if missing:
        raise click.ClickException(f"missing ground truth masks for {len(missing)} instances: {', '.join(missing[:5])}")

    with domain_errors():
        ground_truth = GroundTruthSet()
        predictions = []
        for record in manifest.records:
            gt = []
            for box, path in zip(record.instances, record.gt_mask_paths):
                mask = read_mask(manifest.resolve(path), box.class_id)
                if (mask.width, mask.height) != (record.width, record.height):
                    raise ValueError(f"ground truth mask {path} is {mask.width}x{mask.height}, "
                                     f"image is {record.width}x{record.height}")
                gt.append(mask)
            ground_truth.images.append(gt)
            predictions.append(masks_or_empty(predictions_dir, record.stem))
        result = evaluate(predictions, ground_truth)

    report = result.to_dict(manifest.categories)
    with command_output(config) as staging:
        write_json(report, staging / 'eval.json')
        result.to_frame(manifest.categories).to_csv(staging / 'eval_per_class.csv', index=False)

    click.echo(json.dumps(report, indent=2, sort_keys=True))
    click.echo(f"mAP@0.5={result.map_50:.4f} mAP@0.75={result.map_75:.4f} ABO={result.abo:.4f}", err=True)
