import logging

import click

from commands.common import MASKS_DIR, PARTITION_FILE, command_output, domain_errors
from mask_store import read_json, read_mask, write_histogram_csv, write_json
from models import BBox
from services.pipeline import compute_stats

logger = logging.getLogger(__name__)


@click.command('stats')
@click.pass_obj
def stats_cmd(config):
    """Invalid-mask statistics by instance size, plus the area histogram CSV"""
    partition_path = config.out / PARTITION_FILE
    if not partition_path.exists():
        raise click.ClickException(f"missing partition: {partition_path} (run partition first)")

    with domain_errors():
        data = read_json(partition_path)
        pairs = []
        for image in data['images']:
            for entry in image['instances']:
                box = BBox(*entry['box'], entry['class'])
                pairs.append((read_mask(config.out / MASKS_DIR / entry['file'], box.class_id), box))

    # the partition's own threshold keeps stats consistent with valid/ and invalid/
    report = compute_stats(pairs, data['threshold'], config.size_area)

    with command_output(config) as staging:
        write_json(report.to_dict(), staging / 'stats.json')
        write_histogram_csv(report.histogram_frame(), staging / 'stats_histogram.csv')

    if report.undefined_fields:
        logger.warning(f"Undefined fractions reported as 0: {', '.join(report.undefined_fields)}")
    click.echo(
        f"{report.invalid_count}/{report.total_instances} invalid "
        f"(small share of invalid {report.small_invalid_over_invalid:.2%}, "
        f"invalid among small {report.invalid_over_small:.2%}, "
        f"invalid among large {report.invalid_over_large:.2%})",
        err=True,
    )
