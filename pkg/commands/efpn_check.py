import json
import logging

import click
import numpy as np

from commands.common import command_output, domain_errors
from mask_store import write_json
from services.efpn import build_enhanced_fpn, forward, graph_report, init_weights, synthetic_backbone

logger = logging.getLogger(__name__)


def _channels(ctx, param, value):
    try:
        channels = [int(v) for v in value.split(',')]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")
    if len(channels) != 4 or any(c < 1 for c in channels):
        raise click.BadParameter("expected four positive channel counts for C2..C5")
    return channels


@click.command('efpn-check')
@click.option('--image-size', type=int, default=256, show_default=True)
@click.option('--backbone-channels', default='16,32,64,128', show_default=True, callback=_channels,
              help='Channels of C2..C5.')
@click.option('--out-channels', type=int, default=32, show_default=True)
@click.pass_obj
def efpn_check_cmd(config, image_size, backbone_channels, out_channels):
    """Build the Enhanced-FPN graph, infer shapes and run a random-weight forward"""
    with domain_errors():
        graph = build_enhanced_fpn(backbone_channels, out_channels)
        report = graph_report(graph, image_size)
        weights = init_weights(graph, config.seed)
        outputs = forward(graph, synthetic_backbone(graph, image_size, config.seed), weights)

    report['forward'] = {
        name: {'shape': list(tensor.shape), 'mean': float(np.mean(tensor.data)), 'std': float(np.std(tensor.data))}
        for name, tensor in zip(graph.outputs, outputs)
    }
    with command_output(config) as staging:
        write_json(report, staging / 'efpn.json')

    click.echo(json.dumps(report, indent=2, sort_keys=True))
    click.echo("level  stride  shape", err=True)
    for name in graph.outputs:
        shape = report['forward'][name]['shape']
        click.echo(f"{name:<6} {report['strides'][name]:<7} {shape[0]}x{shape[1]}x{shape[2]}", err=True)
    click.echo(f"parameters: {report['parameter_count']}", err=True)
