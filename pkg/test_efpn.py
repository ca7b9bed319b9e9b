"""
Test the Enhanced-FPN feature graph: convolution, topology, shapes and dependencies
"""

import numpy as np
import pytest

from services.efpn import (
    FeatureGraph, Node, OpKind, ShapeError, Tensor, build_enhanced_fpn, conv2d, evaluate, forward,
    graph_report, infer_shapes, init_weights, load_weights, parameter_count, save_weights,
    synthetic_backbone, upsample_nearest_2x,
)

CHANNELS = (4, 6, 8, 10)


def _brute_conv(x, w, stride, padding, bias):
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    padded = np.zeros((c_in, h + 2 * padding, wd + 2 * padding))
    padded[:, padding:padding + h, padding:padding + wd] = x
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for i in range(out_h):
            for j in range(out_w):
                total = bias[o]
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            total += w[o, c, u, v] * padded[c, i * stride + u, j * stride + v]
                out[o, i, j] = total
    return out


def test_conv2d_matches_direct_definition():
    rng = np.random.default_rng(0)
    for _ in range(100):
        c_in, c_out = (int(v) for v in rng.integers(1, 4, size=2))
        h, w = (int(v) for v in rng.integers(3, 9, size=2))
        k = int(rng.choice([1, 3]))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 2))
        x = rng.normal(size=(c_in, h, w))
        weights = rng.normal(size=(c_out, c_in, k, k))
        bias = rng.normal(size=c_out)
        got = conv2d(Tensor.from_array(x), weights, stride, padding, bias)
        assert np.allclose(got.data, _brute_conv(x, weights, stride, padding, bias), atol=1e-6)


def test_conv2d_stride_two_example():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 6, 6))
    weights = rng.normal(size=(3, 2, 3, 3))
    got = conv2d(Tensor.from_array(x), weights, stride=2, padding=1)
    assert got.shape == (3, 3, 3)
    assert np.allclose(got.data, _brute_conv(x, weights, 2, 1, np.zeros(3)), atol=1e-6)


def test_conv2d_channel_mismatch():
    with pytest.raises(ValueError):
        conv2d(Tensor.from_array(np.zeros((2, 4, 4))), np.zeros((1, 3, 3, 3)))


def test_upsample_nearest():
    up = upsample_nearest_2x(Tensor.from_array(np.arange(4.0).reshape(1, 2, 2)))
    assert up.data[0].tolist() == [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]]


def test_output_strides_at_256():
    graph = build_enhanced_fpn(CHANNELS, 16)
    shapes = infer_shapes(graph, 256)
    assert {256 // shapes[o][1] for o in graph.outputs} == {4, 8, 16, 32}
    assert [shapes[o] for o in graph.outputs] == [(16, 64, 64), (16, 32, 32), (16, 16, 16), (16, 8, 8)]
    assert graph_report(graph, 256)['strides'] == {'P2': 4, 'P3': 8, 'P4': 16, 'P5': 32}


def test_every_node_reachable_from_an_input():
    graph = build_enhanced_fpn(CHANNELS, 16)
    reached = {n.id for n in graph.inputs}
    for node in graph.nodes:
        if node.inputs and all(i in reached for i in node.inputs):
            reached.add(node.id)
    assert reached == {n.id for n in graph.nodes}


def test_one_enhancement_connection_per_level_pair():
    graph = build_enhanced_fpn(CHANNELS, 16)
    downs = [n for n in graph.conv_nodes if n.params['stride'] == 2]
    assert [(n.inputs[0], n.id) for n in downs] == [('P2', 'down2'), ('P3', 'down3'), ('P4', 'down4')]
    # each enhancement adds onto the smoothed top-down map, not the raw lateral
    for level in (3, 4, 5):
        assert graph.node(f'enhance{level}').inputs == (f'down{level - 1}', f'M{level}')


def test_parameter_count_closed_form():
    out = 16
    graph = build_enhanced_fpn(CHANNELS, out)
    lateral = sum(out * c + out for c in CHANNELS)
    smoothing = 4 * (out * out * 9 + out)
    enhancement = 3 * (out * out * 9 + out)
    assert parameter_count(graph) == lateral + smoothing + enhancement


def _sensitivity(graph, maps, weights, source, target):
    baseline = evaluate(graph, maps, weights)
    delta = np.zeros(baseline[source].shape)
    delta[(slice(None),) + tuple(s // 2 for s in delta.shape[1:])] = 1.0
    perturbed = evaluate(graph, maps, weights, perturb={source: delta})
    return np.abs(perturbed[target].data - baseline[target].data).max()


def test_top_down_and_bottom_up_dependencies():
    graph = build_enhanced_fpn(CHANNELS, 8)
    maps = synthetic_backbone(graph, 64, seed=3)
    weights = init_weights(graph, seed=3, scale=1.0)
    # C5 reaches P2 through the top-down path
    assert _sensitivity(graph, maps, weights, 'C5', 'P2') > 0
    # P2 reaches P5 through the enhancement path
    assert _sensitivity(graph, maps, weights, 'P2', 'P5') > 0
    # P5 does not feed back into P2
    assert _sensitivity(graph, maps, weights, 'P5', 'P2') == 0


def test_inferred_shapes_match_forward_pass():
    rng = np.random.default_rng(12)
    for _ in range(20):
        channels = [int(c) for c in rng.integers(1, 13, size=4)]
        graph = build_enhanced_fpn(channels, int(rng.integers(1, 9)))
        image_size = 32 * int(rng.integers(1, 5))
        seed = int(rng.integers(1000))
        values = evaluate(graph, synthetic_backbone(graph, image_size, seed), init_weights(graph, seed))
        shapes = infer_shapes(graph, image_size)
        assert set(values) == set(shapes)
        for node_id, tensor in values.items():
            assert tensor.shape == shapes[node_id]


def test_forward_is_deterministic_under_seed():
    graph = build_enhanced_fpn(CHANNELS, 8)
    first, second = (
        forward(graph, synthetic_backbone(graph, 64, seed=1), init_weights(graph, seed=1)) for _ in range(2)
    )
    assert all(np.array_equal(a.data, b.data) for a, b in zip(first, second))


def test_weights_round_trip(tmp_path):
    graph = build_enhanced_fpn(CHANNELS, 8)
    weights = init_weights(graph, seed=2)
    save_weights(graph, weights, tmp_path / 'efpn.bin')
    loaded = load_weights(graph, tmp_path / 'efpn.bin')
    for node in graph.conv_nodes:
        assert np.array_equal(weights[node.id][0], loaded[node.id][0])
    with pytest.raises(ValueError):
        load_weights(build_enhanced_fpn(CHANNELS, 4), tmp_path / 'efpn.bin')


def test_shape_error_names_the_node():
    nodes = (
        Node('a', OpKind.INPUT, (), {'channels': 2, 'stride': 4}),
        Node('b', OpKind.INPUT, (), {'channels': 2, 'stride': 8}),
        Node('sum', OpKind.ADD, ('a', 'b')),
    )
    with pytest.raises(ShapeError) as excinfo:
        infer_shapes(FeatureGraph(nodes, ('sum',)), 64)
    assert excinfo.value.node_id == 'sum'


def test_graph_rejects_wrong_arity_and_undefined_inputs():
    with pytest.raises(ValueError):
        FeatureGraph((Node('x', OpKind.RELU, ()),), ('x',))
    with pytest.raises(ValueError):
        FeatureGraph((Node('x', OpKind.RELU, ('missing',)),), ('x',))
