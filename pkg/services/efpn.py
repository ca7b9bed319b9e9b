"""
Enhanced feature pyramid as an executable feature graph.

The top-down pathway is the usual FPN one (1x1 lateral convs, nearest 2x
upsampling, elementwise add, 3x3 smoothing). The enhancement pathway adds
one short bottom-up connection per adjacent level pair: the lower enhanced
map goes through a 3x3/s2 conv, is added to the next level's smoothed
top-down map M{l} (the 3x3 output over lateral + upsampled, not the raw
1x1 lateral), and is rectified.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)

LEVELS = (2, 3, 4, 5)
LEVEL_STRIDES = {2: 4, 3: 8, 4: 16, 5: 32}


class ShapeError(ValueError):
    def __init__(self, node_id: str, message: str):
        super().__init__(f"{node_id}: {message}")
        self.node_id = node_id


class OpKind(Enum):
    INPUT = "Input"
    CONV = "Conv"
    RELU = "Relu"
    UPSAMPLE_NEAREST_2X = "UpsampleNearest2x"
    ADD = "Add"


OP_ARITY = {
    OpKind.INPUT: 0,
    OpKind.CONV: 1,
    OpKind.RELU: 1,
    OpKind.UPSAMPLE_NEAREST_2X: 1,
    OpKind.ADD: 2,
}


@dataclass(frozen=True, eq=False)
class Tensor:
    channels: int
    height: int
    width: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.size != self.channels * self.height * self.width:
            raise ValueError(
                f"Tensor data has {data.size} values, expected {self.channels}x{self.height}x{self.width}"
            )
        object.__setattr__(self, 'data', data.reshape(self.channels, self.height, self.width))

    @classmethod
    def from_array(cls, array) -> 'Tensor':
        array = np.asarray(array, dtype=np.float64)
        return cls(array.shape[0], array.shape[1], array.shape[2], array)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass(frozen=True)
class Node:
    id: str
    op: OpKind
    inputs: Tuple[str, ...] = ()
    params: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class FeatureGraph:
    nodes: Tuple[Node, ...]
    outputs: Tuple[str, ...]

    def __post_init__(self):
        seen = set()
        for node in self.nodes:
            if node.id in seen:
                raise ValueError(f"Duplicate node id {node.id}")
            if len(node.inputs) != OP_ARITY[node.op]:
                raise ValueError(f"{node.id}: {node.op.value} takes {OP_ARITY[node.op]} inputs, got {len(node.inputs)}")
            for producer in node.inputs:
                # nodes are stored in topological order, so producers come first
                if producer not in seen:
                    raise ValueError(f"{node.id}: input {producer} is not defined before use")
            seen.add(node.id)
        for output in self.outputs:
            if output not in seen:
                raise ValueError(f"Output {output} is not a node")

    @property
    def edges(self) -> List[Tuple[str, str]]:
        return [(producer, node.id) for node in self.nodes for producer in node.inputs]

    @property
    def inputs(self) -> List[Node]:
        return [n for n in self.nodes if n.op is OpKind.INPUT]

    @property
    def conv_nodes(self) -> List[Node]:
        return [n for n in self.nodes if n.op is OpKind.CONV]

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(input: Tensor, weights: np.ndarray, stride: int = 1, padding: int = 0,
           bias: Optional[np.ndarray] = None) -> Tensor:
    """Cross-correlation with weights shaped [out_ch, in_ch, kh, kw]"""
    weights = np.asarray(weights, dtype=np.float64)
    out_ch, in_ch, kh, kw = weights.shape
    if in_ch != input.channels:
        raise ValueError(f"Weights expect {in_ch} input channels, tensor has {input.channels}")
    if stride < 1:
        raise ValueError(f"Stride must be >= 1, got {stride}")
    out_h = conv_output_size(input.height, kh, stride, padding)
    out_w = conv_output_size(input.width, kw, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"Convolution output would be {out_h}x{out_w}")

    padded = np.pad(input.data, ((0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :out_h, :out_w]
    out = np.einsum('chwij,ocij->ohw', windows, weights, optimize=True)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64).reshape(out_ch, 1, 1)
    return Tensor.from_array(out)


def relu(input: Tensor) -> Tensor:
    return Tensor.from_array(np.maximum(input.data, 0.0))


def upsample_nearest_2x(input: Tensor) -> Tensor:
    return Tensor.from_array(input.data.repeat(2, axis=1).repeat(2, axis=2))


def add(a: Tensor, b: Tensor) -> Tensor:
    return Tensor.from_array(a.data + b.data)


def _conv(node_id: str, source: str, in_ch: int, out_ch: int, kernel: int, stride: int) -> Node:
    return Node(node_id, OpKind.CONV, (source,), {
        'in_channels': in_ch, 'out_channels': out_ch,
        'kernel': kernel, 'stride': stride, 'padding': kernel // 2,
    })


def build_enhanced_fpn(backbone_channels: Sequence[int], out_channels: int) -> FeatureGraph:
    if len(backbone_channels) != len(LEVELS):
        raise ValueError(f"Expected {len(LEVELS)} backbone levels, got {len(backbone_channels)}")
    if out_channels < 1 or any(c < 1 for c in backbone_channels):
        raise ValueError("Channel counts must be positive")

    nodes: List[Node] = []
    for level, channels in zip(LEVELS, backbone_channels):
        nodes.append(Node(f"C{level}", OpKind.INPUT, (), {'channels': channels, 'stride': LEVEL_STRIDES[level]}))
    for level, channels in zip(LEVELS, backbone_channels):
        nodes.append(_conv(f"lateral{level}", f"C{level}", channels, out_channels, 1, 1))

    # top-down pathway
    top_down = {5: "lateral5"}
    for level in (4, 3, 2):
        nodes.append(Node(f"up{level + 1}", OpKind.UPSAMPLE_NEAREST_2X, (top_down[level + 1],)))
        nodes.append(Node(f"topdown{level}", OpKind.ADD, (f"lateral{level}", f"up{level + 1}")))
        top_down[level] = f"topdown{level}"
    for level in LEVELS:
        nodes.append(_conv(f"M{level}", top_down[level], out_channels, out_channels, 3, 1))

    # enhancement pathway
    nodes.append(Node("P2", OpKind.RELU, ("M2",)))
    for level in (3, 4, 5):
        nodes.append(_conv(f"down{level - 1}", f"P{level - 1}", out_channels, out_channels, 3, 2))
        nodes.append(Node(f"enhance{level}", OpKind.ADD, (f"down{level - 1}", f"M{level}")))
        nodes.append(Node(f"P{level}", OpKind.RELU, (f"enhance{level}",)))

    return FeatureGraph(tuple(nodes), tuple(f"P{level}" for level in LEVELS))


def infer_shapes(graph: FeatureGraph, image_size: int) -> Dict[str, Tuple[int, int, int]]:
    """Shape of every node for a square input image of side ``image_size``"""
    shapes: Dict[str, Tuple[int, int, int]] = {}
    for node in graph.nodes:
        if node.op is OpKind.INPUT:
            side = image_size // node.params['stride']
            if side < 1:
                raise ShapeError(node.id, f"image size {image_size} too small for stride {node.params['stride']}")
            shapes[node.id] = (node.params['channels'], side, side)
        else:
            shapes[node.id] = _infer_node_shape(node, [shapes[i] for i in node.inputs])
    return shapes


def _infer_node_shape(node: Node, input_shapes: List[Tuple[int, int, int]]) -> Tuple[int, int, int]:
    if node.op is OpKind.CONV:
        c, h, w = input_shapes[0]
        p = node.params
        if c != p['in_channels']:
            raise ShapeError(node.id, f"expects {p['in_channels']} channels, got {c}")
        out_h = conv_output_size(h, p['kernel'], p['stride'], p['padding'])
        out_w = conv_output_size(w, p['kernel'], p['stride'], p['padding'])
        if out_h < 1 or out_w < 1:
            raise ShapeError(node.id, f"output would be {out_h}x{out_w}")
        return (p['out_channels'], out_h, out_w)
    if node.op is OpKind.RELU:
        return input_shapes[0]
    if node.op is OpKind.UPSAMPLE_NEAREST_2X:
        c, h, w = input_shapes[0]
        return (c, 2 * h, 2 * w)
    if node.op is OpKind.ADD:
        if input_shapes[0] != input_shapes[1]:
            raise ShapeError(node.id, f"cannot add {input_shapes[0]} and {input_shapes[1]}")
        return input_shapes[0]
    raise ShapeError(node.id, f"no shape rule for {node.op.value}")


def conv_parameter_count(node: Node) -> int:
    p = node.params
    return p['out_channels'] * p['in_channels'] * p['kernel'] * p['kernel'] + p['out_channels']


def parameter_count(graph: FeatureGraph) -> int:
    return sum(conv_parameter_count(n) for n in graph.conv_nodes)


WeightStore = Dict[str, Tuple[np.ndarray, np.ndarray]]


def init_weights(graph: FeatureGraph, seed: int = 0, scale: float = 0.1) -> WeightStore:
    """Seeded normal weights and zero biases for every conv node"""
    rng = np.random.default_rng(seed)
    store: WeightStore = {}
    for node in graph.conv_nodes:
        p = node.params
        shape = (p['out_channels'], p['in_channels'], p['kernel'], p['kernel'])
        fan_in = p['in_channels'] * p['kernel'] * p['kernel']
        store[node.id] = (rng.normal(0.0, scale / np.sqrt(fan_in), size=shape), np.zeros(p['out_channels']))
    return store


def save_weights(graph: FeatureGraph, weights: WeightStore, path) -> None:
    """Flat float64 file: per conv node in graph order, weights then biases"""
    chunks = []
    for node in graph.conv_nodes:
        w, b = weights[node.id]
        chunks.extend([np.asarray(w, dtype=np.float64).ravel(), np.asarray(b, dtype=np.float64).ravel()])
    np.concatenate(chunks).astype('<f8').tofile(path)


def load_weights(graph: FeatureGraph, path) -> WeightStore:
    flat = np.fromfile(path, dtype='<f8')
    if flat.size != parameter_count(graph):
        raise ValueError(f"Weight file holds {flat.size} values, graph needs {parameter_count(graph)}")
    store: WeightStore = {}
    offset = 0
    for node in graph.conv_nodes:
        p = node.params
        shape = (p['out_channels'], p['in_channels'], p['kernel'], p['kernel'])
        count = int(np.prod(shape))
        w = flat[offset:offset + count].reshape(shape)
        offset += count
        b = flat[offset:offset + p['out_channels']].copy()
        offset += p['out_channels']
        store[node.id] = (w, b)
    return store


def evaluate(graph: FeatureGraph, backbone_maps: Sequence[Tensor], weights: WeightStore,
             perturb: Optional[Mapping[str, np.ndarray]] = None) -> Dict[str, Tensor]:
    """
    Evaluate every node in topological order. ``perturb`` adds a delta to the
    named nodes' outputs before their consumers read them.
    """
    inputs = graph.inputs
    if len(backbone_maps) != len(inputs):
        raise ValueError(f"Graph has {len(inputs)} inputs, got {len(backbone_maps)} maps")
    perturb = perturb or {}
    values: Dict[str, Tensor] = {}
    feed = dict(zip((n.id for n in inputs), backbone_maps))

    for node in graph.nodes:
        args = [values[i] for i in node.inputs]
        if node.op is OpKind.INPUT:
            tensor = feed[node.id]
            if tensor.channels != node.params['channels']:
                raise ShapeError(node.id, f"expects {node.params['channels']} channels, got {tensor.channels}")
        elif node.op is OpKind.CONV:
            if args[0].channels != node.params['in_channels']:
                raise ShapeError(node.id, f"expects {node.params['in_channels']} channels, got {args[0].channels}")
            w, b = weights[node.id]
            try:
                tensor = conv2d(args[0], w, node.params['stride'], node.params['padding'], b)
            except ValueError as e:
                raise ShapeError(node.id, str(e)) from e
        elif node.op is OpKind.RELU:
            tensor = relu(args[0])
        elif node.op is OpKind.UPSAMPLE_NEAREST_2X:
            tensor = upsample_nearest_2x(args[0])
        else:
            if args[0].shape != args[1].shape:
                raise ShapeError(node.id, f"cannot add {args[0].shape} and {args[1].shape}")
            tensor = add(args[0], args[1])

        if node.id in perturb:
            tensor = Tensor.from_array(tensor.data + np.asarray(perturb[node.id], dtype=np.float64))
        values[node.id] = tensor
    return values


def forward(graph: FeatureGraph, backbone_maps: Sequence[Tensor], weights: WeightStore) -> List[Tensor]:
    values = evaluate(graph, backbone_maps, weights)
    return [values[o] for o in graph.outputs]


def synthetic_backbone(graph: FeatureGraph, image_size: int, seed: int = 0) -> List[Tensor]:
    rng = np.random.default_rng(seed)
    maps = []
    for node in graph.inputs:
        side = image_size // node.params['stride']
        maps.append(Tensor.from_array(rng.normal(size=(node.params['channels'], side, side))))
    return maps


def graph_report(graph: FeatureGraph, image_size: int) -> dict:
    shapes = infer_shapes(graph, image_size)
    nodes = []
    for node in graph.nodes:
        entry = {
            'id': node.id,
            'op': node.op.value,
            'inputs': list(node.inputs),
            'shape': list(shapes[node.id]),
            'params': dict(node.params),
        }
        if node.op is OpKind.CONV:
            entry['parameter_count'] = conv_parameter_count(node)
        nodes.append(entry)
    strides = {o: image_size // shapes[o][1] for o in graph.outputs}
    return {
        'image_size': image_size,
        'nodes': nodes,
        'edges': [list(e) for e in graph.edges],
        'outputs': list(graph.outputs),
        'strides': strides,
        'parameter_count': parameter_count(graph),
    }
