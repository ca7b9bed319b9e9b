"""
s-t graph construction over 8-connected pixel grids and exact min-cut solving
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import maxflow
import numpy as np

from models import Image, Trimap, TrimapLabel
from services.gmm import GmmPair, neg_log_likelihood

logger = logging.getLogger(__name__)

HARD_CONSTRAINT = 1e9
DEFAULT_GAMMA = 50.0

# (dy, dx) offsets covering each unordered 8-neighbour pair once
NEIGHBOUR_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


class Side(IntEnum):
    SOURCE = 0  # foreground
    SINK = 1    # background


@dataclass(frozen=True, eq=False)
class FlowGraph:
    """
    t_links[i] = (capacity_to_source, capacity_to_sink) for node i.
    n_links[j] = (node_a, node_b) with symmetric capacity n_capacities[j].
    ``constant`` is energy removed from the t-links to keep them non-negative.
    """
    node_count: int
    t_links: np.ndarray
    n_links: np.ndarray
    n_capacities: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        t_links = np.asarray(self.t_links, dtype=np.float64).reshape(self.node_count, 2)
        n_links = np.asarray(self.n_links, dtype=np.int64).reshape(-1, 2)
        n_capacities = np.asarray(self.n_capacities, dtype=np.float64).reshape(-1)
        if n_links.shape[0] != n_capacities.shape[0]:
            raise ValueError("Every n-link needs exactly one capacity")
        if np.any(t_links < 0) or np.any(n_capacities < 0):
            raise ValueError("Capacities must be non-negative")
        if not (np.all(np.isfinite(t_links)) and np.all(np.isfinite(n_capacities))):
            raise ValueError("Capacities must be finite")
        if n_links.size and (n_links.min() < 0 or n_links.max() >= self.node_count):
            raise ValueError("n-link references a node outside the graph")
        if np.any(n_links[:, 0] == n_links[:, 1]):
            raise ValueError("Self-edges are not allowed")
        object.__setattr__(self, 't_links', t_links)
        object.__setattr__(self, 'n_links', n_links)
        object.__setattr__(self, 'n_capacities', n_capacities)


def neighbour_pairs(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Flat index pairs for the 8-neighbourhood and their Euclidean distances"""
    index = np.arange(height * width).reshape(height, width)
    pairs, distances = [], []
    for dy, dx in NEIGHBOUR_OFFSETS:
        y0, y1 = 0, height - dy
        x0, x1 = max(0, -dx), width - max(0, dx)
        a = index[y0:y1, x0:x1]
        b = index[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
        if a.size == 0:
            continue
        pairs.append(np.stack([a.reshape(-1), b.reshape(-1)], axis=1))
        distances.append(np.full(a.size, np.hypot(dy, dx)))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    return np.concatenate(pairs), np.concatenate(distances)


def smoothness_beta(image: Image) -> float:
    """1 / (2 * mean squared colour difference over neighbour pairs); 0 if undefined"""
    pairs, _ = neighbour_pairs(image.height, image.width)
    if pairs.shape[0] == 0:
        return 0.0
    flat = image.pixels.reshape(-1, 3).astype(np.float64)
    mean_sq = float(((flat[pairs[:, 0]] - flat[pairs[:, 1]]) ** 2).sum(axis=1).mean())
    if mean_sq == 0.0:
        return 0.0
    return 1.0 / (2.0 * mean_sq)


def n_link_capacities(image: Image, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    pairs, distances = neighbour_pairs(image.height, image.width)
    flat = image.pixels.reshape(-1, 3).astype(np.float64)
    beta = smoothness_beta(image)
    sq_diff = ((flat[pairs[:, 0]] - flat[pairs[:, 1]]) ** 2).sum(axis=1)
    return pairs, gamma * np.exp(-beta * sq_diff) / distances


def data_terms(image: Image, trimap: Trimap, models: GmmPair) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-pixel cost of labelling background (source capacity) and foreground
    (sink capacity), before any shift. Definite pixels carry the hard constraint.
    """
    flat = image.pixels.reshape(-1, 3).astype(np.float64)
    labels = trimap.labels.reshape(-1)
    cost_bg = np.zeros(flat.shape[0])
    cost_fg = np.zeros(flat.shape[0])

    probable = trimap.probable.reshape(-1)
    cost_bg[probable] = neg_log_likelihood(models.background, flat[probable])
    cost_fg[probable] = neg_log_likelihood(models.foreground, flat[probable])

    cost_bg[labels == TrimapLabel.DEFINITE_FOREGROUND] = HARD_CONSTRAINT
    cost_fg[labels == TrimapLabel.DEFINITE_BACKGROUND] = HARD_CONSTRAINT
    return cost_bg, cost_fg


def build_graph(image: Image, trimap: Trimap, models: GmmPair, gamma: float = DEFAULT_GAMMA) -> FlowGraph:
    if (image.width, image.height) != (trimap.width, trimap.height):
        raise ValueError("Image and trimap dimensions differ")
    cost_bg, cost_fg = data_terms(image, trimap, models)
    # NLL can be negative; shift each pair so the smaller capacity is 0
    shift = np.minimum(cost_bg, cost_fg)
    t_links = np.stack([cost_bg - shift, cost_fg - shift], axis=1)
    pairs, capacities = n_link_capacities(image, gamma)
    return FlowGraph(
        node_count=image.width * image.height,
        t_links=t_links,
        n_links=pairs,
        n_capacities=capacities,
        constant=float(shift.sum()),
    )


def min_cut(graph: FlowGraph) -> Tuple[float, np.ndarray]:
    """Exact max-flow; returns (flow value, Side per node)"""
    g = maxflow.Graph[float](graph.node_count, graph.n_links.shape[0])
    g.add_nodes(graph.node_count)
    # a fresh graph numbers its nodes 0..n-1
    nodes = np.arange(graph.node_count)
    for (a, b), capacity in zip(graph.n_links.tolist(), graph.n_capacities.tolist()):
        g.add_edge(a, b, capacity, capacity)
    g.add_grid_tedges(nodes, graph.t_links[:, 0], graph.t_links[:, 1])
    flow = g.maxflow()
    sink_side = np.asarray(g.get_grid_segments(nodes), dtype=bool)
    side = np.where(sink_side, Side.SINK, Side.SOURCE).astype(np.uint8)
    return float(flow), side


def cut_value(graph: FlowGraph, side: np.ndarray) -> float:
    """Sum of capacities severed by an assignment, computed without the solver"""
    side = np.asarray(side).reshape(-1)
    on_sink = side == Side.SINK
    severed_t = np.where(on_sink, graph.t_links[:, 0], graph.t_links[:, 1]).sum()
    if graph.n_links.shape[0] == 0:
        return float(severed_t)
    crossing = on_sink[graph.n_links[:, 0]] != on_sink[graph.n_links[:, 1]]
    return float(severed_t + graph.n_capacities[crossing].sum())
