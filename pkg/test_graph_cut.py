"""
Test s-t graph construction and exact min-cut against cut enumeration
"""

import itertools
import time

import numpy as np
import pytest

from models import Image
from services.gmm import init_gmm_pair
from services.grabcut import seed_trimap
from services.graph_cut import (
    HARD_CONSTRAINT, FlowGraph, Side, build_graph, cut_value, min_cut, neighbour_pairs, smoothness_beta,
)


def _random_graph(rng):
    n = int(rng.integers(1, 13))
    t_links = rng.integers(0, 11, size=(n, 2)).astype(np.float64)
    pairs = [(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < 0.4]
    capacities = rng.integers(0, 11, size=len(pairs)).astype(np.float64)
    return FlowGraph(n, t_links, np.array(pairs, dtype=np.int64).reshape(-1, 2), capacities)


def _brute_force_min_cut(graph):
    n = graph.node_count
    # every row is one assignment; 1 = sink side
    sides = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    cost = np.where(sides, graph.t_links[:, 0], graph.t_links[:, 1]).sum(axis=1)
    if graph.n_links.shape[0]:
        crossing = sides[:, graph.n_links[:, 0]] != sides[:, graph.n_links[:, 1]]
        cost = cost + (crossing * graph.n_capacities).sum(axis=1)
    return cost.min()


def test_min_cut_equals_enumeration():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    for _ in range(500):
        graph = _random_graph(rng)
        flow, side = min_cut(graph)
        expected = _brute_force_min_cut(graph)
        assert flow == expected
        assert cut_value(graph, side) == expected
    assert time.perf_counter() - started < 10.0


def test_single_node_follows_cheaper_terminal():
    graph = FlowGraph(1, [[5.0, 2.0]], np.zeros((0, 2)), np.zeros(0))
    flow, side = min_cut(graph)
    assert flow == 2.0
    # cutting the sink link (2) keeps the node with the source
    assert side[0] == Side.SOURCE


def test_single_node_mirror_goes_to_sink():
    graph = FlowGraph(1, [[3.0, 5.0]], np.zeros((0, 2)), np.zeros(0))
    flow, side = min_cut(graph)
    assert flow == 3.0
    assert side[0] == Side.SINK


def test_flow_graph_validation():
    with pytest.raises(ValueError):
        FlowGraph(2, [[1, -1], [0, 0]], [[0, 1]], [1.0])
    with pytest.raises(ValueError):
        FlowGraph(2, [[1, 1], [0, 0]], [[0, 2]], [1.0])
    with pytest.raises(ValueError):
        FlowGraph(2, [[1, 1], [0, 0]], [[1, 1]], [1.0])
    with pytest.raises(ValueError):
        FlowGraph(1, [[np.inf, 0]], np.zeros((0, 2)), np.zeros(0))


def test_neighbour_pairs_counts():
    pairs, distances = neighbour_pairs(3, 4)
    # horizontal 3*3, vertical 2*4, two diagonals 2*3 each
    assert pairs.shape == (9 + 8 + 6 + 6, 2)
    assert np.isclose(distances, np.sqrt(2)).sum() == 12
    assert len({tuple(sorted(p)) for p in pairs.tolist()}) == pairs.shape[0]


def test_smoothness_beta_constant_image():
    image = Image.from_array(np.full((5, 5, 3), 90, dtype=np.uint8))
    assert smoothness_beta(image) == 0.0


def test_build_graph_capacities_and_constant(disk_scene):
    image, _, box = disk_scene
    trimap = seed_trimap(box, image.width, image.height)
    graph = build_graph(image, trimap, init_gmm_pair(image, trimap, 3, 0))
    assert graph.node_count == image.width * image.height
    assert graph.t_links.min() >= 0.0
    # the shift leaves one zero capacity per pixel
    assert np.all(graph.t_links.min(axis=1) == 0.0)
    outside = ~trimap.probable.reshape(-1)
    assert np.all(graph.t_links[outside, 1] == HARD_CONSTRAINT)
    assert np.isfinite(graph.constant)


def test_cut_value_energy_identity(disk_scene):
    image, _, box = disk_scene
    trimap = seed_trimap(box, image.width, image.height)
    graph = build_graph(image, trimap, init_gmm_pair(image, trimap, 3, 0))
    flow, side = min_cut(graph)
    assert cut_value(graph, side) == pytest.approx(flow, rel=1e-9)
    # every definite background pixel lands on the sink side
    assert np.all(side[~trimap.probable.reshape(-1)] == Side.SINK)
