from typing import TYPE_CHECKING

import pytest

from snnmap.config import PipelineConfig
from snnmap.generators import hardware_preset
from snnmap.hgraph import Hyperedge, Hypergraph

if TYPE_CHECKING:
    from snnmap.costmodel import HardwareConfig


def make_graph(
    num_nodes: int,
    edges: list[tuple[int, tuple[int, ...], float]],
    *,
    snn: bool = True,
) -> Hypergraph:
    """Build a hypergraph from ``(source, destinations, weight)`` triples."""
    return Hypergraph(
        num_nodes=num_nodes,
        hedges=tuple(
            Hyperedge(source=s, destinations=d, weight=w) for s, d, w in edges
        ),
        snn=snn,
    )


@pytest.fixture
def build_graph():
    return make_graph


@pytest.fixture
def desk() -> HardwareConfig:
    return hardware_preset("desk")


@pytest.fixture
def diamond() -> Hypergraph:
    return make_graph(4, [(0, (1, 2), 1.0), (1, (3,), 1.0), (2, (3,), 1.0)])


@pytest.fixture
def cyclic() -> Hypergraph:
    # 0 and 1 feed each other, 2 is the only input.
    return make_graph(3, [(0, (1,), 1.0), (1, (0,), 1.0), (2, (0,), 5.0)])


@pytest.fixture
def config(tmp_path) -> PipelineConfig:
    return PipelineConfig(
        cache_dir=tmp_path / "cache",
        output_dir=tmp_path / "output",
        nodes=64,
        cardinality=4.0,
        no_config=True,
        verbose=True,
    )
