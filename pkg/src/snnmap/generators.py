"""Benchmark networks and reference hardware.

Random networks scatter neurons over the unit square and connect each one
to a Poisson-distributed number of others, preferring close neighbours.
Layered networks connect consecutive layers densely or through sliding
receptive fields. Spike frequencies are log-normal in both.
"""

import itertools
import math
from enum import StrEnum, auto
from typing import Self

import numpy as np
from pydantic import Field, PositiveInt, model_validator

from snnmap.base import BaseNode
from snnmap.costmodel import HardwareConfig
from snnmap.hgraph import Hyperedge, Hypergraph


class SpikeFrequencies(BaseNode):
    """Log-normal spike frequency distribution."""

    freq_median: float = Field(default=0.23, gt=0, allow_inf_nan=False)
    freq_cv: float = Field(default=1.58, gt=0, allow_inf_nan=False)
    """Coefficient of variation."""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` spike frequencies."""
        sigma = math.sqrt(math.log1p(self.freq_cv**2))
        return rng.lognormal(mean=math.log(self.freq_median), sigma=sigma, size=size)


class RandomSnnSpec(SpikeFrequencies):
    """Parameters of a random recurrent network."""

    num_nodes: int = Field(default=256, ge=2)
    mean_cardinality: float = Field(default=8.0, ge=1, allow_inf_nan=False)
    """Poisson mean of the number of destinations per neuron."""
    decay_scale: float = Field(default=0.1, gt=0, allow_inf_nan=False)
    """Distance, in unit-square units, over which connection odds drop by e."""
    seed: int = 0


class LayeredSnnSpec(SpikeFrequencies):
    """Parameters of a feed-forward layered network.

    Without ``window`` every neuron feeds the whole next layer. With it,
    neuron ``j`` of a layer receives from ``window`` consecutive neurons of
    the previous layer starting at ``min(j * stride, size - window)``.
    """

    layers: tuple[PositiveInt, ...] = (16, 8)
    window: PositiveInt | None = None
    stride: PositiveInt = 1
    seed: int = 0

    @model_validator(mode="after")
    def _check_layers(self) -> Self:
        if len(self.layers) < 2:  # noqa: PLR2004
            raise ValueError("A layered network needs at least two layers.")
        if self.window is not None and any(self.window > s for s in self.layers[:-1]):
            raise ValueError(f"Window {self.window} exceeds a layer size.")
        return self

    @property
    def num_nodes(self) -> int:
        """Total neuron count."""
        return sum(self.layers)


def gen_random_cyclic(spec: RandomSnnSpec) -> Hypergraph:
    """Generate a random recurrent network.

    Every neuron sources one hyperedge. Its destination count is Poisson
    distributed, clamped to ``[1, num_nodes - 1]``, and destinations are
    drawn without replacement with odds ``exp(-distance / decay_scale)``.

    Returns:
        The network, identical for identical specs.

    """
    n = spec.num_nodes
    rng = np.random.default_rng(spec.seed)
    positions = rng.random((n, 2))
    cardinality = np.clip(rng.poisson(spec.mean_cardinality, size=n), 1, n - 1)
    weights = spec.sample(rng, n)
    hedges: list[Hyperedge] = []
    for i in range(n):
        logits = -np.linalg.norm(positions - positions[i], axis=1) / spec.decay_scale
        logits[i] = -np.inf
        # Gumbel top-k draws without replacement proportionally to exp(logits).
        keys = logits + rng.gumbel(size=n)
        k = int(cardinality[i])
        picked = np.argpartition(-keys, k - 1)[:k]
        hedges.append(
            Hyperedge.model_construct(
                source=i,
                destinations=tuple(sorted(picked.tolist())),
                weight=float(weights[i]),
            )
        )
    return Hypergraph(num_nodes=n, hedges=tuple(hedges))


def gen_layered(spec: LayeredSnnSpec) -> Hypergraph:
    """Generate a feed-forward layered network with layer-major node ids.

    Neurons without outgoing connections, such as the last layer, source
    no hyperedge.

    Returns:
        The acyclic network.

    """
    rng = np.random.default_rng(spec.seed)
    weights = spec.sample(rng, spec.num_nodes)
    offsets = np.concatenate([[0], np.cumsum(spec.layers)]).tolist()
    hedges: list[Hyperedge] = []
    for layer, (src_size, dst_size) in enumerate(itertools.pairwise(spec.layers)):
        fanout: list[list[int]] = [[] for _ in range(src_size)]
        for j in range(dst_size):
            if spec.window is None:
                sources = range(src_size)
            else:
                start = min(j * spec.stride, src_size - spec.window)
                sources = range(start, start + spec.window)
            for s in sources:
                fanout[s].append(offsets[layer + 1] + j)
        for s, dests in enumerate(fanout):
            if dests:
                node = offsets[layer] + s
                hedges.append(
                    Hyperedge.model_construct(
                        source=node, destinations=tuple(dests), weight=float(weights[node])
                    )
                )
    return Hypergraph(num_nodes=spec.num_nodes, hedges=tuple(hedges))


class HardwarePreset(StrEnum):
    """Named hardware configurations."""

    small = auto()
    large = auto()
    desk = auto()
    """An 8 by 8 chip with scaled down core limits, sized for test suites."""


_PRESETS: dict[HardwarePreset, dict[str, int]] = {
    HardwarePreset.small: {"c_npc": 1024, "c_apc": 4096, "c_spc": 16384},
    HardwarePreset.large: {"c_npc": 4096, "c_apc": 65536, "c_spc": 262144},
    HardwarePreset.desk: {"width": 8, "height": 8, "c_npc": 16, "c_apc": 64, "c_spc": 256},
}


def hardware_preset(name: HardwarePreset | str) -> HardwareConfig:
    """Look up a named hardware configuration.

    Returns:
        The configuration.

    Raises:
        ValueError: On an unknown name.

    """
    try:
        preset = HardwarePreset(name)
    except ValueError:
        choices = ", ".join(HardwarePreset)
        raise ValueError(f"Unknown hardware preset {name!r}, expected one of {choices}.") from None
    return HardwareConfig(**_PRESETS[preset])
