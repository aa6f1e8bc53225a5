import numpy as np
import pytest

from snnmap.generators import (
    HardwarePreset,
    LayeredSnnSpec,
    RandomSnnSpec,
    SpikeFrequencies,
    gen_layered,
    gen_random_cyclic,
    hardware_preset,
)
from snnmap.ordering import topo_order


def test_random_network_is_reproducible():
    spec = RandomSnnSpec(num_nodes=50, mean_cardinality=4, seed=9)
    assert gen_random_cyclic(spec) == gen_random_cyclic(spec)
    assert gen_random_cyclic(spec) != gen_random_cyclic(spec.replace(seed=10))


def test_random_network_shape():
    spec = RandomSnnSpec(num_nodes=200, mean_cardinality=6, seed=1)
    g = gen_random_cyclic(spec)
    assert g.snn
    assert g.num_nodes == 200
    assert [e.source for e in g.hedges] == list(range(200))
    for hedge in g.hedges:
        assert 1 <= len(hedge.destinations) <= 199
        assert hedge.source not in hedge.destinations
        assert list(hedge.destinations) == sorted(hedge.destinations)
    mean_card = g.num_connections / g.num_nodes
    assert 4.5 < mean_card < 7.5
    assert topo_order(g) is None


def test_random_network_tiny():
    g = gen_random_cyclic(RandomSnnSpec(num_nodes=2, mean_cardinality=30))
    assert [e.destinations for e in g.hedges] == [(1,), (0,)]


def test_spec_validation():
    with pytest.raises(ValueError):
        RandomSnnSpec(num_nodes=1)
    with pytest.raises(ValueError):
        RandomSnnSpec(decay_scale=0)
    with pytest.raises(ValueError):
        LayeredSnnSpec(layers=(4,))
    with pytest.raises(ValueError):
        LayeredSnnSpec(layers=(4, 8, 2), window=5)
    with pytest.raises(ValueError):
        SpikeFrequencies(freq_median=-1.0)


def test_spike_frequencies():
    freqs = SpikeFrequencies().sample(np.random.default_rng(0), 20_000)
    assert np.all(freqs > 0)
    assert np.median(freqs) == pytest.approx(0.23, rel=0.05)
    assert np.std(freqs) / np.mean(freqs) == pytest.approx(1.58, rel=0.3)


def test_dense_layers():
    spec = LayeredSnnSpec(layers=(3, 2, 2))
    g = gen_layered(spec)
    assert g.num_nodes == spec.num_nodes == 7
    assert [(e.source, e.destinations) for e in g.hedges] == [
        (0, (3, 4)),
        (1, (3, 4)),
        (2, (3, 4)),
        (3, (5, 6)),
        (4, (5, 6)),
    ]
    order = topo_order(g)
    assert order is not None
    assert order.sequence == tuple(range(7))


def test_receptive_fields():
    g = gen_layered(LayeredSnnSpec(layers=(6, 3), window=2, stride=2))
    assert [(e.source, e.destinations) for e in g.hedges] == [
        (0, (6,)),
        (1, (6,)),
        (2, (7,)),
        (3, (7,)),
        (4, (8,)),
        (5, (8,)),
    ]


def test_receptive_fields_clamped_at_layer_end():
    g = gen_layered(LayeredSnnSpec(layers=(4, 4), window=3, stride=1))
    inbound = {d: [] for d in range(4, 8)}
    for hedge in g.hedges:
        for d in hedge.destinations:
            inbound[d].append(hedge.source)
    assert inbound == {4: [0, 1, 2], 5: [1, 2, 3], 6: [1, 2, 3], 7: [1, 2, 3]}


def test_hardware_presets():
    desk = hardware_preset("desk")
    assert (desk.width, desk.height) == (8, 8)
    assert (desk.c_npc, desk.c_apc, desk.c_spc) == (16, 64, 256)
    small = hardware_preset(HardwarePreset.small)
    assert (small.width, small.c_npc, small.c_apc, small.c_spc) == (64, 1024, 4096, 16384)
    large = hardware_preset("large")
    assert (large.c_npc, large.c_apc, large.c_spc) == (4096, 65536, 262144)
    with pytest.raises(ValueError):
        hardware_preset("huge")
