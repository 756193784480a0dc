import numpy as np
import pytest

from trapcal.circuit import GateOrdering
from trapcal.device import Device, FrameSession, InlineLink, MemoryLink, Preparation, ZAttack
from trapcal.graphs import build_cluster_state
from trapcal.mbqc import Angle
from trapcal.noise import NoiseMode, uniform_model


def trap_round(kite, thetas, a_bits):
    "Vertices 1 and 3 as dummies; 0 and 2 are then both isolated |+_theta> qubits"
    return {v: Preparation(v, Angle(thetas[v]), a_bits[v], dummy=v in (1, 3)) for v in kite.vertices}


def trap_delta(preparations, r):
    c = preparations[1].a ^ preparations[3].a
    return preparations[0].theta.shifted(r ^ c)


def test_links():
    preparation = Preparation(2, Angle(5), 1, dummy=True)
    memory = MemoryLink()
    inline = InlineLink()

    assert memory.receive(memory.send(preparation)) == preparation
    assert inline.receive(inline.send(preparation)) == preparation
    with pytest.raises(ValueError):
        memory.receive('q7')
    with pytest.raises(ValueError):
        inline.receive('!!')


def test_noiseless_trap_round(kite):
    rng = np.random.default_rng(4)
    device = Device(kite, uniform_model(kite, 0.0), rng)

    for round_index in range(20):
        thetas = rng.integers(8, size=4)
        a_bits = rng.integers(2, size=4)
        r = int(rng.integers(2))
        preparations = trap_round(kite, thetas, a_bits)

        session = device.entangle(round_index, preparations, GateOrdering.canonical(kite))

        assert isinstance(session, FrameSession)
        assert session.is_isolated_plus(0)
        assert session.is_isolated_plus(2)
        assert not session.is_isolated_plus(1)
        assert session.measure(0, trap_delta(preparations, r)) ^ r == 0
        c = preparations[1].a ^ preparations[3].a
        assert session.measure(2, preparations[2].theta.shifted(r ^ c)) ^ r == 0


def test_z_attack_flips_the_trap(kite):
    rng = np.random.default_rng(5)
    device = Device(kite, uniform_model(kite, 0.0), rng, attack=ZAttack(0))
    preparations = trap_round(kite, [3, 0, 1, 0], [0, 1, 0, 0])

    session = device.entangle(0, preparations, GateOrdering.canonical(kite))

    assert session.measure(0, trap_delta(preparations, 0)) == 1


def test_dense_round(kite):
    rng = np.random.default_rng(6)
    device = Device(kite, uniform_model(kite, 0.0), rng)
    preparations = {v: Preparation(v, Angle(0), 0) for v in kite.vertices}

    session = device.entangle(0, preparations, GateOrdering.canonical(kite))

    assert session.measure(0, Angle(0)) in (0, 1)


def test_device_validation(kite):
    rng = np.random.default_rng(0)

    with pytest.raises(ValueError):
        Device(kite, uniform_model(kite, 0.01, NoiseMode.PER_EDGE), rng)
    with pytest.raises(ValueError):
        Device(kite, uniform_model(kite, 0.01), rng, attack=ZAttack(9))

    device = Device(kite, uniform_model(kite, 0.01), rng)
    with pytest.raises(ValueError):
        device.entangle(0, {0: Preparation(0, Angle(0), 0)}, GateOrdering.canonical(kite))


def test_dense_cap():
    grid = build_cluster_state(5, 4)
    device = Device(grid, uniform_model(grid, 0.0), np.random.default_rng(0), dense_cap=16)
    preparations = {v: Preparation(v, Angle(0), 0) for v in grid.vertices}

    with pytest.raises(ValueError):
        device.entangle(0, preparations, GateOrdering.canonical(grid))


def test_preparation_amplitudes():
    plus = Preparation(0, Angle(2), a=0)
    flipped = Preparation(0, Angle(2), a=1)

    assert np.allclose(plus.amplitudes(), flipped.amplitudes())
    assert np.allclose(plus.amplitudes(), np.array([1, 1j]) / np.sqrt(2))
    assert np.allclose(Preparation(1, Angle(5), a=1, dummy=True).amplitudes(), [0, 1])
    assert np.allclose(Preparation(1, Angle(5), a=0, dummy=True).amplitudes(), [1, 0])
