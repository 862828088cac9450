"""
Tests for EmulationSession: staging, receiving, lifecycle and
reproducible noise.
"""
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.core import IqBlock, TapSet
from twinchan.session import EmulationSession, InactiveNodeError, SessionError, SessionStateError
from twinchan.utils import ScenarioBuilder


def three_nodes():
    return (ScenarioBuilder("three")
            .add_node(1).add_node(2).add_node(3)
            .with_radio(base_loss_db=0.0)
            .static_all(TapSet.single(1.0))
            .static_link(1, 3, TapSet.single(0.5, slot=100))
            .n_frames(5)
            .build())


def test_receive_superimposes_every_other_transmitter():
    with EmulationSession(three_nodes(), sample_rate=1e6, noise_enabled=False) as session:
        session.transmit(1, IqBlock(np.ones(4), 1e6))
        session.transmit(2, IqBlock(2 * np.ones(4), 1e6))
        at_3 = session.receive(3)
        at_1 = session.receive(1)
    # slot 100 is one sample at 1 MS/s
    assert np.allclose(at_3.samples, [2.0, 2.5, 2.5, 2.5, 0.5])
    assert np.allclose(at_1.samples, 2.0)


def test_closed_session_refuses_work():
    session = EmulationSession(three_nodes(), sample_rate=1e6)
    with session:
        session.transmit(1, IqBlock(np.ones(4), 1e6))
    assert session.staged == {}
    with pytest.raises(SessionStateError):
        session.transmit(1, IqBlock(np.ones(4), 1e6))
    with pytest.raises(SessionStateError):
        session.receive(2)


def test_active_node_checks():
    with pytest.raises(InactiveNodeError):
        EmulationSession(three_nodes(), active_nodes=[1, 9])
    session = EmulationSession(three_nodes(), active_nodes=[1, 2], sample_rate=1e6)
    with pytest.raises(InactiveNodeError):
        session.transmit(3, IqBlock(np.ones(4), 1e6))
    with pytest.raises(SessionError):
        EmulationSession(three_nodes(), sample_rate=0.0)
    with pytest.raises(SessionError):
        EmulationSession(three_nodes(), threads=0)


def test_exception_inside_context_still_clears():
    session = EmulationSession(three_nodes(), sample_rate=1e6)
    with pytest.raises(RuntimeError):
        with session:
            session.transmit(1, IqBlock(np.ones(4), 1e6))
            raise RuntimeError("boom")
    assert session.staged == {}


def test_noise_is_fresh_per_receive_and_reproducible():
    def capture(seed):
        with EmulationSession(three_nodes(), sample_rate=1e6, rng_seed=seed) as session:
            session.transmit(1, IqBlock(np.zeros(1000), 1e6))
            return session.receive(2).samples, session.receive(2).samples

    first, second = capture(11)
    assert not np.array_equal(first, second)
    again_first, again_second = capture(11)
    assert np.array_equal(first, again_first)
    assert np.array_equal(second, again_second)
    assert not np.array_equal(first, capture(12)[0])


def test_threads_do_not_change_results():
    def run(threads):
        with EmulationSession(three_nodes(), sample_rate=1e6, rng_seed=3, threads=threads) as session:
            rng = np.random.default_rng(0)
            session.transmit(1, IqBlock(rng.standard_normal(2000), 1e6))
            session.transmit(2, IqBlock(rng.standard_normal(2000), 1e6))
            return session.receive(3, stream=0).samples

    assert np.array_equal(run(1), run(4))


def test_repr_names_the_scenario():
    session = EmulationSession(three_nodes(), sample_rate=1e6)
    assert repr(session).startswith("<EmulationSession(scenario='three'")
    assert session.next_stream(2) == 0
    assert session.next_stream(2) == 1
