"""
Tests for the tap clustering strategies.
"""
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.clustering import CLUSTERERS, BaseClusterer, KMeansClusterer, SlotBinningClusterer


def test_registry():
    assert set(CLUSTERERS) == {"kmeans", "slot-binning"}
    with pytest.raises(NotImplementedError):
        BaseClusterer().assign(np.zeros(1), np.ones(1), 1)


def test_kmeans_keeps_sparse_delays_apart():
    delays = np.array([0.0, 1.28e-6, 2e-6, 4e-6])
    labels = KMeansClusterer().assign(delays, np.ones(4), 4)
    assert list(labels) == [0, 1, 2, 3]


def test_kmeans_groups_nearby_paths():
    delays = np.array([0.0, 1e-9, 2e-9, 100e-9, 101e-9, 300e-9])
    labels = KMeansClusterer(seed=0).assign(delays, np.ones(6), 3)
    assert list(labels) == [0, 0, 0, 1, 1, 2]


def test_kmeans_is_deterministic():
    rng = np.random.default_rng(5)
    delays = np.sort(rng.uniform(0, 3e-6, 40))
    weights = rng.uniform(0.1, 1.0, 40)
    first = KMeansClusterer(seed=3).assign(delays, weights, 4)
    again = KMeansClusterer(seed=3).assign(delays, weights, 4)
    assert np.array_equal(first, again)
    assert first.max() <= 3


def test_slot_binning_folds_weakest_bins():
    delays = np.array([0.0, 4e-9, 50e-9, 60e-9, 200e-9])
    weights = np.array([1.0, 1.0, 0.01, 0.5, 0.2])
    labels = SlotBinningClusterer().assign(delays, weights, 3)
    # slots 0, 0, 5, 6, 20: slot 5 is weakest and joins slot 6
    assert list(labels) == [0, 0, 1, 1, 2]
    assert SlotBinningClusterer().describe()["name"] == "slot-binning"
