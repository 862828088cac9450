# BaseClusterer

import numpy as np


class BaseClusterer():
    """
    The "contract" that all tap clustering strategies must follow.

    A clusterer groups the multipath components of one CIR by delay. It only
    decides membership; the scenario compiler turns each group into a tap.
    This is an abstract base class; it's not meant to be used directly.
    """

    name = "base"

    def assign(self, delays: np.ndarray, weights: np.ndarray, k: int) -> np.ndarray:
        """
        Group paths into at most k clusters.

        Args:
            delays (np.ndarray): path delays in seconds, relative to the first arrival.
            weights (np.ndarray): path powers (|gain|^2), used as sample weights.
            k (int): maximum number of clusters.

        Returns:
            np.ndarray: integer cluster label per path, labels numbered from 0
            in order of each cluster's earliest member.
        """
        raise NotImplementedError("Subclass must implement the 'assign' method.")

    def describe(self) -> dict:
        """Parameters recorded in scenario metadata."""
        return {"name": self.name}

    @staticmethod
    def _relabel(labels: np.ndarray, delays: np.ndarray) -> np.ndarray:
        """Renumber labels by the earliest delay in each cluster."""
        uniq = np.unique(labels)
        first = [float(np.min(delays[labels == u])) for u in uniq]
        order = [u for _, u in sorted(zip(first, uniq))]
        mapping = {old: new for new, old in enumerate(order)}
        return np.array([mapping[v] for v in labels], dtype=np.int64)
