import logging

import numpy as np
from sklearn.cluster import KMeans

from .base import BaseClusterer

logger = logging.getLogger(__name__)


class KMeansClusterer(BaseClusterer):
    """
    1-D power-weighted k-means on path delay (k-means++ seeding, fixed seed).

    When the number of distinct delays is already <= k every distinct delay
    is its own cluster and KMeans is not run, so sparse CIRs map onto taps
    without any rounding of the assignment.
    """

    name = "kmeans"

    def __init__(self, seed: int = 0, max_iter: int = 50):
        self.seed = int(seed)
        self.max_iter = int(max_iter)

    def assign(self, delays, weights, k):
        delays = np.asarray(delays, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        distinct, inverse = np.unique(delays, return_inverse=True)
        if distinct.size <= k:
            return self._relabel(inverse.astype(np.int64), delays)

        # nanoseconds keep the feature scale near unity
        features = (delays * 1e9).reshape(-1, 1)
        estimator = KMeans(
            n_clusters=k,
            init="k-means++",
            n_init=1,
            max_iter=self.max_iter,
            random_state=self.seed,
        )
        estimator.fit(features, sample_weight=weights)
        logger.debug("KMeans k=%d converged in %d iterations", k, estimator.n_iter_)
        return self._relabel(estimator.labels_.astype(np.int64), delays)

    def describe(self):
        return {"name": self.name, "seed": self.seed, "max_iter": self.max_iter}
