import logging

import numpy as np

from ..core import SLOT_WIDTH_S
from .base import BaseClusterer

logger = logging.getLogger(__name__)


class SlotBinningClusterer(BaseClusterer):
    """
    Deterministic alternative to k-means: paths that round to the same slot
    share a bin, then the weakest bin is folded into its nearest neighbour
    (the stronger one on a distance tie) until at most k bins remain.
    """

    name = "slot-binning"

    def __init__(self, slot_width: float = SLOT_WIDTH_S):
        self.slot_width = float(slot_width)

    def assign(self, delays, weights, k):
        delays = np.asarray(delays, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        slots = np.floor(delays / self.slot_width + 0.5).astype(np.int64)
        bins = {}
        for i, s in enumerate(slots):
            bins.setdefault(int(s), []).append(i)

        while len(bins) > k:
            power = {s: float(weights[m].sum()) for s, m in bins.items()}
            weakest = min(bins, key=lambda s: (power[s], s))
            others = [s for s in bins if s != weakest]
            target = min(others, key=lambda s: (abs(s - weakest), -power[s], s))
            logger.debug("Folding slot %d into slot %d", weakest, target)
            bins[target].extend(bins.pop(weakest))

        labels = np.empty(delays.size, dtype=np.int64)
        for label, s in enumerate(sorted(bins)):
            labels[bins[s]] = label
        return self._relabel(labels, delays)

    def describe(self):
        return {"name": self.name, "slot_width_s": self.slot_width}
