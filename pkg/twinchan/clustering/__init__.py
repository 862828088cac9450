from .base import BaseClusterer
from .binning import SlotBinningClusterer
from .kmeans import KMeansClusterer

CLUSTERERS = {
    KMeansClusterer.name: KMeansClusterer,
    SlotBinningClusterer.name: SlotBinningClusterer,
}

__all__ = [
    "BaseClusterer",
    "KMeansClusterer",
    "SlotBinningClusterer",
    "CLUSTERERS",
]
