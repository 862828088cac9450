from .rng import SeedTree, complex_gaussian
from .builder import ScenarioBuilder

__all__ = [
    "SeedTree",
    "complex_gaussian",
    "ScenarioBuilder",
]
