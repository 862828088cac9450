__version__ = "0.1.0"

from .errors import TwinchanError, ValidationError
from .core import CirTimeline, IqBlock, RadioParams, RawCir, Tap, TapSet
from .sequences import CodeSequence, parse_code_spec
from .scenario import Node, Scenario, build_scenario, pathloss_matrix
from .bundle import load_scenario, save_scenario
from .session import EmulationSession
from .sounder import SoundingConfig, sound_link, sound_matrix
from .analysis import MetricSeries, compare_runs, normalized_xcorr
from .utils import ScenarioBuilder, SeedTree
from . import clustering

__all__ = [
    "TwinchanError",
    "ValidationError",
    "CirTimeline",
    "IqBlock",
    "RadioParams",
    "RawCir",
    "Tap",
    "TapSet",
    "CodeSequence",
    "parse_code_spec",
    "Node",
    "Scenario",
    "build_scenario",
    "pathloss_matrix",
    "load_scenario",
    "save_scenario",
    "EmulationSession",
    "SoundingConfig",
    "sound_link",
    "sound_matrix",
    "MetricSeries",
    "compare_runs",
    "normalized_xcorr",
    "ScenarioBuilder",
    "SeedTree",
    "clustering",
]
