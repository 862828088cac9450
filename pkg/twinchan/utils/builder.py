"""
builder.py
----------

Provides the ScenarioBuilder for assembling scenarios step by step.

Two kinds of scenario come out of it: ray-driven ones, compiled from a ray
file or from RawCirs through `build_scenario`, and static synthetic ones,
where every link holds one fixed TapSet for a given number of frames.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from ..clustering import BaseClusterer
from ..core import (
    DEFAULT_UPDATE_INTERVAL_S,
    SLOT_COUNT,
    SLOT_WIDTH_S,
    CirTimeline,
    RadioParams,
    RawCir,
    TapSet,
)
from ..scenario import (
    Node,
    RayPathFile,
    Scenario,
    ScenarioError,
    build_scenario,
    parse_ray_paths,
    read_ray_paths,
    scenario_metadata,
)

logger = logging.getLogger(__name__)


class ScenarioBuilder():
    """
    A chainable interface for describing a scenario.

    Every configuration method returns the builder, so a scenario reads as
    one expression:

        ScenarioBuilder().add_node(1).add_node(2).static_all(TapSet.single()).build()
    """

    def __init__(self, name: str = "scenario"):
        self._name = name
        self._nodes: Dict[int, Node] = {}
        self._radio = RadioParams()
        self._rawcirs: Optional[Dict[Tuple[int, int, float], RawCir]] = None
        self._static: Dict[Tuple[int, int], TapSet] = {}
        self._static_default: Optional[TapSet] = None
        self._sampling_interval = DEFAULT_UPDATE_INTERVAL_S
        self._update_interval = DEFAULT_UPDATE_INTERVAL_S
        self._n_frames = 1
        self._threads = 1
        self._clusterer: Optional[BaseClusterer] = None

    def add_node(
        self,
        node: Union[Node, int],
        position: Sequence[float] = (0.0, 0.0, 0.0),
        kind: str = "static",
        speed: float = 0.0,
        trajectory: Sequence[Sequence[float]] = (),
    ) -> "ScenarioBuilder":
        """
        Adds a node, given as a Node or as its id plus fields.

        Raises:
            ScenarioError: the id is already taken.
        """
        if not isinstance(node, Node):
            node = Node(id=node, kind=kind, position=position, speed=speed, trajectory=trajectory)
        if node.id in self._nodes:
            raise ScenarioError(f"node {node.id} is already in the builder")
        self._nodes[node.id] = node
        return self

    def with_radio(self, radio: Optional[RadioParams] = None, **fields) -> "ScenarioBuilder":
        """Sets the radio parameters, either a whole record or individual fields."""
        base = radio or self._radio
        self._radio = base.replace(**fields) if fields else base
        return self

    def with_rays(self, rays: Union[RayPathFile, str, Path]) -> "ScenarioBuilder":
        """Uses a ray file (a path or a parsed RayPathFile) as the channel source."""
        if not isinstance(rays, RayPathFile):
            rays = read_ray_paths(rays)
        return self.with_raw_cirs(parse_ray_paths(rays))

    def with_raw_cirs(self, rawcirs: Mapping[Tuple[int, int, float], RawCir]) -> "ScenarioBuilder":
        self._rawcirs = dict(rawcirs)
        return self

    def static_link(self, tx: int, rx: int, tapset: TapSet) -> "ScenarioBuilder":
        if tx == rx:
            raise ScenarioError(f"node {tx} cannot have a link to itself")
        self._static[(tx, rx)] = tapset
        return self

    def static_all(self, tapset: TapSet) -> "ScenarioBuilder":
        """Every link without its own `static_link` gets this TapSet."""
        self._static_default = tapset
        return self

    def sampling(self, interval_s: float) -> "ScenarioBuilder":
        self._sampling_interval = float(interval_s)
        return self

    def update_interval(self, interval_s: float) -> "ScenarioBuilder":
        self._update_interval = float(interval_s)
        return self

    def n_frames(self, n: int) -> "ScenarioBuilder":
        """Frame count of a static scenario."""
        if n < 1:
            raise ScenarioError(f"n_frames must be >= 1, got {n}")
        self._n_frames = int(n)
        return self

    def lasting(self, seconds: float) -> "ScenarioBuilder":
        """Enough static frames to cover `seconds` of emulation."""
        return self.n_frames(max(1, math.ceil(seconds / self._update_interval - 1e-9)))

    def threads(self, n: int) -> "ScenarioBuilder":
        self._threads = int(n)
        return self

    def named(self, name: str) -> "ScenarioBuilder":
        self._name = name
        return self

    def clusterer(self, clusterer: BaseClusterer) -> "ScenarioBuilder":
        self._clusterer = clusterer
        return self

    def build(self) -> Scenario:
        """
        Compiles the description into a Scenario.

        Raises:
            ScenarioError: both a channel source and static links are set,
                or a static link is missing.
        """
        nodes = [self._nodes[k] for k in sorted(self._nodes)]
        if self._rawcirs is not None:
            if self._static or self._static_default is not None:
                raise ScenarioError("a scenario is either ray-driven or static, not both")
            return build_scenario(
                nodes, self._radio, self._rawcirs, self._sampling_interval,
                update_interval=self._update_interval, name=self._name,
                clusterer=self._clusterer, threads=self._threads,
            )
        return self._build_static(nodes)

    def _build_static(self, nodes: List[Node]) -> Scenario:
        ids = [n.id for n in nodes]
        unknown = sorted({i for link in self._static for i in link} - set(ids))
        if unknown:
            raise ScenarioError(f"static links name unknown node(s) {unknown}")
        timelines = {}
        for a in ids:
            for b in ids:
                if a == b:
                    continue
                tapset = self._static.get((a, b), self._static_default)
                if tapset is None:
                    raise ScenarioError(f"no TapSet for link {a}->{b}; call static_link or static_all")
                timelines[(a, b)] = CirTimeline.static(tapset, self._n_frames, self._update_interval)
        meta = scenario_metadata(
            self._name, SLOT_WIDTH_S, SLOT_COUNT, self._update_interval, self._sampling_interval,
            creation={"static": True, "n_frames": self._n_frames},
        )
        scenario = Scenario(tuple(nodes), self._radio, self._sampling_interval, timelines, meta)
        logger.info("Built static scenario %r: %d nodes, %d frames", self._name, len(ids), self._n_frames)
        return scenario

    def __repr__(self) -> str:
        source = "rays" if self._rawcirs is not None else "static"
        return f"<ScenarioBuilder(name={self._name!r}, nodes={sorted(self._nodes)}, source={source!r})>"
