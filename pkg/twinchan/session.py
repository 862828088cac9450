import logging
import threading
from typing import Dict, Iterable, Optional

from .core import IqBlock
from .emulator import EmulationError, check_sample_rate, superimpose
from .scenario import Scenario

logger = logging.getLogger(__name__)


# Custom Exceptions
class SessionError(EmulationError):
    """Base exception for session-related errors."""

    pass


class SessionStateError(SessionError):
    """Raised when a session is in an invalid state for the requested operation."""

    pass


class InactiveNodeError(SessionError):
    """Raised when an operation names a node that is not active in the session."""

    pass


class EmulationSession:
    """
    Runs one emulation over a compiled Scenario.

    The session is the workspace for a group of transmissions: blocks are
    staged with `transmit` and collected per receiver with `receive`, which
    superimposes every staged transmitter except the receiver itself. It
    also owns the noise seed and hands out a fresh noise stream per receive
    so repeated captures see independent, reproducible noise.

    Attributes:
        scenario (Scenario): the compiled channel description.
        active_nodes (frozenset): node ids taking part.
        sample_rate (float): sample rate of every block, S/s.
        rng_seed (int): root seed for receiver noise.
        noise_enabled (bool): add receiver noise in `superimpose`.
        threads (int): worker threads for per-link filtering.
        loop (bool): wrap frames when a block outlasts the timeline.
    """

    def __init__(
        self,
        scenario: Scenario,
        active_nodes: Optional[Iterable[int]] = None,
        sample_rate: float = 20e6,
        rng_seed: int = 0,
        noise_enabled: bool = True,
        threads: int = 1,
        loop: bool = False,
    ):
        """
        Initializes a new EmulationSession.

        Raises:
            InactiveNodeError: an active node id is not in the scenario.
            SessionError: non-positive sample rate or thread count.
        """
        if sample_rate <= 0:
            raise SessionError(f"sample_rate must be > 0, got {sample_rate}")
        if threads < 1:
            raise SessionError(f"threads must be >= 1, got {threads}")
        check_sample_rate(sample_rate)
        known = set(scenario.node_ids)
        active = set(known if active_nodes is None else active_nodes)
        unknown = sorted(active - known)
        if unknown:
            logger.error("Active nodes %s are not in scenario %r", unknown, scenario.name)
            raise InactiveNodeError(f"node(s) {unknown} are not in the scenario")

        self.scenario = scenario
        self.active_nodes = frozenset(active)
        self.sample_rate = float(sample_rate)
        self.rng_seed = int(rng_seed)
        self.noise_enabled = bool(noise_enabled)
        self.threads = int(threads)
        self.loop = bool(loop)

        self._staged: Dict[int, IqBlock] = {}  # tx id -> block awaiting receive()
        self._streams: Dict[int, int] = {}  # rx id -> next noise stream index
        self._lock = threading.Lock()
        self._closed = False

    def require_active(self, node_id: int) -> None:
        if node_id not in self.active_nodes:
            raise InactiveNodeError(f"node {node_id} is not active in this session")

    def next_stream(self, rx_id: int) -> int:
        """Reserve the next noise stream index for a receiver."""
        with self._lock:
            stream = self._streams.get(rx_id, 0)
            self._streams[rx_id] = stream + 1
        return stream

    def transmit(self, tx_id: int, block: IqBlock) -> None:
        """
        Stages a block for transmission from a node.

        Raises:
            SessionStateError: the session has been closed.
            InactiveNodeError: the node is not active.
        """
        if self._closed:
            logger.error("Cannot transmit on a closed session: node %s", tx_id)
            raise SessionStateError("Cannot transmit on a closed session")
        self.require_active(tx_id)
        if tx_id in self._staged:
            logger.debug("Replacing staged block for node %d", tx_id)
        else:
            logger.debug("Staging block for node %d: %s", tx_id, block)
        self._staged[tx_id] = block

    def receive(self, rx_id: int, stream: Optional[int] = None) -> IqBlock:
        """
        Superimposes every staged transmission (other than the receiver's own) at a node.

        Returns:
            IqBlock: the received block, noise included when enabled.
        """
        if self._closed:
            logger.error("Cannot receive on a closed session: node %s", rx_id)
            raise SessionStateError("Cannot receive on a closed session")
        inputs = {tx: blk for tx, blk in self._staged.items() if tx != rx_id}
        logger.debug("Receiving at node %d from %s", rx_id, sorted(inputs))
        return superimpose(rx_id, inputs, self, stream=stream)

    def clear(self) -> None:
        """Drops every staged transmission."""
        logger.debug("Clearing %d staged transmission(s).", len(self._staged))
        self._staged.clear()

    @property
    def staged(self) -> Dict[int, IqBlock]:
        return dict(self._staged)

    def __enter__(self):
        """
        Enters a context manager.

        Returns:
            EmulationSession: The current session instance.
        """
        # Lifecycle event
        logger.info(
            "Session opened on %r: %d active node(s), %.4g S/s, noise %s.",
            self.scenario.name, len(self.active_nodes), self.sample_rate,
            "on" if self.noise_enabled else "off",
        )
        self._closed = False
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """
        Exits the context manager, dropping staged transmissions.

        Args:
            exc_type: The exception type if an exception occurred.
            exc_val: The exception value if an exception occurred.
            exc_tb: The traceback if an exception occurred.
        """
        try:
            if exc_type:
                logger.error(
                    "Exception occurred in session context. Error: %s",
                    exc_val,
                    exc_info=(exc_type, exc_val, exc_tb),
                )
        finally:
            self.clear()
            self._closed = True
            # Lifecycle event
            logger.info("Session closed.")

    def __repr__(self) -> str:
        return (f"<EmulationSession(scenario={self.scenario.name!r}, nodes={sorted(self.active_nodes)}, "
                f"sample_rate={self.sample_rate!r}, noise_enabled={self.noise_enabled})>")
