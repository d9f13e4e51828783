"""Exception hierarchy shared by the package."""


class ChannelError(ValueError):
    """Invalid erasure-pattern probabilities."""


class SchemeError(ValueError):
    """Malformed or inconsistent scheme description."""


class ProtocolViolation(RuntimeError):
    """A transmitted combination cannot be handled by an instantly-decoding receiver.

    Raised when an XOR arrives at a user that knows neither constituent, which
    only happens if a scheme sends an XOR outside the two-user code structure.
    """


class ChainError(ValueError):
    """The requested Markov chain has no unique stationary distribution."""


class SimulationAbort(RuntimeError):
    """A run stopped on a safety limit.

    Attributes:
        slot: 1-based slot at which the run stopped.
        state: Markov state index at that slot.
    """

    def __init__(self, message, slot=None, state=None):
        super().__init__(message)
        self.slot = slot
        self.state = state
