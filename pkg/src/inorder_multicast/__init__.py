"""In-order multicast of a packet stream to two users over erasure channels.

Coding policies (fixed priority, greedy, (N, M) threshold codes and their
mixtures), a seeded slot-level simulator, and exact Markov-chain analysis of
the resulting throughput / smoothness trade-offs.
"""

from .analysis import (
    ChainModel,
    StationaryDistribution,
    TradeoffPoint,
    UserTradeoff,
    build_nm_chain,
    classify,
    composite_tradeoff,
    fixed_priority_tradeoff,
    greedy_tradeoff,
    nm_tradeoff,
    scheme_tradeoff,
    solve_stationary,
    transient_tradeoff,
    truncated_chain,
)
from .core import (
    ChannelParams,
    Decoder,
    MetricsCounters,
    MetricsReport,
    Reason,
    Reception,
    ReceptionKind,
    Single,
    SlotOutcome,
    Undefined,
    UserCounters,
    Xor,
    finalize_metrics,
    joint_probabilities,
    receive_combination,
)
from .errors import ChainError, ChannelError, ProtocolViolation, SchemeError, SimulationAbort
from .schemes import (
    INF,
    NM,
    Advantage,
    FixedPriority,
    Greedy,
    Index,
    Randomized,
    TimeShare,
    decide,
    decide_fixed_priority,
    decide_greedy,
    decide_nm,
    markov_state,
    parse_scheme,
)
from .simulator import ScriptedChannel, SimConfig, SimResult, run_batch, run_simulation

__version__ = "0.1.0"
