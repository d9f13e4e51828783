"""Closed-form trade-offs and exact Markov-chain solutions.

States are those of :mod:`.schemes`: ``Index(i)`` with i = gaps(U2) - gaps(U1)
and ``Advantage(i)`` where the lagger holds the leader's required packet.
On the side where U1 leads (i > 0) the per-slot moves are

* ``Index(i)``: both -> i, only U1 -> i+1, only U2 -> Advantage(i), none -> i
* ``Advantage(i)``: both -> i-1, only U1 -> i, only U2 -> Advantage(i-1)
  (``Index(-1)`` from ``Advantage(1)``), none -> Advantage(i)
* threshold state under lagger priority: both or only U2 -> i-1, otherwise stay

and the side where U2 leads mirrors this with the roles of U1 and U2 swapped.
All formulas take the pattern probabilities (a, b, c, d) directly, so
cross-user correlated erasures are covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .core import ChannelParams, Reason, SlotOutcome, Undefined, Value, is_defined
from .errors import ChainError, SchemeError
from .schemes import (
    INF,
    NM,
    Advantage,
    FixedPriority,
    Greedy,
    Index,
    MarkovState,
    Randomized,
    Scheme,
    TimeShare,
)

RESIDUAL_TOL = 1e-12
TAIL_TOL = 1e-12

POSITIVE = "positive-recurrent"
NULL = "null-recurrent"
TRANSIENT_LEFT = "transient-left"
TRANSIENT_RIGHT = "transient-right"


@dataclass(frozen=True)
class UserTradeoff:
    tau: Value
    sigma: Value
    delta: Value
    omega: Value

    def as_dict(self):
        return {"tau": self.tau, "sigma": self.sigma, "delta": self.delta, "omega": self.omega}


@dataclass(frozen=True)
class TradeoffPoint:
    users: tuple[UserTradeoff, UserTradeoff]
    regime: str = POSITIVE

    def user(self, i: int) -> UserTradeoff:
        return self.users[i - 1]

    def swapped(self) -> "TradeoffPoint":
        regime = {TRANSIENT_LEFT: TRANSIENT_RIGHT, TRANSIENT_RIGHT: TRANSIENT_LEFT}.get(
            self.regime, self.regime)
        return TradeoffPoint((self.users[1], self.users[0]), regime)


def user_from_losses(p: float, delta: Value, omega: Value) -> UserTradeoff:
    """Throughput p(1-delta) and smoothness p(1-delta-omega) of one user."""
    if p == 0:
        missing = Undefined(Reason.NO_DATA)
        return UserTradeoff(0.0, 0.0, missing, missing)
    tau = p * (1 - delta) if is_defined(delta) else delta
    if is_defined(delta) and is_defined(omega):
        sigma = p * (1 - delta - omega)
    else:
        sigma = omega if not is_defined(omega) else delta
    return UserTradeoff(tau, sigma, delta, omega)


# -- closed forms ------------------------------------------------------------


def _fixed_u1(ch: ChannelParams) -> TradeoffPoint:
    a, b, c, d = ch.a, ch.b, ch.c, ch.d
    primary = user_from_losses(ch.p1, 0.0, 0.0)
    if b == 0 and c == 0:
        return TradeoffPoint((primary, user_from_losses(ch.p2, 0.0, 0.0)), POSITIVE)
    if b < c:
        delta2, omega2 = (c - b) / (a + c), b * (a + b) / (c * (1 - d))
        regime = POSITIVE
    else:
        delta2 = 0.0
        omega2 = (a + c) / (a + 2 * c) if a + c > 0 else Undefined(Reason.NO_DATA)
        regime = NULL if b == c else TRANSIENT_RIGHT
    return TradeoffPoint((primary, user_from_losses(ch.p2, delta2, omega2)), regime)


def fixed_priority_tradeoff(ch: ChannelParams, primary: int = 1) -> TradeoffPoint:
    """Closed-form trade-off when ``primary`` always gets its required packet.

    The secondary user's losses use the recurrent-style expressions on both
    sides of b = c; they coincide at b = c. For b > c (secondary on the worse
    channel) the chain drifts and :func:`transient_tradeoff` gives the
    long-run values observed along a trajectory.
    """
    if primary == 1:
        return _fixed_u1(ch)
    if primary == 2:
        return _fixed_u1(ch.swapped()).swapped()
    raise SchemeError(f"primary must be 1 or 2, got {primary!r}")


def greedy_tradeoff(ch: ChannelParams) -> TradeoffPoint:
    """Closed-form trade-off of greedy coding.

    Throughput losses are zero. The user on the worse channel gets order
    loss (a+c)/(a+2c) (mirrored for U1) and smoothness follows from
    p(1-delta-omega). At b = c the chain is null-recurrent and order loss
    and smoothness are undefined.
    """
    a, b, c = ch.a, ch.b, ch.c
    if b == c and b > 0:
        null = Undefined(Reason.NULL_RECURRENT)
        users = tuple(UserTradeoff(ch.p(u), null, 0.0, null) for u in (1, 2))
        return TradeoffPoint(users, NULL)
    omega1 = omega2 = 0.0
    regime = POSITIVE
    if b > c:
        omega2 = (a + c) / (a + 2 * c) if a + c > 0 else Undefined(Reason.NO_DATA)
        regime = TRANSIENT_RIGHT
    elif c > b:
        omega1 = (a + b) / (a + 2 * b) if a + b > 0 else Undefined(Reason.NO_DATA)
        regime = TRANSIENT_LEFT
    return TradeoffPoint(
        (user_from_losses(ch.p1, 0.0, omega1), user_from_losses(ch.p2, 0.0, omega2)), regime)


def transient_tradeoff(ch: ChannelParams) -> TradeoffPoint:
    """Long-run trajectory averages when the state index drifts away from 0.

    Far from the origin the leader decodes every unerased slot in order.
    The lagger alternates between a plain class (it lacks the leader's
    required packet) and an advantage class; the class flips to advantage
    w.p. c and back w.p. a+b, so the plain fraction (its order loss) is
    (a+b)/(1-d). It decodes its earliest gap at rate p2*c/(1-d), and each
    leader packet is held by it with probability (a+c)/(1-d), so in-order
    throughput is c(a+c)/b, below p2 whenever b > c. Written for U1 leading
    (b > c) and mirrored otherwise.
    """
    if ch.b == ch.c:
        raise ValueError("no drift when b == c")
    if ch.c > ch.b:
        return transient_tradeoff(ch.swapped()).swapped()
    a, b, c, d = ch.a, ch.b, ch.c, ch.d
    leader = user_from_losses(ch.p1, 0.0, 0.0)
    if a + c == 0:
        lagger = user_from_losses(0.0, 0.0, 0.0)
    else:
        lagger = UserTradeoff(
            tau=c * (a + c) / b,
            sigma=c * (a + c) / (1 - d),
            delta=0.0,
            omega=(a + b) / (1 - d),
        )
    return TradeoffPoint((leader, lagger), TRANSIENT_RIGHT)


# -- chains ------------------------------------------------------------------


@dataclass
class ChainModel:
    """Finite chain with per-outcome moves; the matrix weights them by (a, b, c, d)."""

    channel: ChannelParams
    states: list
    moves: dict
    index: dict = field(init=False)

    def __post_init__(self):
        self.index = {s: k for k, s in enumerate(self.states)}

    def next_state(self, state: MarkovState, outcome: SlotOutcome) -> MarkovState:
        return self.moves[state][outcome]

    def matrix(self) -> np.ndarray:
        ch = self.channel
        weight = {SlotOutcome.BOTH: ch.a, SlotOutcome.ONLY_U1: ch.b,
                  SlotOutcome.ONLY_U2: ch.c, SlotOutcome.NEITHER: ch.d}
        P = np.zeros((len(self.states), len(self.states)))
        for s, row in self.moves.items():
            for outcome, target in row.items():
                P[self.index[s], self.index[target]] += weight[outcome]
        return P


def _side_moves(moves, K, lagger_priority, sign):
    """Moves for one side of the chain; ``sign`` +1 is the side where U1 leads."""
    if sign > 0:
        lead, lag = SlotOutcome.ONLY_U1, SlotOutcome.ONLY_U2
    else:
        lead, lag = SlotOutcome.ONLY_U2, SlotOutcome.ONLY_U1
    both, none = SlotOutcome.BOTH, SlotOutcome.NEITHER

    def at(i):
        return Index(sign * i)

    for i in range(1, K + 1):
        if i == K and lagger_priority:
            moves[at(i)] = {both: at(i - 1), lag: at(i - 1), lead: at(i), none: at(i)}
        else:
            moves[at(i)] = {both: at(i), lead: at(min(i + 1, K)),
                            lag: Advantage(sign * i), none: at(i)}
    top = K - 1 if lagger_priority else K
    for i in range(1, top + 1):
        moves[Advantage(sign * i)] = {
            both: at(i - 1),
            lead: at(i),
            lag: Advantage(sign * (i - 1)) if i >= 2 else Index(-sign),
            none: Advantage(sign * i),
        }


def build_chain(ch: ChannelParams, right: int, left: int,
                right_lagger: bool = True, left_lagger: bool = True) -> ChainModel:
    """Chain on Index(-left..right) plus reachable advantage states.

    A side with ``*_lagger`` True serves the lagger at its outermost index
    (threshold codes); otherwise that side is truncated by a reflecting
    boundary, used to approximate an unbounded side.
    """
    if right < 1 or left < 1:
        raise ValueError("both sides need at least one state")
    moves = {Index(0): {SlotOutcome.BOTH: Index(0), SlotOutcome.ONLY_U1: Index(1),
                        SlotOutcome.ONLY_U2: Index(-1), SlotOutcome.NEITHER: Index(0)}}
    _side_moves(moves, right, right_lagger, +1)
    _side_moves(moves, left, left_lagger, -1)
    states = sorted(moves, key=lambda s: (s.i, isinstance(s, Advantage)))
    return ChainModel(ch, states, moves)


def build_nm_chain(ch: ChannelParams, N, M) -> ChainModel:
    """Chain of the (N, M) threshold code; N and M must be finite."""
    if N == INF or M == INF:
        raise ValueError("build_nm_chain needs finite N and M; use truncated_chain")
    if int(N) != N or int(M) != M or N < 1 or M < 1:
        raise ValueError(f"N and M must be integers >= 1, got {N}, {M}")
    return build_chain(ch, int(N), int(M))


def _truncation_depth(ratio: float, tail_tol: float) -> int:
    if ratio <= 0:
        return 2
    return max(2, math.ceil(math.log(tail_tol) / math.log(ratio)) + 2)


def truncated_chain(ch: ChannelParams, N, M, tail_tol: float = TAIL_TOL) -> ChainModel:
    """Finite stand-in for a threshold code with an unbounded side.

    An unbounded side is cut where its geometric tail (ratio b/c on the
    U1-leading side, c/b on the other) drops below ``tail_tol`` and closed
    with a reflecting boundary. Requires that side to be positive-recurrent.
    """
    if N == INF:
        if not ch.b < ch.c:
            raise ChainError("U1-leading side is not positive-recurrent (needs b < c)")
        right, right_lagger = _truncation_depth(ch.b / ch.c, tail_tol), False
    else:
        right, right_lagger = int(N), True
    if M == INF:
        if not ch.c < ch.b:
            raise ChainError("U2-leading side is not positive-recurrent (needs c < b)")
        left, left_lagger = _truncation_depth(ch.c / ch.b, tail_tol), False
    else:
        left, left_lagger = int(M), True
    return build_chain(ch, right, left, right_lagger, left_lagger)


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: dict
    recurrence: str
    residual: float

    def __getitem__(self, state):
        return self.probabilities.get(state, 0.0)


def solve_stationary(chain: ChainModel) -> StationaryDistribution:
    """Exact stationary distribution by a dense linear solve.

    One balance equation is replaced by the normalisation. States outside the
    unique closed class get probability 0; several closed classes raise
    ChainError.
    """
    P = chain.matrix()
    n = len(chain.states)
    ncomp, labels = connected_components(P > 0, directed=True, connection="strong")
    closed = []
    for comp in range(ncomp):
        members = np.flatnonzero(labels == comp)
        outside = np.setdiff1d(np.arange(n), members)
        if not P[np.ix_(members, outside)].any():
            closed.append(members)
    if len(closed) != 1:
        names = ["{" + ", ".join(str(chain.states[k]) for k in m[:4])
                 + (", ..." if len(m) > 4 else "") + "}" for m in closed]
        raise ChainError(f"chain has {len(closed)} closed classes: {'; '.join(names)}")
    members = closed[0]
    sub = P[np.ix_(members, members)]
    A = sub.T - np.eye(len(members))
    A[-1, :] = 1.0
    rhs = np.zeros(len(members))
    rhs[-1] = 1.0
    pi_sub = np.linalg.solve(A, rhs)
    pi = np.zeros(n)
    pi[members] = np.clip(pi_sub, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ P - pi)))
    return StationaryDistribution(
        {s: float(pi[k]) for k, s in enumerate(chain.states)}, POSITIVE, residual)


def losses_from_stationary(pi: StationaryDistribution, chain: ChainModel, N, M):
    """((delta1, omega1), (delta2, omega2)) for a threshold code.

    U1 loses throughput in Index(N) (it is served redundantly) and order in
    Index(-1..-(M-1)); mirrored for U2. An unbounded threshold contributes no
    throughput loss and sums the whole side.
    """
    right = [s for s in chain.states if isinstance(s, Index) and s.i > 0]
    left = [s for s in chain.states if isinstance(s, Index) and s.i < 0]
    delta1 = 0.0 if N == INF else pi[Index(int(N))]
    delta2 = 0.0 if M == INF else pi[Index(-int(M))]
    omega1 = sum((pi[s] for s in left if -s.i < M), 0.0)
    omega2 = sum((pi[s] for s in right if s.i < N), 0.0)
    return (delta1, omega1), (delta2, omega2)


def _point_from_chain(ch, chain, N, M) -> TradeoffPoint:
    pi = solve_stationary(chain)
    (d1, o1), (d2, o2) = losses_from_stationary(pi, chain, N, M)
    return TradeoffPoint((user_from_losses(ch.p1, d1, o1), user_from_losses(ch.p2, d2, o2)),
                         POSITIVE)


def nm_tradeoff(ch: ChannelParams, N, M) -> TradeoffPoint:
    """Trade-off of the (N, M) code from the exact stationary distribution.

    (inf, 1), (1, inf) and (inf, inf) are the fixed-priority and greedy codes
    and use their closed forms. Other unbounded cases use a truncated chain
    when positive-recurrent and the drift limits otherwise.
    """
    if N == INF and M == INF:
        return greedy_tradeoff(ch)
    if N == INF and M == 1:
        return fixed_priority_tradeoff(ch, 1)
    if N == 1 and M == INF:
        return fixed_priority_tradeoff(ch, 2)
    if N != INF and M != INF:
        return _point_from_chain(ch, build_nm_chain(ch, N, M), N, M)
    drifts_right = N == INF and ch.b > ch.c
    drifts_left = M == INF and ch.c > ch.b
    if drifts_right or drifts_left:
        return transient_tradeoff(ch)
    if (N == INF and ch.b == ch.c and ch.b > 0) or (M == INF and ch.b == ch.c and ch.b > 0):
        null = Undefined(Reason.NULL_RECURRENT)
        return TradeoffPoint(tuple(UserTradeoff(null, null, null, null) for _ in (1, 2)), NULL)
    return _point_from_chain(ch, truncated_chain(ch, N, M), N, M)


def composite_tradeoff(components) -> TradeoffPoint:
    """Convex combination of (TradeoffPoint, fraction) pairs on a common channel."""
    components = list(components)
    total = sum(x for _, x in components)
    if not components or abs(total - 1.0) > 1e-9:
        raise SchemeError(f"fractions must sum to 1, got {total}")
    users = []
    for u in (1, 2):
        values = {}
        for name in ("tau", "sigma", "delta", "omega"):
            parts = [(getattr(point.user(u), name), x) for point, x in components]
            if all(is_defined(v) for v, _ in parts):
                values[name] = sum(v * x for v, x in parts)
            else:
                values[name] = Undefined(Reason.UNDEFINED_COMPONENT)
        users.append(UserTradeoff(**values))
    regimes = {point.regime for point, x in components if x > 0}
    regime = regimes.pop() if len(regimes) == 1 else "mixed"
    return TradeoffPoint(tuple(users), regime)


def classify(ch: ChannelParams, scheme: Scheme) -> str:
    """Recurrence class of the decoding chain under an atomic scheme."""
    b, c = ch.b, ch.c
    if isinstance(scheme, Greedy):
        scheme = NM(INF, INF)
    elif isinstance(scheme, FixedPriority):
        scheme = NM(INF, 1) if scheme.primary == 1 else NM(1, INF)
    if not isinstance(scheme, NM):
        raise SchemeError(f"classify needs an atomic scheme, got {scheme}")
    if b == c == 0:
        return POSITIVE
    if scheme.N == INF and b >= c:
        return NULL if b == c else TRANSIENT_RIGHT
    if scheme.M == INF and c >= b:
        return NULL if b == c else TRANSIENT_LEFT
    return POSITIVE


def scheme_tradeoff(ch: ChannelParams, scheme: Scheme) -> TradeoffPoint:
    """Analytic trade-off of any scheme description.

    Randomized mixtures have no closed form here and come back undefined.
    """
    if isinstance(scheme, FixedPriority):
        return fixed_priority_tradeoff(ch, scheme.primary)
    if isinstance(scheme, Greedy):
        return greedy_tradeoff(ch)
    if isinstance(scheme, NM):
        return nm_tradeoff(ch, scheme.N, scheme.M)
    if isinstance(scheme, TimeShare):
        return composite_tradeoff((scheme_tradeoff(ch, s), x) for s, x in scheme.components)
    if isinstance(scheme, Randomized):
        missing = Undefined(Reason.NO_CLOSED_FORM)
        return TradeoffPoint(tuple(UserTradeoff(missing, missing, missing, missing)
                                   for _ in (1, 2)), "no-closed-form")
    raise SchemeError(f"unknown scheme {scheme!r}")
