"""Channel model, per-user in-order decoder and metric accounting.

A packet is represented by its 1-based index only; payloads are never
materialised and an XOR of two packets is the pair of their indices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import ChannelError, ProtocolViolation

PROBABILITY_TOL = 1e-12


class SlotOutcome(enum.IntEnum):
    """Erasure pattern of one slot."""

    BOTH = 0
    ONLY_U1 = 1
    ONLY_U2 = 2
    NEITHER = 3

    def receives(self, user: int) -> bool:
        if user == 1:
            return self in (SlotOutcome.BOTH, SlotOutcome.ONLY_U1)
        return self in (SlotOutcome.BOTH, SlotOutcome.ONLY_U2)

    @classmethod
    def parse(cls, token: str) -> "SlotOutcome":
        key = token.strip().lower().replace("_", "").replace("-", "")
        try:
            return _OUTCOME_ALIASES[key]
        except KeyError:
            raise ValueError(
                f"unknown slot outcome {token!r}; use one of both, u1, u2, none"
            ) from None


_OUTCOME_ALIASES = {
    "both": SlotOutcome.BOTH,
    "bothreceive": SlotOutcome.BOTH,
    "a": SlotOutcome.BOTH,
    "u1": SlotOutcome.ONLY_U1,
    "onlyu1": SlotOutcome.ONLY_U1,
    "b": SlotOutcome.ONLY_U1,
    "u2": SlotOutcome.ONLY_U2,
    "onlyu2": SlotOutcome.ONLY_U2,
    "c": SlotOutcome.ONLY_U2,
    "none": SlotOutcome.NEITHER,
    "neither": SlotOutcome.NEITHER,
    "d": SlotOutcome.NEITHER,
}


@dataclass(frozen=True)
class ChannelParams:
    """Joint per-slot distribution of the four erasure patterns.

    ``a``: both users receive, ``b``: only U1, ``c``: only U2, ``d``: neither.
    Slots are i.i.d.; the patterns may be correlated across users.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ChannelError(f"{name}={value!r} is not a number")
            if value < -PROBABILITY_TOL or value > 1 + PROBABILITY_TOL:
                raise ChannelError(f"{name}={value} outside [0, 1]")
        total = self.a + self.b + self.c + self.d
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ChannelError(f"a+b+c+d={total!r} differs from 1")

    @classmethod
    def independent(cls, p1: float, p2: float) -> "ChannelParams":
        return joint_probabilities(p1, p2)

    @property
    def p1(self) -> float:
        return self.a + self.b

    @property
    def p2(self) -> float:
        return self.a + self.c

    def p(self, user: int) -> float:
        return self.p1 if user == 1 else self.p2

    def swapped(self) -> "ChannelParams":
        """Same channel with the user labels exchanged."""
        return ChannelParams(self.a, self.c, self.b, self.d)

    def cumulative(self) -> tuple[float, float, float]:
        return (self.a, self.a + self.b, self.a + self.b + self.c)


def joint_probabilities(p1: float, p2: float) -> ChannelParams:
    """Pattern probabilities for independent channels with success ``p1``, ``p2``."""
    for name, value in (("p1", p1), ("p2", p2)):
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise ChannelError(f"{name}={value!r} outside [0, 1]")
    return ChannelParams(
        a=p1 * p2,
        b=p1 * (1 - p2),
        c=(1 - p1) * p2,
        d=(1 - p1) * (1 - p2),
    )


@dataclass(frozen=True)
class Single:
    """Uncoded transmission of packet ``k``."""

    k: int

    def packets(self) -> tuple[int, ...]:
        return (self.k,)

    def __str__(self):
        return f"s{self.k}"


@dataclass(frozen=True)
class Xor:
    """XOR of two distinct packets, stored with ``k1 < k2``."""

    k1: int
    k2: int

    def __post_init__(self):
        if self.k1 == self.k2:
            raise ProtocolViolation(f"XOR of packet {self.k1} with itself")
        if self.k1 > self.k2:
            k1, k2 = self.k2, self.k1
            object.__setattr__(self, "k1", k1)
            object.__setattr__(self, "k2", k2)

    def packets(self) -> tuple[int, ...]:
        return (self.k1, self.k2)

    def __str__(self):
        return f"s{self.k1}^s{self.k2}"


CodedCombination = Single | Xor


class ReceptionKind(enum.Enum):
    REDUNDANT = "redundant"
    AHEAD = "innovative-ahead"
    IN_ORDER = "innovative-in-order"


@dataclass(frozen=True)
class Reception:
    """Classification of one unerased slot at one user.

    ``packet`` is the packet decoded in the slot (None when redundant) and
    ``burst`` the number of packets delivered to the application.
    """

    kind: ReceptionKind
    packet: int | None = None
    burst: int = 0


class Decoder:
    """One user's decoded set and in-order delivery buffer.

    ``prefix`` is the largest m such that packets 1..m are delivered;
    ``buffered`` holds packets decoded out of order. The required packet is
    always ``prefix + 1``.
    """

    __slots__ = ("prefix", "buffered")

    def __init__(self, prefix: int = 0, buffered=()):
        self.prefix = prefix
        self.buffered = set(buffered)
        if any(k <= prefix + 1 for k in self.buffered):
            raise ValueError("buffered packets must exceed prefix + 1")

    @property
    def required(self) -> int:
        return self.prefix + 1

    @property
    def decoded_count(self) -> int:
        return self.prefix + len(self.buffered)

    def has(self, k: int) -> bool:
        return k <= self.prefix or k in self.buffered

    def copy(self) -> "Decoder":
        return Decoder(self.prefix, self.buffered)

    def receive(self, combo: CodedCombination) -> Reception:
        unknown = [k for k in combo.packets() if not self.has(k)]
        if not unknown:
            return Reception(ReceptionKind.REDUNDANT)
        if len(unknown) > 1:
            raise ProtocolViolation(
                f"{combo} received with neither packet decoded (prefix={self.prefix})"
            )
        k = unknown[0]
        if k != self.required:
            self.buffered.add(k)
            return Reception(ReceptionKind.AHEAD, packet=k)
        start = self.prefix
        self.prefix += 1
        while self.prefix + 1 in self.buffered:
            self.buffered.remove(self.prefix + 1)
            self.prefix += 1
        return Reception(ReceptionKind.IN_ORDER, packet=k, burst=self.prefix - start)

    def __eq__(self, other):
        if not isinstance(other, Decoder):
            return NotImplemented
        return self.prefix == other.prefix and self.buffered == other.buffered

    def __repr__(self):
        return f"Decoder(prefix={self.prefix}, buffered={sorted(self.buffered)})"


def receive_combination(decoder: Decoder, combo: CodedCombination) -> tuple[Decoder, Reception]:
    """Functional form of :meth:`Decoder.receive`; the input decoder is untouched."""
    updated = decoder.copy()
    return updated, updated.receive(combo)


class Reason(str, enum.Enum):
    NULL_RECURRENT = "null-recurrent"
    TRANSIENT_SIDE = "transient-side"
    NO_DATA = "no-data"
    NO_CLOSED_FORM = "no-closed-form"
    UNDEFINED_COMPONENT = "undefined-component"


@dataclass(frozen=True)
class Undefined:
    """A metric with no value; never equal to a number."""

    reason: Reason

    def __str__(self):
        return f"undefined({self.reason.value})"


Value = float | Undefined


def is_defined(value) -> bool:
    return not isinstance(value, Undefined)


@dataclass
class UserCounters:
    """Per-user counters over the counted window.

    X: unerased slots, Y: redundant receptions, Z: innovative receptions that
    did not decode the required packet, B: slots delivering a burst,
    ``delivered``: packets delivered in order within the window.
    """

    X: int = 0
    Y: int = 0
    Z: int = 0
    B: int = 0
    delivered: int = 0
    required: int = 1

    def record(self, reception: Reception | None):
        if reception is None:
            return
        self.X += 1
        if reception.kind is ReceptionKind.REDUNDANT:
            self.Y += 1
        elif reception.kind is ReceptionKind.AHEAD:
            self.Z += 1
        else:
            self.B += 1
            self.delivered += reception.burst
            self.required += reception.burst


@dataclass
class MetricsCounters:
    n: int = 0
    users: tuple[UserCounters, UserCounters] = field(
        default_factory=lambda: (UserCounters(), UserCounters())
    )


@dataclass(frozen=True)
class UserMetrics:
    tau: Value
    sigma: Value
    delta: Value
    omega: Value
    counters: UserCounters


@dataclass(frozen=True)
class MetricsReport:
    n: int
    users: tuple[UserMetrics, UserMetrics]

    def user(self, i: int) -> UserMetrics:
        return self.users[i - 1]


def finalize_metrics(counters: MetricsCounters) -> MetricsReport:
    """Turn raw counters into empirical throughput, smoothness and loss rates.

    Throughput is in-order packets delivered per counted slot, i.e.
    ``(r(n) - 1) / n`` for a run counted from the first slot. Loss rates are
    normalised by X and are :class:`Undefined` when a user saw no unerased slot.
    """
    n = counters.n
    users = []
    for u in counters.users:
        if u.B != u.X - u.Y - u.Z:
            raise ValueError(f"inconsistent counters: B={u.B}, X-Y-Z={u.X - u.Y - u.Z}")
        if n > 0:
            tau, sigma = u.delivered / n, u.B / n
        else:
            tau = sigma = Undefined(Reason.NO_DATA)
        if u.X > 0:
            delta, omega = u.Y / u.X, u.Z / u.X
        else:
            delta = omega = Undefined(Reason.NO_DATA)
        users.append(UserMetrics(tau, sigma, delta, omega, u))
    return MetricsReport(n, tuple(users))
