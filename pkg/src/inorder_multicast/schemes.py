"""Coding policies for two users and the Markov state of a decoder pair.

Every policy sends the required packet of one user or the XOR of both
required packets, and only sends the XOR when one side can decode it
instantly. Unbounded ``N``/``M`` thresholds are written as ``math.inf``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

from .core import CodedCombination, Decoder, Single, Xor
from .errors import ProtocolViolation, SchemeError

INF = math.inf
FRACTION_TOL = 1e-9


# -- scheme descriptions -----------------------------------------------------


@dataclass(frozen=True)
class FixedPriority:
    """Always serve ``primary``; XOR in the other user's packet when it is free."""

    primary: int = 1

    def __post_init__(self):
        if self.primary not in (1, 2):
            raise SchemeError(f"primary user must be 1 or 2, got {self.primary!r}")

    def __str__(self):
        return f"fixed:u{self.primary}"


@dataclass(frozen=True)
class Greedy:
    """Serve the leader; XOR when the lagger holds the leader's required packet."""

    def __str__(self):
        return "greedy"


@dataclass(frozen=True)
class NM:
    """Greedy coding that hands priority to the lagger at index >= N or <= -M."""

    N: float
    M: float

    def __post_init__(self):
        for name in ("N", "M"):
            value = getattr(self, name)
            if value != INF and (not float(value).is_integer() or value < 1):
                raise SchemeError(f"{name} must be an integer >= 1 or inf, got {value!r}")

    def __str__(self):
        return f"nm:{_fmt_threshold(self.N)},{_fmt_threshold(self.M)}"


@dataclass(frozen=True)
class TimeShare:
    """Contiguous blocks of each component inside every window of ``window`` slots."""

    components: tuple
    window: int

    def __post_init__(self):
        _check_components(self.components)
        if not isinstance(self.window, int) or self.window < 1:
            raise SchemeError(f"time-share window must be a positive integer, got {self.window!r}")

    def block_sizes(self) -> tuple[int, ...]:
        return largest_remainder([x for _, x in self.components], self.window)

    def __str__(self):
        return f"timeshare:[{_fmt_components(self.components)}]:{self.window}"


@dataclass(frozen=True)
class Randomized:
    """Independently each slot, use component r with probability x_r."""

    components: tuple

    def __post_init__(self):
        _check_components(self.components)

    def __str__(self):
        return f"random:[{_fmt_components(self.components)}]"


AtomicScheme = FixedPriority | Greedy | NM
Scheme = FixedPriority | Greedy | NM | TimeShare | Randomized
ATOMIC = (FixedPriority, Greedy, NM)


def _check_components(components):
    if not components:
        raise SchemeError("composite scheme needs at least one component")
    total = 0.0
    for item in components:
        if len(item) != 2:
            raise SchemeError(f"component {item!r} is not a (scheme, fraction) pair")
        scheme, x = item
        if not isinstance(scheme, ATOMIC):
            raise SchemeError(f"composite components must be atomic schemes, got {scheme}")
        if not 0.0 <= x <= 1.0:
            raise SchemeError(f"fraction {x} for {scheme} outside [0, 1]")
        total += x
    if abs(total - 1.0) > FRACTION_TOL:
        raise SchemeError(f"component fractions sum to {total}, not 1")


def largest_remainder(fractions, total: int) -> tuple[int, ...]:
    """Integer block sizes summing to ``total``; ties go to the earlier entry."""
    exact = [x * total for x in fractions]
    sizes = [math.floor(e + 1e-9) for e in exact]
    left = total - sum(sizes)
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:max(left, 0)]:
        sizes[i] += 1
    return tuple(sizes)


def components_of(scheme: Scheme) -> tuple[tuple[AtomicScheme, float], ...]:
    if isinstance(scheme, (TimeShare, Randomized)):
        return tuple(scheme.components)
    return ((scheme, 1.0),)


def component_for_slot(scheme: Scheme, slot: int, u: float = 0.0) -> AtomicScheme:
    """Atomic scheme in charge of 1-based ``slot``.

    ``u`` is the slot's policy uniform, only consulted by :class:`Randomized`.
    """
    if isinstance(scheme, TimeShare):
        pos = (slot - 1) % scheme.window
        end = 0
        for (component, _), size in zip(scheme.components, scheme.block_sizes()):
            end += size
            if pos < end:
                return component
        raise AssertionError("block sizes do not cover the window")
    if isinstance(scheme, Randomized):
        acc = 0.0
        for component, x in scheme.components:
            acc += x
            if u < acc:
                return component
        return scheme.components[-1][0]
    return scheme


# -- textual form ------------------------------------------------------------


def _fmt_threshold(value) -> str:
    return "inf" if value == INF else str(int(value))


def _fmt_fraction(x: float) -> str:
    return repr(float(x))


def _fmt_components(components) -> str:
    return ",".join(f"{s}@{_fmt_fraction(x)}" for s, x in components)


_COMPONENT_RE = re.compile(r"\s*([^@]+?)\s*@\s*([0-9.eE+\-/]+)\s*(?:,|$)")
GRAMMAR = "fixed:u1 | fixed:u2 | greedy | nm:N,M | timeshare:[spec@x,...]:W | random:[spec@x,...]"


def _parse_threshold(token: str):
    token = token.strip().lower()
    if token in ("inf", "infinity", "∞"):
        return INF
    if not token.isdigit():
        raise SchemeError(f"bad threshold {token!r}: expected a positive integer or inf")
    return int(token)


def _parse_fraction(token: str) -> float:
    try:
        return float(Fraction(token))
    except (ValueError, ZeroDivisionError):
        raise SchemeError(f"bad fraction {token!r}") from None


def _parse_components(body: str):
    components = []
    pos = 0
    while pos < len(body):
        m = _COMPONENT_RE.match(body, pos)
        if not m or m.end() == pos:
            raise SchemeError(f"cannot parse component list {body!r}; expected spec@x,...")
        components.append((_parse(m.group(1)), _parse_fraction(m.group(2))))
        pos = m.end()
    return tuple(components)


def parse_scheme(text: str) -> Scheme:
    """Parse the canonical textual form (see ``GRAMMAR``)."""
    try:
        return _parse(text)
    except SchemeError as exc:
        if GRAMMAR in str(exc):
            raise
        raise SchemeError(f"{exc}; grammar: {GRAMMAR}") from None


def _parse(text: str) -> Scheme:
    s = text.strip()
    low = s.lower()
    if low == "greedy":
        return Greedy()
    if low in ("fixed:u1", "fixed:u2"):
        return FixedPriority(int(low[-1]))
    if low.startswith("nm:"):
        parts = s[3:].split(",")
        if len(parts) != 2:
            raise SchemeError(f"bad scheme {text!r}: nm takes two thresholds N,M")
        return NM(_parse_threshold(parts[0]), _parse_threshold(parts[1]))
    m = re.fullmatch(r"timeshare:\[(.*)\]:(\d+)", s, flags=re.IGNORECASE)
    if m:
        return TimeShare(_parse_components(m.group(1)), int(m.group(2)))
    m = re.fullmatch(r"random:\[(.*)\]", s, flags=re.IGNORECASE)
    if m:
        return Randomized(_parse_components(m.group(1)))
    raise SchemeError(f"unknown scheme {text!r}; grammar: {GRAMMAR}")


# -- Markov state ------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Index:
    """Plain state: gaps(U2) - gaps(U1)."""

    i: int

    def __str__(self):
        return str(self.i)


@dataclass(frozen=True, order=True)
class Advantage:
    """The lagger holds the leader's required packet; the leader does not."""

    i: int

    def __post_init__(self):
        if self.i == 0:
            raise ValueError("advantage state needs a nonzero index")

    def __str__(self):
        return f"{self.i}'"


MarkovState = Index | Advantage


def parse_state(text: str) -> MarkovState:
    text = text.strip()
    if text.endswith("'"):
        return Advantage(int(text[:-1]))
    return Index(int(text))


def gaps(dec: Decoder, rmax: int) -> int:
    """Undecoded packets of ``dec`` with index below ``rmax``."""
    held = min(dec.prefix, rmax - 1) + sum(1 for k in dec.buffered if k < rmax)
    return max(rmax - 1, 0) - held


def markov_state(dec1: Decoder, dec2: Decoder) -> MarkovState:
    r1, r2 = dec1.required, dec2.required
    rmax = max(r1, r2)
    i = gaps(dec2, rmax) - gaps(dec1, rmax)
    if r1 != r2:
        lagger, leader = (dec2, dec1) if r1 > r2 else (dec1, dec2)
        if lagger.has(rmax) and not leader.has(rmax):
            return Advantage(i)
    return Index(i)


# -- decisions ---------------------------------------------------------------


def xor_required(dec1: Decoder, dec2: Decoder) -> Xor:
    """XOR of the two required packets, leader's first.

    Raises ProtocolViolation unless one user already holds the other's
    required packet.
    """
    r1, r2 = dec1.required, dec2.required
    if r1 == r2:
        raise ProtocolViolation("no XOR exists when both users require the same packet")
    if not (dec1.has(r2) or dec2.has(r1)):
        raise ProtocolViolation(f"neither user can decode s{r1}^s{r2}")
    return Xor(max(r1, r2), min(r1, r2))


def _leader_lagger(dec1, dec2):
    return (dec1, dec2) if dec1.required > dec2.required else (dec2, dec1)


def decide_fixed_priority(dec1: Decoder, dec2: Decoder, primary: int = 1) -> CodedCombination:
    own, other = (dec1, dec2) if primary == 1 else (dec2, dec1)
    if own.required > other.required and other.has(own.required):
        return xor_required(dec1, dec2)
    return Single(own.required)


def decide_greedy(dec1: Decoder, dec2: Decoder) -> CodedCombination:
    if dec1.required == dec2.required:
        return Single(dec1.required)
    leader, lagger = _leader_lagger(dec1, dec2)
    if lagger.has(leader.required):
        return xor_required(dec1, dec2)
    return Single(leader.required)


def decide_nm(dec1: Decoder, dec2: Decoder, N=INF, M=INF) -> CodedCombination:
    if N != INF and N < 1 or M != INF and M < 1:
        raise SchemeError("N and M must be >= 1")
    state = markov_state(dec1, dec2)
    if isinstance(state, Advantage):
        return xor_required(dec1, dec2)
    if state.i >= N or state.i <= -M:
        return Single(min(dec1.required, dec2.required))
    return decide_greedy(dec1, dec2)


def decide_atomic(scheme: AtomicScheme, dec1: Decoder, dec2: Decoder) -> CodedCombination:
    if isinstance(scheme, FixedPriority):
        return decide_fixed_priority(dec1, dec2, scheme.primary)
    if isinstance(scheme, Greedy):
        return decide_greedy(dec1, dec2)
    if isinstance(scheme, NM):
        return decide_nm(dec1, dec2, scheme.N, scheme.M)
    raise SchemeError(f"not an atomic scheme: {scheme!r}")


def decide(scheme: Scheme, dec1: Decoder, dec2: Decoder, slot: int = 1, u: float = 0.0) -> CodedCombination:
    """Combination sent in ``slot`` given the decoders after the previous slot."""
    return decide_atomic(component_for_slot(scheme, slot, u), dec1, dec2)
