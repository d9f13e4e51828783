"""Seeded slot-by-slot Monte-Carlo engine.

Random streams: ``numpy.random.SeedSequence(seed)`` is spawned into two
PCG64 generators. The first draws one uniform per slot that selects the
erasure pattern (``u < a`` both, ``< a+b`` only U1, ``< a+b+c`` only U2,
otherwise neither). The second draws one uniform per slot that picks the
component of a :class:`~inorder_multicast.schemes.Randomized` scheme and is
not consumed by other schemes. Keeping channel and policy draws apart gives
every scheme the same channel realisation for a given seed.

Long runs go through the compiled loop in :mod:`._kernel`; traces and the
per-slot property checks use :func:`iter_reference`, a plain Python loop
over :class:`~inorder_multicast.core.Decoder` objects.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel
from .analysis import NULL, classify
from .core import (
    ChannelParams,
    CodedCombination,
    Decoder,
    MetricsCounters,
    MetricsReport,
    Reception,
    SlotOutcome,
    UserCounters,
    finalize_metrics,
)
from .errors import ProtocolViolation, SimulationAbort
from .schemes import (
    INF,
    FixedPriority,
    Greedy,
    MarkovState,
    NM,
    Randomized,
    Scheme,
    TimeShare,
    Advantage,
    Index,
    component_for_slot,
    components_of,
    decide_atomic,
    markov_state,
    parse_scheme,
)

log = logging.getLogger(__name__)

CHUNK = 1 << 16
DEFAULT_DRIFT_LIMIT = 100_000
DEFAULT_BUFFER_CAP = 10**7
DEFAULT_AGREEMENT_TOL = 0.01


@dataclass(frozen=True)
class ScriptedChannel:
    """Fixed sequence of erasure patterns used instead of random sampling."""

    outcomes: tuple[SlotOutcome, ...]

    @classmethod
    def parse(cls, text: str) -> "ScriptedChannel":
        tokens = [t for t in text.replace(";", ",").split(",") if t.strip()]
        return cls(tuple(SlotOutcome.parse(t) for t in tokens))

    def __len__(self):
        return len(self.outcomes)


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``drift_limit`` stops the run once ``|state index|`` exceeds it (None
    disables the check); ``buffer_cap`` aborts when a user's out-of-order
    buffer grows past it. With a ``script``, ``channel`` is ignored and the
    horizon is the script length.
    """

    scheme: Scheme
    channel: ChannelParams | None = None
    horizon: int | None = None
    seed: int = 0
    warmup: int = 0
    track_occupancy: bool = False
    trace_length: int = 0
    script: ScriptedChannel | None = None
    drift_limit: int | None = DEFAULT_DRIFT_LIMIT
    buffer_cap: int = DEFAULT_BUFFER_CAP
    agreement_tol: float = DEFAULT_AGREEMENT_TOL

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", parse_scheme(self.scheme))
        if self.script is not None:
            if self.horizon is None:
                object.__setattr__(self, "horizon", len(self.script))
            elif self.horizon != len(self.script):
                raise ValueError(
                    f"horizon {self.horizon} differs from script length {len(self.script)}"
                )
        elif self.channel is None:
            raise ValueError("a channel or a script is required")
        if self.horizon is None or self.horizon < 0 or (self.script is None and self.horizon < 1):
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.warmup < 0 or (self.horizon > 0 and self.warmup >= self.horizon):
            raise ValueError(f"warmup {self.warmup} must lie in [0, horizon)")
        if self.trace_length < 0:
            raise ValueError("trace_length must be >= 0")


@dataclass(frozen=True)
class TraceRecord:
    """One slot of a run, with decoder-derived fields taken before the slot."""

    slot: int
    sent: CodedCombination
    outcome: SlotOutcome
    receptions: tuple[Reception | None, Reception | None]
    required: tuple[int, int]
    state: MarkovState
    scheme: Scheme


@dataclass
class SimResult:
    config: SimConfig
    report: MetricsReport
    halves: tuple[MetricsReport, MetricsReport] | None = None
    converged: bool | None = None
    status: str = "completed"
    slots_run: int = 0
    occupancy: dict | None = None
    trace: list[TraceRecord] | None = None
    final_state: MarkovState | None = None
    notes: list[str] = field(default_factory=list)


# -- reference engine --------------------------------------------------------


def iter_reference(outcomes, scheme: Scheme, policy_uniforms=None, dec1=None, dec2=None):
    """Yield (TraceRecord, dec1, dec2) per slot using the Python decoder model.

    The decoders are mutated in place and yielded after the slot is applied.
    """
    dec1 = Decoder() if dec1 is None else dec1
    dec2 = Decoder() if dec2 is None else dec2
    for j, outcome in enumerate(outcomes):
        slot = j + 1
        u = 0.0 if policy_uniforms is None else float(policy_uniforms[j])
        component = component_for_slot(scheme, slot, u)
        state = markov_state(dec1, dec2)
        required = (dec1.required, dec2.required)
        combo = decide_atomic(component, dec1, dec2)
        outcome = SlotOutcome(outcome)
        rec1 = dec1.receive(combo) if outcome.receives(1) else None
        rec2 = dec2.receive(combo) if outcome.receives(2) else None
        yield TraceRecord(slot, combo, outcome, (rec1, rec2), required, state, component), dec1, dec2


# -- compiled engine ---------------------------------------------------------


def _encode(scheme: Scheme):
    kinds, thr_n, thr_m = [], [], []
    for component, _ in components_of(scheme):
        if isinstance(component, FixedPriority):
            kinds.append(component.primary)
            thr_n.append(0)
            thr_m.append(0)
        elif isinstance(component, Greedy):
            kinds.append(0)
            thr_n.append(0)
            thr_m.append(0)
        elif isinstance(component, NM):
            kinds.append(0)
            thr_n.append(0 if component.N == INF else int(component.N))
            thr_m.append(0 if component.M == INF else int(component.M))
        else:
            raise TypeError(f"cannot encode {component!r}")
    return (np.array(kinds, dtype=np.int64), np.array(thr_n, dtype=np.int64),
            np.array(thr_m, dtype=np.int64))


def sample_outcomes(rng: np.random.Generator, channel: ChannelParams, k: int) -> np.ndarray:
    u = rng.random(k)
    return np.searchsorted(np.array(channel.cumulative()), u, side="right").astype(np.int8)


def _component_indices(scheme: Scheme, start: int, k: int, policy_rng) -> tuple[np.ndarray, np.ndarray | None]:
    """Component index for 0-based slots start..start+k-1, plus the policy uniforms."""
    if isinstance(scheme, TimeShare):
        ends = np.cumsum(scheme.block_sizes())
        pos = (np.arange(start, start + k) % scheme.window)
        return np.searchsorted(ends, pos, side="right").astype(np.int64), None
    if isinstance(scheme, Randomized):
        u = policy_rng.random(k)
        cum = np.cumsum([x for _, x in scheme.components])
        idx = np.searchsorted(cum, u, side="right")
        return np.minimum(idx, len(cum) - 1).astype(np.int64), u
    return np.zeros(k, dtype=np.int64), None


def _counters_from(cnt: np.ndarray, n: int, st: np.ndarray) -> MetricsCounters:
    users = tuple(
        UserCounters(X=int(c[0]), Y=int(c[1]), Z=int(c[2]), B=int(c[3]),
                     delivered=int(c[4]), required=int(st[u]) + 1)
        for u, c in enumerate(cnt)
    )
    return MetricsCounters(n=n, users=users)


def _state_from(st, dec1, dec2) -> MarkovState:
    r1, r2 = int(st[0]) + 1, int(st[1]) + 1
    if r1 == r2:
        return Index(0)
    if r1 > r2:
        adv = bool(dec2[r1])
        i = r1 - 1 - (int(st[3]) - adv)
    else:
        adv = bool(dec1[r2])
        i = -(r2 - 1 - (int(st[2]) - adv))
    return Advantage(i) if adv else Index(i)


def run_simulation(config: SimConfig) -> SimResult:
    """Run one configuration; deterministic in ``config``."""
    scheme = config.scheme
    horizon = config.horizon
    kinds, thr_n, thr_m = _encode(scheme)
    chan_seq, pol_seq = np.random.SeedSequence(config.seed).spawn(2)
    chan_rng = np.random.Generator(np.random.PCG64(chan_seq))
    pol_rng = np.random.Generator(np.random.PCG64(pol_seq))

    dec1 = np.zeros(horizon + 3, dtype=np.bool_)
    dec2 = np.zeros(horizon + 3, dtype=np.bool_)
    st = np.zeros(4, dtype=np.int64)
    cnt = np.zeros((2, 5), dtype=np.int64)
    record = config.track_occupancy
    occupancy = Counter()
    drift_limit = 0 if config.drift_limit is None else int(config.drift_limit)

    warmup = config.warmup
    mid = warmup + (horizon - warmup) // 2
    cuts = sorted({0, warmup, mid, horizon})
    segments = []
    for lo, hi in zip(cuts, cuts[1:]):
        segments.extend((s, min(s + CHUNK, hi)) for s in range(lo, hi, CHUNK))

    trace_outcomes, trace_uniforms = [], []
    first_half = None
    status, done = _kernel.OK, horizon
    for lo, hi in segments:
        k = hi - lo
        if config.script is not None:
            outcomes = np.array([int(o) for o in config.script.outcomes[lo:hi]], dtype=np.int8)
        else:
            outcomes = sample_outcomes(chan_rng, config.channel, k)
        comp, uniforms = _component_indices(scheme, lo, k, pol_rng)
        if lo < config.trace_length:
            take = min(k, config.trace_length - lo)
            trace_outcomes.extend(int(o) for o in outcomes[:take])
            if uniforms is not None:
                trace_uniforms.extend(uniforms[:take])
        rec_index = np.zeros(k if record else 1, dtype=np.int64)
        rec_adv = np.zeros(k if record else 1, dtype=np.bool_)
        status, j = _kernel.run_slots(
            outcomes, comp, kinds, thr_n, thr_m, dec1, dec2, st, cnt,
            lo, warmup, drift_limit, config.buffer_cap, record, rec_index, rec_adv,
        )
        if record:
            first = max(warmup - lo, 0)
            if j > first:
                keys = rec_index[first:j] * 2 + rec_adv[first:j]
                vals, counts = np.unique(keys, return_counts=True)
                for key, count in zip(vals.tolist(), counts.tolist()):
                    occupancy[key] += count
        if status != _kernel.OK:
            done = lo + j
            break
        if hi == mid and mid > warmup:
            first_half = (_counters_from(cnt, mid - warmup, st), cnt.copy())

    state = _state_from(st, dec1, dec2)
    if status == _kernel.CAP:
        raise SimulationAbort(
            f"out-of-order buffer exceeded {config.buffer_cap} packets at slot {done + 1} "
            f"(state {state})", slot=done + 1, state=state,
        )
    if status == _kernel.VIOLATION:
        raise ProtocolViolation(f"undecodable XOR at slot {done + 1} (state {state})")

    counted = max(done - warmup, 0)
    report = finalize_metrics(_counters_from(cnt, counted, st))
    result = SimResult(config=config, report=report, slots_run=done, final_state=state)
    if status == _kernel.DRIFT:
        result.status = "drift"
        result.notes.append(
            f"state index passed {drift_limit} at slot {done + 1}; metrics cover {counted} slots"
        )
        log.info("run stopped on drift at slot %d", done + 1)
    elif first_half is not None and horizon - mid > 0:
        first_counters, first_cnt = first_half
        second_counters = _counters_from(cnt - first_cnt, horizon - mid, st)
        halves = (finalize_metrics(first_counters), finalize_metrics(second_counters))
        result.halves = halves
        result.converged = halves_agree(halves, config.agreement_tol)
        if config.script is None and isinstance(scheme, (FixedPriority, Greedy, NM)):
            regime = classify(config.channel, scheme)
            if regime == NULL:
                result.converged = False
                result.notes.append("null-recurrent chain: long-run metrics are ill-defined")

    if record:
        hist = {}
        for key, count in sorted(occupancy.items()):
            i, adv = divmod(key, 2)
            hist[Advantage(i) if adv else Index(i)] = count
        result.occupancy = hist
    if config.trace_length:
        uniforms = trace_uniforms if trace_uniforms else None
        result.trace = [rec for rec, _, _ in iter_reference(trace_outcomes, scheme, uniforms)]
    return result


def halves_agree(halves, tol: float) -> bool:
    """True when throughput and smoothness of both users agree across the halves."""
    first, second = halves
    for u in (1, 2):
        for name in ("tau", "sigma"):
            if abs(getattr(first.user(u), name) - getattr(second.user(u), name)) > tol:
                return False
    return True


def _run_catching(config):
    try:
        return run_simulation(config)
    except Exception as exc:  # collected per run
        return exc


def run_batch(configs, workers: int | None = None) -> list:
    """Run configurations independently; results (or the raised exception) in input order."""
    configs = list(configs)
    if not configs:
        raise ValueError("run_batch needs at least one configuration")
    if workers is None or workers <= 1:
        return [_run_catching(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_catching, configs))


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=seed)
