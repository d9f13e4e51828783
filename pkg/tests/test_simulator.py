import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inorder_multicast.analysis import build_nm_chain, truncated_chain
from inorder_multicast.core import (
    ChannelParams,
    MetricsCounters,
    ReceptionKind,
    Single,
    SlotOutcome,
    UserCounters,
    Xor,
    finalize_metrics,
    joint_probabilities,
)
from inorder_multicast.errors import SimulationAbort
from inorder_multicast.schemes import Advantage, Index, parse_scheme
from inorder_multicast.simulator import (
    ScriptedChannel,
    SimConfig,
    iter_reference,
    run_batch,
    run_simulation,
)

outcomes = st.lists(st.sampled_from(list(SlotOutcome)), min_size=1, max_size=300)
ATOMIC = ["fixed:u1", "fixed:u2", "greedy", "nm:1,1", "nm:2,3", "nm:inf,2", "nm:4,inf"]


def _trace(script, scheme):
    cfg = SimConfig(scheme, script=ScriptedChannel.parse(script), trace_length=10)
    return run_simulation(cfg).trace


def _decoded(rec):
    if rec is None or rec.kind is ReceptionKind.REDUNDANT:
        return None
    return rec.packet


def test_fixed_priority_walkthrough():
    trace = _trace("u1,u2,both,u1,both", "fixed:u1")
    assert [r.sent for r in trace] == [Single(1), Single(2), Xor(1, 2), Single(3), Single(4)]
    assert [_decoded(r.receptions[1]) for r in trace] == [None, 2, 1, None, 4]


def test_greedy_walkthrough():
    trace = _trace("u1,u2,u2,u1,both", "greedy")
    assert [r.sent for r in trace] == [Single(1), Single(2), Xor(1, 2), Single(3), Xor(2, 3)]
    last = trace[-1]
    assert _decoded(last.receptions[0]) == 2
    assert _decoded(last.receptions[1]) == 3


def test_empty_script():
    result = run_simulation(SimConfig("greedy", script=ScriptedChannel(())))
    assert result.report.n == 0
    assert result.trace is None or result.trace == []


@pytest.mark.parametrize("scheme", ATOMIC + ["timeshare:[nm:1,1@0.5,greedy@0.5]:10",
                                            "random:[greedy@0.5,nm:1,1@0.5]"])
def test_perfect_channel(scheme):
    r = run_simulation(SimConfig(scheme, ChannelParams(1, 0, 0, 0), horizon=100))
    for u in (1, 2):
        assert r.report.user(u).tau == 1 and r.report.user(u).sigma == 1


def test_determinism_and_batch():
    cfg = SimConfig("nm:2,2", joint_probabilities(0.6, 0.7), horizon=20_000, seed=3)
    a, b = run_batch([cfg, cfg])
    assert a.report == b.report
    assert run_simulation(cfg).report == a.report
    parallel = run_batch([cfg, cfg], workers=2)
    assert parallel[0].report == a.report


def test_batch_seed_spread():
    base = SimConfig("greedy", joint_probabilities(0.7, 0.4), horizon=200_000)
    results = run_batch([base, SimConfig(**{**base.__dict__, "seed": 99})])
    t = [r.report.user(1).tau for r in results]
    assert t[0] != t[1] and abs(t[0] - t[1]) < 10 / np.sqrt(200_000)


def test_batch_rejects_empty_and_collects_errors():
    with pytest.raises(ValueError):
        run_batch([])
    bad = SimConfig("fixed:u1", joint_probabilities(0.9, 0.3), horizon=10_000, buffer_cap=5,
                    drift_limit=None)
    out = run_batch([bad])
    assert isinstance(out[0], SimulationAbort)


def _reference_counters(seq, scheme):
    counters = (UserCounters(), UserCounters())
    for record, d1, d2 in iter_reference(seq, parse_scheme(scheme)):
        for u in (0, 1):
            if record.receptions[u] is not None:
                counters[u].record(record.receptions[u])
    for u, d in enumerate((d1, d2)):
        counters[u].required = d.required
    return MetricsCounters(len(seq), counters)


@settings(max_examples=60, deadline=None)
@given(outcomes, st.sampled_from(ATOMIC + ["timeshare:[nm:1,1@0.3,fixed:u2@0.7]:7"]))
def test_kernel_matches_reference(seq, scheme):
    script = ScriptedChannel(tuple(seq))
    fast = run_simulation(SimConfig(scheme, script=script, drift_limit=None))
    assert fast.report == finalize_metrics(_reference_counters(seq, scheme))


@settings(max_examples=100, deadline=None)
@given(outcomes, st.sampled_from(ATOMIC))
def test_prefix_causal(seq, scheme):
    # the first k slots of a longer script give the same trace prefix
    k = len(seq) // 2
    full = [r for r, _, _ in iter_reference(seq, parse_scheme(scheme))]
    part = [r for r, _, _ in iter_reference(seq[:k], parse_scheme(scheme))]
    assert full[:k] == part


@settings(max_examples=50, deadline=None)
@given(outcomes, st.sampled_from([(1, 1), (2, 3), (4, 2)]))
def test_state_moves_follow_chain(seq, nm):
    chain = build_nm_chain(joint_probabilities(0.5, 0.5), *nm)
    records = [r for r, _, _ in iter_reference(seq, parse_scheme(f"nm:{nm[0]},{nm[1]}"))]
    for before, after in zip(records, records[1:]):
        assert chain.next_state(before.state, before.outcome) == after.state


def test_fixed_u1_moves_follow_truncated_chain():
    chain = truncated_chain(joint_probabilities(0.5, 0.8), float("inf"), 1)
    cfg = SimConfig("fixed:u1", joint_probabilities(0.5, 0.8), horizon=5000, trace_length=5000)
    records = run_simulation(cfg).trace
    for before, after in zip(records, records[1:]):
        if before.state in chain.moves and abs(before.state.i) < max(s.i for s in chain.states):
            assert chain.next_state(before.state, before.outcome) == after.state


def test_occupancy_histogram():
    cfg = SimConfig("nm:3,2", joint_probabilities(0.6, 0.7), horizon=50_000, warmup=1000,
                    track_occupancy=True)
    r = run_simulation(cfg)
    assert sum(r.occupancy.values()) == 49_000
    assert set(r.occupancy) <= set(build_nm_chain(cfg.channel, 3, 2).states)


def test_fixed_primary_has_no_redundancy():
    r = run_simulation(SimConfig("fixed:u1", joint_probabilities(0.5, 0.8), horizon=100_000))
    c = r.report.user(1).counters
    assert c.Y == 0 and c.Z == 0


def test_drift_stop():
    r = run_simulation(SimConfig("fixed:u1", joint_probabilities(0.9, 0.3), horizon=1_000_000,
                                 drift_limit=50))
    assert r.status == "drift" and r.notes
    assert r.slots_run < 1_000_000
    assert isinstance(r.final_state, (Index, Advantage)) and abs(r.final_state.i) > 50


def test_buffer_cap_abort():
    with pytest.raises(SimulationAbort) as info:
        run_simulation(SimConfig("fixed:u1", joint_probabilities(0.9, 0.3), horizon=100_000,
                                 buffer_cap=20))
    assert info.value.slot > 0


def test_degenerate_random_mixture_is_the_atom():
    ch = joint_probabilities(0.6, 0.7)
    a = run_simulation(SimConfig("greedy", ch, horizon=3000, seed=5, trace_length=3000))
    b = run_simulation(SimConfig("random:[greedy@1.0]", ch, horizon=3000, seed=5,
                                 trace_length=3000))
    assert [r.sent for r in a.trace] == [r.sent for r in b.trace]
    assert a.report == b.report


def test_convergence_flag():
    r = run_simulation(SimConfig("nm:2,2", joint_probabilities(0.6, 0.6), horizon=400_000))
    assert r.converged is True
    assert r.halves is not None


def test_buffer_identity():
    # each in-order event delivers at least one packet; buffered packets make up the rest
    r = run_simulation(SimConfig("greedy", joint_probabilities(0.7, 0.5), horizon=50_000,
                                 drift_limit=None))
    for u in (1, 2):
        c = r.report.user(u).counters
        assert c.B <= c.delivered <= c.X - c.Y
        assert c.delivered == c.required - 1
        assert r.report.user(u).tau == pytest.approx(c.delivered / r.report.n)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig("greedy", joint_probabilities(0.5, 0.5), horizon=10, warmup=10)
    with pytest.raises(ValueError):
        SimConfig("greedy")
    with pytest.raises(ValueError):
        SimConfig("greedy", script=ScriptedChannel.parse("u1,u2"), horizon=3)
